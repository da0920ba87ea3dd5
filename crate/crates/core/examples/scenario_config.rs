//! Loading a scenario file: defaults, overrides and the derived tables.

use relay_game::config::parse_config;

const SCENARIO: &str = r#"
seed = 7

[group.a]
size = 12

[group.b]
size = 28
h_sr = 0.25
h_sd = 0.21
h_rd = 0.35

[mmd.r1]
omega = 25.0
price = 1.5

[mmd.r2]
omega = 35.0
price = 1.8
cost = 0.4

[evolution]
dt = 0.02
"#;

pub fn run_example() -> relay_game::Result<()> {
    let cfg = parse_config(SCENARIO)?;
    println!("groups {:?} with sizes {:?}", cfg.group_names(), cfg.group_sizes());
    println!("Y table {:?}", cfg.y_table()?);
    println!("pricing game {:?}", cfg.pricing_game()?);
    println!("delay steps {}", cfg.evo_params().delay_steps());

    match parse_config("[evolution]\ndelta = 0.0\n") {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => println!("unexpectedly accepted"),
    }
    match parse_config("[sim]\narea = \"wide\"\n") {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => println!("unexpectedly accepted"),
    }
    println!("resolved scenario:\n{}", cfg.to_toml_string());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("config example failed");
}
