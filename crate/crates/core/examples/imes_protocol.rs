//! The distributed protocol on the default two-MMD scenario, first at fixed
//! bandwidth (pricing only) and then with bandwidth updates enabled.

use relay_game::config::ScenarioConfig;
use relay_game::imes::run_imes;
use relay_game::mmd_game::nash_prices;
use relay_game::omd_game::equilibrium_share_closed;

pub fn run_example() -> relay_game::Result<()> {
    let cfg = ScenarioConfig::default();
    let scenario = cfg.imes_scenario()?;
    let game = cfg.pricing_game()?;
    let nash = nash_prices(&game)?;

    let mut pricing_only = cfg.imes_config();
    pricing_only.mu_omega = 0.0;
    let trace = run_imes(&pricing_only, &scenario)?;
    let p = trace.final_prices();
    let counts = trace.final_counts();
    let n1 = equilibrium_share_closed(p[0], p[1], game.omega[0], game.omega[1], game.y[0], game.y[1], game.n);
    println!("pricing only: {:?} after {} rounds", trace.status, trace.rounds.len());
    println!("  prices ({:.4}, {:.4}) vs solver ({:.4}, {:.4})", p[0], p[1], nash.prices[0], nash.prices[1]);
    println!("  attached {:?}, closed-form share {n1:.3}", counts);
    for r in trace.rounds.iter().step_by(10).take(5) {
        let prices: Vec<String> = r.mmds.iter().map(|m| format!("{:.4}", m.price)).collect();
        println!("  round {:>3}: prices [{}], counts {:?}", r.round, prices.join(", "), r.group_counts);
    }

    let full = run_imes(&cfg.imes_config(), &scenario)?;
    println!("with bandwidth updates: {:?} after {} rounds", full.status, full.rounds.len());
    for (i, (w, p)) in full.final_strategies.iter().enumerate() {
        println!("  mmd {i}: omega {w:.3}, price {p:.4}, attached {}", full.final_counts()[i]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("protocol example failed");
}
