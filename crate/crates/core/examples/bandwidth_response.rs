//! Bandwidth best responses at fixed prices and their mutual fixed point.

use relay_game::config::ScenarioConfig;
use relay_game::mmd_game::{bandwidth_equilibrium, best_response_bandwidth};

pub fn run_example() -> relay_game::Result<()> {
    let cfg = ScenarioConfig::default();
    let game = cfg.bandwidth_game([1.0, 1.0])?;
    println!("prices {:?}, cost {:?}, cap {}", game.prices, game.cost, game.omega_cap);
    println!("omega_other  best omega_1  best omega_2");
    for w in [5.0, 10.0, 20.0, 30.0, 40.0, 50.0] {
        let b1 = best_response_bandwidth(&game, 0, w)?;
        let b2 = best_response_bandwidth(&game, 1, w)?;
        println!("{w:>11.1}  {b1:>12.4}  {b2:>12.4}");
    }
    let eq = bandwidth_equilibrium(&game, [10.0, 45.0], 1e-9, 1000)?;
    println!("equilibrium ({:.4}, {:.4}) after {} rounds", eq.omega[0], eq.omega[1], eq.iterations);
    let n = game.n;
    let (y1, y2) = (game.y[0], game.y[1]);
    println!("analytic symmetric point n Y1 Y2 / (c (Y1 + Y2)^2) = {:.4}", n * y1 * y2 / (game.cost[0] * (y1 + y2).powi(2)));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("bandwidth example failed");
}
