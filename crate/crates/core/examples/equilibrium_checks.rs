//! Numerical checks behind the existence and uniqueness of the Nash prices:
//! best-response slopes in (0, 1), contraction modulus below 1, and the
//! Lambert-W round trip.

use relay_game::commands::lambert_sample;
use relay_game::config::ScenarioConfig;
use relay_game::lambert::lambert_w;
use relay_game::mmd_game::{best_response_slope, supermodularity_check};

pub fn run_example() -> relay_game::Result<()> {
    let game = ScenarioConfig::default().pricing_game()?;
    let grid: Vec<f64> = (1..=50).map(|k| 0.1 * k as f64).collect();
    let rep = supermodularity_check(&grid, &grid, &game)?;
    println!("{} grid points, slopes in (0, 1) and lambda < 1: {}", rep.points, rep.holds);
    println!("plain slope range [{:.5}, {:.5}]", rep.plain.min, rep.plain.max);
    println!("weighted slope ranges {:?}", rep.weighted);
    println!("largest lambda {:.5}", rep.lambda_max);
    for z in [1e-8, 0.5, std::f64::consts::E, 100.0] {
        println!("slope at z = {z:e}: {:.6}", best_response_slope(z)?);
    }

    let mut worst = (0.0_f64, 0.0);
    for z in lambert_sample(10_000) {
        let w = lambert_w(z)?;
        let r = (w * w.exp() - z).abs() / z.abs().max(1.0);
        if r > worst.0 {
            worst = (r, z);
        }
    }
    println!("Lambert-W worst relative residual {:.3e} at z = {:e}", worst.0, worst.1);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("equilibrium checks example failed");
}
