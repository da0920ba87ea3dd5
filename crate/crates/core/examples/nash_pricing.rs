//! Lambert-W best-response pricing and the Nash price pair of two MMDs.

use relay_game::config::ScenarioConfig;
use relay_game::mmd_game::{base2_foc_residual, exp_foc_residual, nash_prices, nash_prices_from};

pub fn run_example() -> relay_game::Result<()> {
    let cfg = ScenarioConfig::default();
    let game = cfg.pricing_game()?;
    println!("omega = {:?}, Y = {:?}, n = {}", game.omega, game.y, game.n);

    println!("p_other   B1(p)    B2(p)");
    for k in 0..=8 {
        let p = 0.5 * k as f64;
        let b1 = game.best_response(0, p)?;
        let b2 = game.best_response(1, p)?;
        println!("{p:>6.2}  {:.5}  {:.5}   (W argument {:.4})", b1.price_star, b2.price_star, b1.w_argument);
    }

    let nash = nash_prices(&game)?;
    let p = nash.prices;
    println!("Nash prices ({:.5}, {:.5}) after {} sweeps", p[0], p[1], nash.iterations);
    let share = game.attachment(p);
    println!("attachment ({:.3}, {:.3}), utilities ({:.4}, {:.4})", share[0], share[1], game.utility(0, p), game.utility(1, p));
    println!(
        "first-order residuals: base e ({:.2e}, {:.2e}), base 2 ({:.4}, {:.4})",
        exp_foc_residual(p[0], p[1], game.ratio(0)),
        exp_foc_residual(p[1], p[0], game.ratio(1)),
        base2_foc_residual(p[0], p[1], game.ratio(0)),
        base2_foc_residual(p[1], p[0], game.ratio(1)),
    );

    let other = nash_prices_from(&game, [7.5, 0.2], 1e-12, 10_000)?;
    println!("from (7.5, 0.2): ({:.9}, {:.9})", other.prices[0], other.prices[1]);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("pricing example failed");
}
