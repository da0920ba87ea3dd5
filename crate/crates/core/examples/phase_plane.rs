//! Delayed replicator dynamics of two OMD groups choosing between two MMDs,
//! compared against the closed-form equilibrium and its Jacobian.

use relay_game::config::ScenarioConfig;
use relay_game::omd_game::{equilibrium_share_closed, evo_jacobian, evolve, EvolveOptions, PopulationState, UtilitySnapshot};

pub fn run_example() -> relay_game::Result<()> {
    let cfg = ScenarioConfig::default();
    let econ = cfg.economics()?;
    let cap = cfg.capacity_params();
    let sizes = cfg.group_sizes();
    let opts = EvolveOptions {
        record_every: Some(500),
        ..cfg.evolve_options()
    };

    let start = PopulationState::two_mmd(&[0.56, 0.21], sizes.clone())?;
    let ev = evolve(&start, &econ, &cap, &cfg.evo_params(), &opts)?;
    for (t, s) in &ev.trajectory {
        println!("t = {t:>7.2}  pi1_a = {:.4}  pi1_b = {:.4}", s.fraction(0, 0), s.fraction(1, 0));
    }
    println!("at rest: {} after {} steps", ev.converged, ev.steps);

    let end = &ev.state;
    let snap = UtilitySnapshot::evaluate(end, &econ, &cap);
    for (g, name) in cfg.group_names().iter().enumerate() {
        println!("group {name}: u = {:?}", snap.utilities[g]);
    }
    let y = cfg.shared_y()?;
    let n1 = equilibrium_share_closed(econ.prices[0], econ.prices[1], econ.omega[0], econ.omega[1], y[0], y[1], end.total() as f64);
    println!("attached to MMD 1: dynamics {:.4}, closed form {n1:.4}", end.attached(0));

    let jac = evo_jacobian(end, &econ, &cap, cfg.evolution.delta)?;
    println!("Jacobian {:?}", jac.matrix);
    println!("eigenvalues {:?} -> {:?}", jac.eigenvalues, jac.stability);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("phase plane example failed");
}
