//! Small service-delay comparison of IMES relay selection against random
//! selection, plus a single simulated topology.

use relay_game::imes::ImesConfig;
use relay_game::sim::{delay_sweep, generate_topology, simulate_delay, Policy, SimChannel, SweepBase, SweepParameter, SweepSpec, TrafficModel};

pub fn run_example() -> relay_game::Result<()> {
    let topo = generate_topology(100.0, 40, 3, 50.0, 1)?;
    println!("topology: {} flows, {:.0}% of OMDs paired", topo.sd_pairs.len(), 100.0 * topo.paired_fraction());
    let (traffic, channel, imes) = (TrafficModel::default(), SimChannel::default(), ImesConfig::default());
    for policy in [Policy::Imes, Policy::Rand] {
        let s = simulate_delay(&topo, policy, &traffic, &channel, &imes, 1)?;
        println!("  {:>4}: mean {:.3}, p50 {:.3}, p95 {:.3}, unreachable {}", policy.name(), s.mean, s.p50, s.p95, s.infinite);
    }

    let spec = SweepSpec {
        parameter: SweepParameter::Omds,
        values: vec![40.0, 80.0, 120.0],
        policies: vec![Policy::Imes, Policy::Rand],
        base_seed: 0,
        seed_count: 4,
    };
    let cells = delay_sweep(&SweepBase::default(), &spec, 2)?;
    for pair in cells.chunks(2) {
        println!(
            "omds {:>3}: imes {:.3} +- {:.3}, rand {:.3} +- {:.3}, ratio {:.3}",
            pair[0].param_value,
            pair[0].mean_delay,
            pair[0].std_delay,
            pair[1].mean_delay,
            pair[1].std_delay,
            pair[0].mean_delay / pair[1].mean_delay
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("delay example failed");
}
