//! Link budget of the default scenario: SNRs, capacities, the relay
//! selection condition and the effective SNR factor `Y` of both link sets.

use relay_game::channel::{
    capacity_direct, capacity_relay, modified_log_capacity, relay_beneficial, snr_direct, snr_relayed, ChannelGains,
};

pub fn run_example() -> relay_game::Result<()> {
    let sets = [
        ("pair 1", ChannelGains::with_common_power(0.3, 0.25, 0.4, 2.0, 1.0)?),
        ("pair 2", ChannelGains::with_common_power(0.25, 0.21, 0.35, 2.0, 1.0)?),
    ];
    for (name, g) in &sets {
        let (sd, sr) = (snr_direct(g), snr_relayed(g));
        let c_d = capacity_direct(1.0, sd);
        let c_r = capacity_relay(1.0, sd, sr);
        println!("{name}: snr_d = {sd:.6}, snr_r = {sr:.6}");
        println!("  per-hertz capacity: direct {c_d:.6}, relayed {c_r:.6}, relaying pays: {}", relay_beneficial(c_r, c_d));
        println!("  tau = {:.6}, b = {:.6}, Y = {:.6}", g.tau(), g.b(), g.y_factor());
        for n in [5, 10, 20] {
            let c = modified_log_capacity(1.0, 20.0, n, g.y_factor())?;
            println!("  modified log-capacity, omega = 20 shared by {n:>2}: {c:.6}");
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("channel example failed");
}
