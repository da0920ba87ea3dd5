//! Topology generation and TDMA service-delay experiments comparing IMES
//! relay selection with uniformly random selection.

mod delay;
mod sweep;
mod topology;

pub use delay::{
    assign_flows, flow_links, nearest_mmd_groups, simulate_delay, tdma_schedule, DelayStats, FlowResult, Policy,
    SimChannel, TrafficModel,
};
pub use sweep::{delay_sweep, parse_range, SeedRun, SweepBase, SweepCell, SweepParameter, SweepSpec};
pub use topology::{channel_from_distance, generate_topology, PathLoss, Point, Topology};
