//! TDMA service-delay simulation under IMES or random relay selection.
//!
//! Every source OMD hands its flow to one MMD in communication range. Each
//! MMD serves its flows round-robin, `slots_per_round` slots per flow per
//! round, delivering `omega * max(C_R, C_D)` bits per unit time where the
//! capacities are per unit bandwidth. A flow whose last slot is only partly
//! needed frees the rest of that slot for the next flow.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::topology::{PathLoss, Topology};
use crate::channel::{CapacityParams, ChannelGains};
use crate::imes::{run_imes, ImesConfig, ImesScenario, LinkFactors, OmdSpec, UtilityModel};
use crate::mmd_game::MmdParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficModel {
    /// Bits per flow.
    pub message_size: f64,
    pub slot_length: f64,
    pub slots_per_round: usize,
}

impl Default for TrafficModel {
    fn default() -> Self {
        Self {
            message_size: 100.0,
            slot_length: 1.0,
            slots_per_round: 1,
        }
    }
}

impl TrafficModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.message_size > 0.0) || !(self.slot_length > 0.0) || self.slots_per_round == 0 {
            return Err(Error::InvalidParameter(
                "message_size > 0, slot_length > 0 and slots_per_round >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Radio parameters and MMD offers of the delay experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimChannel {
    pub power: f64,
    pub noise_var: f64,
    pub path_loss: PathLoss,
    /// Bandwidth every MMD offers.
    pub bandwidth: f64,
    /// Price every MMD asks.
    pub price: f64,
    pub cap: CapacityParams,
}

impl Default for SimChannel {
    fn default() -> Self {
        Self {
            power: 2.0,
            noise_var: 1.0,
            path_loss: PathLoss::default(),
            bandwidth: 20.0,
            price: 0.0,
            cap: CapacityParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Policy {
    Imes,
    Rand,
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Imes => "imes",
            Policy::Rand => "rand",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    /// Completion times of flows that finish.
    pub completion_times: Vec<f64>,
    /// Flows that can never finish (no MMD in range or zero rate).
    pub infinite: usize,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
}

impl DelayStats {
    /// Statistics over finite entries; `None` entries count as infinite.
    /// With no finite entry the mean and percentiles are NaN.
    pub fn from_times(times: &[Option<f64>]) -> Self {
        let mut finite: Vec<f64> = times.iter().flatten().copied().collect();
        let infinite = times.len() - finite.len();
        finite.sort_by(f64::total_cmp);
        let (mean, p50, p95) = if finite.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let mean = finite.iter().sum::<f64>() / finite.len() as f64;
            (mean, nearest_rank(&finite, 0.50), nearest_rank(&finite, 0.95))
        };
        Self {
            completion_times: finite,
            infinite,
            mean,
            p50,
            p95,
        }
    }
}

fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Per-flow outcome of the TDMA schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowResult {
    pub completion: Option<f64>,
    pub delivered: f64,
}

/// Round-robin schedule of independent MMDs. `queues[i]` lists the
/// `(flow, rate)` pairs of MMD `i` in service order.
pub fn tdma_schedule(queues: &[Vec<(usize, f64)>], n_flows: usize, traffic: &TrafficModel) -> Vec<FlowResult> {
    let mut out = vec![
        FlowResult {
            completion: None,
            delivered: 0.0,
        };
        n_flows
    ];
    let size = traffic.message_size;
    let done_tol = 1e-9 * size;
    for queue in queues {
        let mut pending: Vec<(usize, f64)> = queue.iter().copied().filter(|&(_, r)| r > 0.0).collect();
        let mut t = 0.0;
        while !pending.is_empty() {
            let mut still = Vec::with_capacity(pending.len());
            for (f, rate) in pending {
                for _ in 0..traffic.slots_per_round {
                    let left = size - out[f].delivered;
                    let full = rate * traffic.slot_length;
                    if full >= left - done_tol {
                        t += left / rate;
                        out[f].delivered = size;
                        out[f].completion = Some(t);
                        break;
                    }
                    out[f].delivered += full;
                    t += traffic.slot_length;
                }
                if out[f].completion.is_none() {
                    still.push((f, rate));
                }
            }
            pending = still;
        }
    }
    out
}

/// Per-flow link factors towards every MMD, `None` when the source is out of range.
pub fn flow_links(topo: &Topology, channel: &SimChannel) -> Result<Vec<Vec<Option<LinkFactors>>>> {
    topo.sd_pairs
        .iter()
        .map(|&(s, d)| {
            let src = topo.omd_positions[s];
            let dst = topo.omd_positions[d];
            let h_sd = channel.path_loss.gain(src.distance(&dst));
            topo.mmd_positions
                .iter()
                .map(|r| {
                    if src.distance(r) > topo.comm_range {
                        return Ok(None);
                    }
                    let g = ChannelGains::with_common_power(
                        channel.path_loss.gain(src.distance(r)),
                        h_sd,
                        channel.path_loss.gain(r.distance(&dst)),
                        channel.power,
                        channel.noise_var,
                    )?;
                    Ok(Some(LinkFactors::from_gains(&g)))
                })
                .collect()
        })
        .collect()
}

/// Index of the MMD nearest to each flow's source; flows are grouped by it.
pub fn nearest_mmd_groups(topo: &Topology) -> Vec<usize> {
    topo.sd_pairs
        .iter()
        .map(|&(s, _)| {
            let src = topo.omd_positions[s];
            topo.mmd_positions
                .iter()
                .enumerate()
                .min_by(|a, b| src.distance(a.1).total_cmp(&src.distance(b.1)))
                .map(|(i, _)| i)
                .unwrap_or(0)
        })
        .collect()
}

/// Relay assignment of every flow under `policy`.
pub fn assign_flows(
    topo: &Topology,
    links: &[Vec<Option<LinkFactors>>],
    policy: Policy,
    channel: &SimChannel,
    imes: &ImesConfig,
    seed: u64,
) -> Result<Vec<Option<usize>>> {
    match policy {
        Policy::Rand => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(links
                .iter()
                .map(|row| {
                    let reach: Vec<usize> = (0..row.len()).filter(|&i| row[i].is_some()).collect();
                    (!reach.is_empty()).then(|| reach[rng.gen_range(0..reach.len())])
                })
                .collect())
        }
        Policy::Imes => {
            let m = topo.mmd_positions.len();
            let groups = nearest_mmd_groups(topo);
            let offer = MmdParams {
                omega: channel.bandwidth,
                cost: 0.0,
                price: channel.price,
                omega_cap: channel.bandwidth.max(crate::mmd_game::DEFAULT_OMEGA_CAP),
            };
            let scenario = ImesScenario {
                group_names: (0..m).map(|i| format!("g{i}")).collect(),
                omds: links
                    .iter()
                    .zip(&groups)
                    .map(|(row, &g)| OmdSpec {
                        group: g,
                        links: row.clone(),
                    })
                    .collect(),
                mmds: vec![offer; m],
                cap: channel.cap,
                model: UtilityModel::Shannon,
            };
            let config = ImesConfig {
                seed,
                mu_omega: 0.0,
                mu_price: 0.0,
                ..*imes
            };
            Ok(run_imes(&config, &scenario)?.final_attachment)
        }
    }
}

/// Completion-time statistics of every flow of `topo` under `policy`.
pub fn simulate_delay(
    topo: &Topology,
    policy: Policy,
    traffic: &TrafficModel,
    channel: &SimChannel,
    imes: &ImesConfig,
    seed: u64,
) -> Result<DelayStats> {
    topo.validate()?;
    traffic.validate()?;
    let links = flow_links(topo, channel)?;
    let assignment = assign_flows(topo, &links, policy, channel, imes, seed)?;
    let mut queues = vec![Vec::new(); topo.mmd_positions.len()];
    for (f, (a, row)) in assignment.iter().zip(&links).enumerate() {
        if let (Some(i), Some(link)) = (a, a.and_then(|i| row[i])) {
            queues[*i].push((f, channel.bandwidth * link.shannon_efficiency()));
        }
    }
    let results = tdma_schedule(&queues, links.len(), traffic);
    let times: Vec<Option<f64>> = results.iter().map(|r| r.completion).collect();
    Ok(DelayStats::from_times(&times))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::topology::Point;

    #[test]
    fn one_slot_message_takes_one_slot() {
        let traffic = TrafficModel::default();
        let res = tdma_schedule(&[vec![(0, 100.0)]], 1, &traffic);
        assert_eq!(res[0].completion, Some(1.0));
        assert_eq!(res[0].delivered, 100.0);
    }

    #[test]
    fn round_robin_interleaves_flows() {
        let traffic = TrafficModel::default();
        // each flow needs two slots; service order 0,1,0,1
        let res = tdma_schedule(&[vec![(0, 50.0), (1, 50.0)]], 2, &traffic);
        assert_eq!(res[0].completion, Some(3.0));
        assert_eq!(res[1].completion, Some(4.0));
    }

    #[test]
    fn zero_rate_is_infinite() {
        let traffic = TrafficModel::default();
        let res = tdma_schedule(&[vec![(0, 0.0), (1, 100.0)]], 2, &traffic);
        assert_eq!(res[0].completion, None);
        assert_eq!(res[1].completion, Some(1.0));
        let stats = DelayStats::from_times(&[None, Some(1.0)]);
        assert_eq!(stats.infinite, 1);
        assert_eq!(stats.mean, 1.0);
    }

    #[test]
    fn single_flow_topology() {
        let topo = Topology::new(
            100.0,
            vec![Point { x: 10.0, y: 10.0 }, Point { x: 20.0, y: 10.0 }],
            vec![Point { x: 15.0, y: 12.0 }],
            vec![(0, 1)],
            50.0,
        )
        .unwrap();
        let channel = SimChannel::default();
        let links = flow_links(&topo, &channel).unwrap();
        let rate = channel.bandwidth * links[0][0].unwrap().shannon_efficiency();
        let traffic = TrafficModel {
            message_size: rate,
            ..TrafficModel::default()
        };
        for policy in [Policy::Imes, Policy::Rand] {
            let s = simulate_delay(&topo, policy, &traffic, &channel, &ImesConfig::default(), 3).unwrap();
            assert!((s.mean - 1.0).abs() < 1e-12);
        }
    }
}
