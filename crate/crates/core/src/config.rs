//! TOML scenario files.
//!
//! Every key is optional; absent keys take the default scenario (two groups
//! `a` and `b` of 10 and 30 OMDs, two MMDs `r1` and `r2`). Unknown keys are
//! rejected. Groups and MMDs are ordered by name, and the link gains of the
//! `i`-th group define the link set of the `i`-th MMD:
//!
//! ```toml
//! seed = 0
//!
//! [channel]
//! noise_var = 1.0
//! power = 2.0
//! k_omega = 1.0
//! alpha = 1.0
//! t_access = 1.0
//!
//! [group.a]
//! size = 10
//! h_sr = 0.3
//! h_sd = 0.25
//! h_rd = 0.4
//! # y = [1.2, 1.1]   # optional per-MMD Y row overriding the gains
//!
//! [mmd.r1]
//! omega = 20.0
//! price = 1.0
//! cost = 0.5
//! omega_cap = 50.0
//!
//! [evolution]   # delta, tau, dt, max_steps, tol
//! [imes]        # waiting_rounds, mu_omega, mu_price, delta_t, stability_tol, max_rounds, utility_tol
//! [sim]         # area, n_omd, n_mmd, comm_range, exponent, ref_distance, ref_gain,
//!               # bandwidth, price, message_size, slot_length, slots_per_round, seeds
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{CapacityParams, ChannelGains};
use crate::imes::{ImesConfig, ImesScenario, LinkFactors};
use crate::mmd_game::{BandwidthGame, MmdParams, PricingGame};
use crate::omd_game::{EvoParams, EvolveOptions, GroupEconomics, PopulationState};
use crate::sim::{PathLoss, SimChannel, SweepBase, TrafficModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub noise_var: f64,
    pub power: f64,
    pub k_omega: f64,
    pub alpha: f64,
    pub t_access: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            noise_var: 1.0,
            power: 2.0,
            k_omega: 1.0,
            alpha: 1.0,
            t_access: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupConfig {
    pub size: usize,
    pub h_sr: f64,
    pub h_sd: f64,
    pub h_rd: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
}

impl Default for GroupConfig {
    fn default() -> Self {
        Self {
            size: 10,
            h_sr: 0.3,
            h_sd: 0.25,
            h_rd: 0.4,
            y: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmdConfig {
    pub omega: f64,
    pub price: f64,
    pub cost: f64,
    pub omega_cap: f64,
}

impl Default for MmdConfig {
    fn default() -> Self {
        Self {
            omega: 20.0,
            price: 1.0,
            cost: 0.5,
            omega_cap: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub delta: f64,
    pub tau: f64,
    pub dt: f64,
    pub max_steps: usize,
    pub tol: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            tau: 1.0,
            dt: 0.01,
            max_steps: 1_000_000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImesSection {
    pub waiting_rounds: usize,
    pub mu_omega: f64,
    pub mu_price: f64,
    pub delta_t: f64,
    pub stability_tol: f64,
    pub max_rounds: usize,
    pub utility_tol: f64,
}

impl Default for ImesSection {
    fn default() -> Self {
        let d = ImesConfig::default();
        Self {
            waiting_rounds: d.waiting_rounds,
            mu_omega: d.mu_omega,
            mu_price: d.mu_price,
            delta_t: d.delta_t,
            stability_tol: d.stability_tol,
            max_rounds: d.max_rounds,
            utility_tol: d.utility_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub area: f64,
    pub n_omd: usize,
    pub n_mmd: usize,
    pub comm_range: f64,
    pub exponent: f64,
    /// Distance at which a link has amplitude gain `ref_gain`.
    pub ref_distance: f64,
    pub ref_gain: f64,
    pub bandwidth: f64,
    pub price: f64,
    pub message_size: f64,
    pub slot_length: f64,
    pub slots_per_round: usize,
    /// Topologies per sweep cell.
    pub seeds: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            area: 100.0,
            n_omd: 40,
            n_mmd: 3,
            comm_range: 50.0,
            exponent: 3.0,
            ref_distance: 30.0,
            ref_gain: 0.3,
            bandwidth: 20.0,
            price: 0.0,
            message_size: 100.0,
            slot_length: 1.0,
            slots_per_round: 1,
            seeds: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub channel: ChannelConfig,
    pub group: BTreeMap<String, GroupConfig>,
    pub mmd: BTreeMap<String, MmdConfig>,
    pub evolution: EvolutionConfig,
    pub imes: ImesSection,
    pub sim: SimSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let group = BTreeMap::from([
            ("a".to_string(), GroupConfig::default()),
            (
                "b".to_string(),
                GroupConfig {
                    size: 30,
                    h_sr: 0.25,
                    h_sd: 0.21,
                    h_rd: 0.35,
                    y: None,
                },
            ),
        ]);
        let mmd = BTreeMap::from([
            ("r1".to_string(), MmdConfig::default()),
            (
                "r2".to_string(),
                MmdConfig {
                    omega: 40.0,
                    price: 2.0,
                    ..MmdConfig::default()
                },
            ),
        ]);
        Self {
            seed: 0,
            channel: ChannelConfig::default(),
            group,
            mmd,
            evolution: EvolutionConfig::default(),
            imes: ImesSection::default(),
            sim: SimSection::default(),
        }
    }
}

fn invariant(ok: bool, what: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::ConfigValidation(what.into()))
    }
}

impl ScenarioConfig {
    /// Checks every invariant and names the first one violated.
    pub fn validate(&self) -> Result<()> {
        let c = &self.channel;
        invariant(c.noise_var > 0.0, "channel.noise_var > 0")?;
        invariant(c.power > 0.0, "channel.power > 0")?;
        invariant(c.k_omega > 0.0, "channel.k_omega > 0")?;
        invariant(c.alpha > 0.0, "channel.alpha > 0")?;
        invariant(c.t_access > 0.0 && c.t_access <= 1.0, "channel.t_access in (0, 1]")?;

        invariant(!self.group.is_empty(), "at least one group")?;
        invariant(!self.mmd.is_empty(), "at least one mmd")?;
        let m = self.mmd.len();
        for (name, g) in &self.group {
            invariant(g.size >= 1, format!("group.{name}.size >= 1"))?;
            for (k, h) in [("h_sr", g.h_sr), ("h_sd", g.h_sd), ("h_rd", g.h_rd)] {
                invariant(h >= 0.0 && h.is_finite(), format!("group.{name}.{k} >= 0"))?;
            }
            if let Some(y) = &g.y {
                invariant(y.len() == m, format!("group.{name}.y has one entry per mmd ({m})"))?;
                invariant(y.iter().all(|&v| v >= 1.0), format!("group.{name}.y >= 1"))?;
            }
        }
        for (name, r) in &self.mmd {
            invariant(r.omega_cap > 0.0, format!("mmd.{name}.omega_cap > 0"))?;
            invariant(
                r.omega >= 0.0 && r.omega <= r.omega_cap,
                format!("0 <= mmd.{name}.omega <= omega_cap"),
            )?;
            invariant(r.price >= 0.0, format!("mmd.{name}.price >= 0"))?;
            invariant(r.cost >= 0.0, format!("mmd.{name}.cost >= 0"))?;
        }
        // the default Y table needs a link set for every MMD
        let rows_given = self.group.values().all(|g| g.y.is_some());
        invariant(
            rows_given || self.group.len() >= m,
            "one group per mmd to define link sets, or y rows for every group",
        )?;

        let e = &self.evolution;
        invariant(e.delta > 0.0, "delta > 0")?;
        invariant(e.tau >= 0.0, "tau >= 0")?;
        invariant(e.dt > 0.0, "dt > 0")?;
        invariant(e.max_steps >= 1, "evolution.max_steps >= 1")?;
        invariant(e.tol > 0.0, "evolution.tol > 0")?;

        let i = &self.imes;
        invariant(i.waiting_rounds >= 1, "imes.waiting_rounds >= 1")?;
        invariant(i.mu_omega >= 0.0, "imes.mu_omega >= 0")?;
        invariant(i.mu_price >= 0.0, "imes.mu_price >= 0")?;
        invariant(i.delta_t > 0.0, "imes.delta_t > 0")?;
        invariant(i.stability_tol > 0.0, "imes.stability_tol > 0")?;
        invariant(i.max_rounds >= 1, "imes.max_rounds >= 1")?;
        invariant(i.utility_tol > 0.0, "imes.utility_tol > 0")?;

        let s = &self.sim;
        invariant(s.area > 0.0, "sim.area > 0")?;
        invariant(s.n_omd >= 1, "sim.n_omd >= 1")?;
        invariant(s.n_mmd >= 1, "sim.n_mmd >= 1")?;
        invariant(s.comm_range > 0.0, "sim.comm_range > 0")?;
        invariant(s.exponent > 0.0, "sim.exponent > 0")?;
        invariant(s.ref_distance > 0.0, "sim.ref_distance > 0")?;
        invariant(s.ref_gain > 0.0, "sim.ref_gain > 0")?;
        invariant(s.bandwidth >= 0.0, "sim.bandwidth >= 0")?;
        invariant(s.price >= 0.0, "sim.price >= 0")?;
        invariant(s.message_size > 0.0, "sim.message_size > 0")?;
        invariant(s.slot_length > 0.0, "sim.slot_length > 0")?;
        invariant(s.slots_per_round >= 1, "sim.slots_per_round >= 1")?;
        invariant(s.seeds >= 1, "sim.seeds >= 1")?;
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config is always serializable")
    }

    pub fn capacity_params(&self) -> CapacityParams {
        CapacityParams {
            k_omega: self.channel.k_omega,
            alpha: self.channel.alpha,
            t_access: self.channel.t_access,
        }
    }

    pub fn group_names(&self) -> Vec<String> {
        self.group.keys().cloned().collect()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.group.values().map(|g| g.size).collect()
    }

    pub fn mmd_names(&self) -> Vec<String> {
        self.mmd.keys().cloned().collect()
    }

    /// Gains of the `g`-th group (by name order).
    pub fn gains(&self, g: usize) -> Result<ChannelGains> {
        let grp = self
            .group
            .values()
            .nth(g)
            .ok_or_else(|| Error::Shape(format!("no group {g}")))?;
        ChannelGains::with_common_power(grp.h_sr, grp.h_sd, grp.h_rd, self.channel.power, self.channel.noise_var)
    }

    /// Link factors `[group][mmd]`. MMD `i` relays over the link set of group
    /// `i`; a group's `y` row replaces its factors with `tau = y`, `b = 1`.
    pub fn link_table(&self) -> Result<Vec<Vec<LinkFactors>>> {
        let m = self.mmd.len();
        let sets: Vec<Option<LinkFactors>> = (0..m)
            .map(|i| {
                if i < self.group.len() {
                    self.gains(i).map(|g| Some(LinkFactors::from_gains(&g)))
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<_>>()?;
        self.group
            .values()
            .map(|grp| match &grp.y {
                Some(row) => Ok(row.iter().map(|&y| LinkFactors { tau: y, b: 1.0 }).collect()),
                None => sets
                    .iter()
                    .map(|s| s.ok_or_else(|| Error::Shape("no link set for an mmd".into())))
                    .collect(),
            })
            .collect()
    }

    /// `Y = max(tau, b)` per group and MMD.
    pub fn y_table(&self) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .link_table()?
            .iter()
            .map(|row| row.iter().map(LinkFactors::y).collect())
            .collect())
    }

    pub fn mmd_params(&self) -> Vec<MmdParams> {
        self.mmd
            .values()
            .map(|r| MmdParams {
                omega: r.omega,
                cost: r.cost,
                price: r.price,
                omega_cap: r.omega_cap,
            })
            .collect()
    }

    pub fn economics(&self) -> Result<GroupEconomics> {
        let mmds = self.mmd_params();
        Ok(GroupEconomics {
            y_values: self.y_table()?,
            omega: mmds.iter().map(|r| r.omega).collect(),
            prices: mmds.iter().map(|r| r.price).collect(),
        })
    }

    pub fn evo_params(&self) -> EvoParams {
        EvoParams {
            delta: self.evolution.delta,
            tau: self.evolution.tau,
            dt: self.evolution.dt,
        }
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        EvolveOptions {
            max_steps: self.evolution.max_steps,
            rate_tol: self.evolution.tol,
            record_every: None,
        }
    }

    pub fn uniform_state(&self) -> Result<PopulationState> {
        PopulationState::uniform(self.group_sizes(), self.mmd.len())
    }

    pub fn imes_config(&self) -> ImesConfig {
        ImesConfig {
            waiting_rounds: self.imes.waiting_rounds,
            stability_tol: self.imes.stability_tol,
            max_rounds: self.imes.max_rounds,
            seed: self.seed,
            mu_omega: self.imes.mu_omega,
            mu_price: self.imes.mu_price,
            delta_t: self.imes.delta_t,
            utility_tol: self.imes.utility_tol,
        }
    }

    pub fn imes_scenario(&self) -> Result<ImesScenario> {
        ImesScenario::from_groups(
            self.group_names(),
            &self.group_sizes(),
            self.link_table()?,
            self.mmd_params(),
            self.capacity_params(),
        )
    }

    /// Per-MMD Y factor shared by all groups, as the two-MMD closed forms require.
    pub fn shared_y(&self) -> Result<Vec<f64>> {
        let table = self.y_table()?;
        let first = table[0].clone();
        if table.iter().any(|row| row != &first) {
            return Err(Error::Shape("closed forms need the same Y row for every group".into()));
        }
        Ok(first)
    }

    fn require_two_mmds(&self) -> Result<()> {
        if self.mmd.len() != 2 {
            return Err(Error::Shape(format!("the two-MMD game needs 2 mmds, found {}", self.mmd.len())));
        }
        Ok(())
    }

    pub fn pricing_game(&self) -> Result<PricingGame> {
        self.require_two_mmds()?;
        let y = self.shared_y()?;
        let mmds = self.mmd_params();
        Ok(PricingGame {
            omega: [mmds[0].omega, mmds[1].omega],
            y: [y[0], y[1]],
            cost: [mmds[0].cost, mmds[1].cost],
            n: self.group_sizes().iter().sum::<usize>() as f64,
        })
    }

    pub fn bandwidth_game(&self, prices: [f64; 2]) -> Result<BandwidthGame> {
        self.require_two_mmds()?;
        let y = self.shared_y()?;
        let mmds = self.mmd_params();
        Ok(BandwidthGame {
            prices,
            y: [y[0], y[1]],
            cost: [mmds[0].cost, mmds[1].cost],
            n: self.group_sizes().iter().sum::<usize>() as f64,
            omega_cap: mmds[0].omega_cap.min(mmds[1].omega_cap),
        })
    }

    pub fn sweep_base(&self) -> SweepBase {
        let s = &self.sim;
        SweepBase {
            area: s.area,
            n_omd: s.n_omd,
            n_mmd: s.n_mmd,
            comm_range: s.comm_range,
            traffic: TrafficModel {
                message_size: s.message_size,
                slot_length: s.slot_length,
                slots_per_round: s.slots_per_round,
            },
            channel: SimChannel {
                power: self.channel.power,
                noise_var: self.channel.noise_var,
                path_loss: PathLoss::calibrated(s.exponent, s.ref_distance, s.ref_gain),
                bandwidth: s.bandwidth,
                price: s.price,
                cap: self.capacity_params(),
            },
            imes: self.imes_config(),
        }
    }
}

/// Parses scenario text, filling defaults and validating invariants.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| line_column(text, s.start))
            .unwrap_or((0, 0));
        Error::ConfigParse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}
