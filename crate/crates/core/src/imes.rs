//! Distributed incentive mechanism: OMD imitation rounds nested inside MMD
//! strategy updates.
//!
//! Every OMD compares its utility with its group's average and, when behind,
//! leaves its relay with probability `psi = (mean - own) / |mean|` to imitate
//! the choice of a better-off group member. Between batches of OMD rounds
//! every MMD moves its bandwidth and price along a utility slope, clamped to
//! `[0, omega_cap]` and `[0, inf)`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{CapacityParams, ChannelGains};
use crate::mmd_game::{mmd_utility, MmdParams};
use crate::omd_game::omd_utility;
use crate::{Error, Result};

/// SNR factors of one source-destination pair relayed through one MMD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkFactors {
    /// `1 + SNR_sd + SNR_srd`.
    pub tau: f64,
    /// `1 + SNR_sd`.
    pub b: f64,
}

impl LinkFactors {
    pub fn from_gains(g: &ChannelGains) -> Self {
        Self { tau: g.tau(), b: g.b() }
    }

    pub fn y(&self) -> f64 {
        self.tau.max(self.b)
    }

    /// Spectral efficiency of the better of half-rate relaying and the direct link.
    pub fn shannon_efficiency(&self) -> f64 {
        (0.5 * self.tau.log2()).max(self.b.log2())
    }
}

/// How an OMD values a relay offer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UtilityModel {
    /// `[alpha t log2(k omega Y / n) - p] x` with the relay-benefit indicator `x`.
    ModifiedLog,
    /// `alpha t max(C_R, C_D) omega / n - p`: the MMD schedules the flow either way.
    Shannon,
}

#[derive(Debug, Clone)]
pub struct OmdAgent {
    pub group: usize,
    pub current_mmd: Option<usize>,
    pub last_utility: f64,
    /// `links[i]` is `None` when MMD `i` is out of reach.
    pub links: Vec<Option<LinkFactors>>,
    rng: ChaCha8Rng,
}

impl OmdAgent {
    pub fn new(group: usize, links: Vec<Option<LinkFactors>>, seed: u64) -> Self {
        Self {
            group,
            current_mmd: None,
            last_utility: 0.0,
            links,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn reachable(&self) -> impl Iterator<Item = usize> + '_ {
        self.links
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|_| i))
    }

    /// Utility at MMD `mmd` when `attached` OMDs (this one included) share it.
    pub fn utility_at(
        &self,
        mmd: usize,
        offer: &MmdAgent,
        attached: usize,
        model: UtilityModel,
        cap: &CapacityParams,
    ) -> f64 {
        let Some(link) = self.links[mmd] else {
            return 0.0;
        };
        let n = attached.max(1) as f64;
        match model {
            UtilityModel::ModifiedLog => {
                let share = cap.k_omega * offer.omega / n;
                let c_r = (share * link.tau).log2();
                let c_d = (share * link.b).log2();
                omd_utility(c_r, c_d, offer.price, cap)
            }
            UtilityModel::Shannon => {
                cap.alpha * cap.t_access * link.shannon_efficiency() * offer.omega / n - offer.price
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdAgent {
    pub omega: f64,
    pub price: f64,
    pub cost: f64,
    pub omega_cap: f64,
    pub mu_omega: f64,
    pub mu_p: f64,
    pub delta_t: f64,
    /// `[U(t - delta_t), U(t)]`, newest last.
    pub utility_history: [Option<f64>; 2],
}

impl MmdAgent {
    pub fn new(params: &MmdParams, mu_omega: f64, mu_p: f64, delta_t: f64) -> Self {
        Self {
            omega: params.omega,
            price: params.price,
            cost: params.cost,
            omega_cap: params.omega_cap,
            mu_omega,
            mu_p,
            delta_t,
            utility_history: [None, None],
        }
    }

    pub fn record_utility(&mut self, u: f64) {
        self.utility_history = [self.utility_history[1], Some(u)];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImesConfig {
    /// Cap on OMD imitation rounds between two MMD updates.
    pub waiting_rounds: usize,
    /// Outer loop stops once every bandwidth and price moves less than this.
    pub stability_tol: f64,
    pub max_rounds: usize,
    pub seed: u64,
    pub mu_omega: f64,
    pub mu_price: f64,
    pub delta_t: f64,
    /// Group members within this utility spread count as settled.
    pub utility_tol: f64,
}

impl Default for ImesConfig {
    fn default() -> Self {
        Self {
            waiting_rounds: 100,
            stability_tol: 1e-4,
            max_rounds: 2000,
            seed: 0,
            mu_omega: 1.0,
            mu_price: 0.5,
            delta_t: 1.0,
            utility_tol: 1e-6,
        }
    }
}

impl ImesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.waiting_rounds == 0 {
            return Err(Error::InvalidParameter("waiting_rounds > 0".into()));
        }
        if !(self.stability_tol > 0.0) || !(self.utility_tol > 0.0) {
            return Err(Error::InvalidParameter("stability_tol > 0 and utility_tol > 0".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidParameter("max_rounds > 0".into()));
        }
        if !(self.mu_omega >= 0.0) || !(self.mu_price >= 0.0) {
            return Err(Error::InvalidParameter("mu_omega >= 0 and mu_price >= 0".into()));
        }
        if !(self.delta_t > 0.0) {
            return Err(Error::InvalidParameter("delta_t > 0".into()));
        }
        Ok(())
    }
}

/// Weighted mean utility of a group: `sum_i u_i n_i / sum_i n_i`.
pub fn group_average_utility(utilities: &[f64], counts: &[usize]) -> Result<f64> {
    if utilities.len() != counts.len() {
        return Err(Error::Shape("utilities and counts differ in length".into()));
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyGroup);
    }
    let sum: f64 = utilities
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&u, &c)| u * c as f64)
        .sum();
    Ok(sum / total as f64)
}

/// Probability that a member earning `own` leaves its relay, given the group
/// average `avg`. Scaled by `|avg|` so that it stays meaningful when prices
/// push utilities below zero; a zero average gives no signal.
pub fn switch_probability(avg: f64, own: f64) -> f64 {
    if avg == 0.0 || !avg.is_finite() || !own.is_finite() {
        return 0.0;
    }
    ((avg - own) / avg.abs()).clamp(0.0, 1.0)
}

/// Attachment count per MMD.
pub fn attachment_counts(agents: &[OmdAgent], n_mmds: usize) -> Vec<usize> {
    let mut counts = vec![0; n_mmds];
    for a in agents {
        if let Some(i) = a.current_mmd {
            counts[i] += 1;
        }
    }
    counts
}

/// Attachment count per MMD and group, `[mmd][group]`.
pub fn group_counts(agents: &[OmdAgent], n_mmds: usize, n_groups: usize) -> Vec<Vec<usize>> {
    let mut counts = vec![vec![0; n_groups]; n_mmds];
    for a in agents {
        if let Some(i) = a.current_mmd {
            counts[i][a.group] += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DaoOutcome {
    pub switches: usize,
    /// Every group's attached members earn the same utility within tolerance.
    pub stable: bool,
}

/// One synchronous imitation round. All decisions read the attachment of the
/// previous round; switches are applied together at the end.
pub fn dao_round(
    agents: &mut [OmdAgent],
    mmds: &[MmdAgent],
    model: UtilityModel,
    cap: &CapacityParams,
    utility_tol: f64,
) -> DaoOutcome {
    let counts = attachment_counts(agents, mmds.len());
    let utilities: Vec<Option<f64>> = agents
        .iter()
        .map(|a| {
            a.current_mmd
                .map(|i| a.utility_at(i, &mmds[i], counts[i], model, cap))
        })
        .collect();

    let n_groups = agents.iter().map(|a| a.group + 1).max().unwrap_or(0);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_groups];
    for (k, a) in agents.iter().enumerate() {
        if utilities[k].is_some() {
            members[a.group].push(k);
        }
    }
    let mut means = vec![0.0; n_groups];
    let mut stable = true;
    for (g, ids) in members.iter().enumerate() {
        if ids.is_empty() {
            continue;
        }
        let us: Vec<f64> = ids.iter().map(|&k| utilities[k].unwrap_or(0.0)).collect();
        means[g] = group_average_utility(&us, &vec![1; us.len()]).unwrap_or(0.0);
        let (lo, hi) = us
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &u| (lo.min(u), hi.max(u)));
        stable &= hi - lo <= utility_tol;
    }

    for (k, u) in utilities.iter().enumerate() {
        if let Some(u) = *u {
            agents[k].last_utility = u;
        }
    }
    if stable {
        return DaoOutcome { switches: 0, stable };
    }

    let mut moves = Vec::new();
    for k in 0..agents.len() {
        let (Some(own), Some(cur)) = (utilities[k], agents[k].current_mmd) else {
            continue;
        };
        let g = agents[k].group;
        if own >= means[g] {
            continue;
        }
        let psi = switch_probability(means[g], own);
        let draw: f64 = agents[k].rng.gen();
        if draw >= psi {
            continue;
        }
        let targets: Vec<usize> = members[g]
            .iter()
            .filter(|&&j| utilities[j].is_some_and(|uj| uj > own))
            .filter_map(|&j| agents[j].current_mmd)
            .filter(|&i| i != cur && agents[k].links[i].is_some())
            .collect();
        if targets.is_empty() {
            continue;
        }
        let pick = targets[agents[k].rng.gen_range(0..targets.len())];
        moves.push((k, pick));
    }
    for &(k, i) in &moves {
        agents[k].current_mmd = Some(i);
    }
    DaoOutcome {
        switches: moves.len(),
        stable,
    }
}

/// MMD update from the change of its own utility over one interval:
/// `omega += mu_omega (U(t) - U(t - dt)) / dt`, `p += mu_p (U(t) - U(t - dt)) / dt`.
pub fn dam_update(agent: &MmdAgent, current: f64, previous: f64) -> MmdAgent {
    let slope = (current - previous) / agent.delta_t;
    dam_step(agent, slope, slope)
}

/// Clamped ascent step along separate bandwidth and price slopes.
pub fn dam_step(agent: &MmdAgent, slope_omega: f64, slope_price: f64) -> MmdAgent {
    let mut next = agent.clone();
    next.omega = (agent.omega + agent.mu_omega * slope_omega).clamp(0.0, agent.omega_cap);
    next.price = (agent.price + agent.mu_p * slope_price).max(0.0);
    next
}

/// Utility slopes an MMD reads off the followers' aggregate response.
///
/// Followers are modelled as choosing MMD `i` with weight
/// `omega_i Y_i e^(-p_i)` among their reachable MMDs. The price slope is the
/// per-OMD revenue derivative; the bandwidth slope is the total utility
/// derivative.
pub fn response_slopes(agents: &[OmdAgent], mmds: &[MmdAgent]) -> Vec<(f64, f64)> {
    let m = mmds.len();
    let mut expected = vec![0.0; m];
    let mut curvature = vec![0.0; m];
    let mut population = 0usize;
    let mut weights = vec![0.0; m];
    for a in agents {
        let mut total = 0.0;
        for (i, w) in weights.iter_mut().enumerate() {
            *w = match a.links[i] {
                Some(l) => mmds[i].omega.max(1e-9) * l.y() * (-mmds[i].price).exp(),
                None => 0.0,
            };
            total += *w;
        }
        if total <= 0.0 {
            continue;
        }
        population += 1;
        for i in 0..m {
            let s = weights[i] / total;
            expected[i] += s;
            curvature[i] += s * (1.0 - s);
        }
    }
    let n = population.max(1) as f64;
    mmds.iter()
        .enumerate()
        .map(|(i, mmd)| {
            let d_omega = mmd.price * curvature[i] / mmd.omega.max(1e-9) - mmd.cost;
            let d_price = (expected[i] - mmd.price * curvature[i]) / n;
            (d_omega, d_price)
        })
        .collect()
}

/// One OMD of an IMES scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmdSpec {
    pub group: usize,
    pub links: Vec<Option<LinkFactors>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImesScenario {
    pub group_names: Vec<String>,
    pub omds: Vec<OmdSpec>,
    pub mmds: Vec<MmdParams>,
    pub cap: CapacityParams,
    pub model: UtilityModel,
}

impl ImesScenario {
    /// Homogeneous groups: every member of group `g` sees `links[g][i]` at MMD `i`.
    pub fn from_groups(
        group_names: Vec<String>,
        sizes: &[usize],
        links: Vec<Vec<LinkFactors>>,
        mmds: Vec<MmdParams>,
        cap: CapacityParams,
    ) -> Result<Self> {
        if sizes.len() != group_names.len() || links.len() != sizes.len() {
            return Err(Error::Shape("group names, sizes and links must align".into()));
        }
        let mut omds = Vec::new();
        for (g, (&size, row)) in sizes.iter().zip(&links).enumerate() {
            if row.len() != mmds.len() {
                return Err(Error::Shape(format!("group {g} has {} links for {} MMDs", row.len(), mmds.len())));
            }
            let spec = OmdSpec {
                group: g,
                links: row.iter().copied().map(Some).collect(),
            };
            omds.extend(std::iter::repeat_n(spec, size));
        }
        let s = Self {
            group_names,
            omds,
            mmds,
            cap,
            model: UtilityModel::ModifiedLog,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mmds.is_empty() {
            return Err(Error::InvalidParameter("at least one MMD".into()));
        }
        for m in &self.mmds {
            m.validate()?;
        }
        self.cap.validate()?;
        for (k, o) in self.omds.iter().enumerate() {
            if o.group >= self.group_names.len() {
                return Err(Error::Shape(format!("OMD {k} names group {} of {}", o.group, self.group_names.len())));
            }
            if o.links.len() != self.mmds.len() {
                return Err(Error::Shape(format!("OMD {k} has {} links for {} MMDs", o.links.len(), self.mmds.len())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceStatus {
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdRecord {
    pub omega: f64,
    pub price: f64,
    /// Realized `p n_i - c omega`.
    pub utility: f64,
    pub attached: usize,
}

/// Outcome of one outer round: the strategies in force and the attachment
/// the imitation rounds reached under them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub inner_rounds: usize,
    pub mmds: Vec<MmdRecord>,
    /// `[mmd][group]`.
    pub group_counts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub status: TraceStatus,
    pub group_names: Vec<String>,
    pub rounds: Vec<RoundRecord>,
    /// Strategies after the last MMD update, `(omega, price)`.
    pub final_strategies: Vec<(f64, f64)>,
    /// Final relay of every OMD.
    pub final_attachment: Vec<Option<usize>>,
}

impl SimTrace {
    pub fn final_prices(&self) -> Vec<f64> {
        self.final_strategies.iter().map(|s| s.1).collect()
    }

    pub fn final_omegas(&self) -> Vec<f64> {
        self.final_strategies.iter().map(|s| s.0).collect()
    }

    pub fn final_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.final_strategies.len()];
        for i in self.final_attachment.iter().flatten() {
            counts[*i] += 1;
        }
        counts
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["round", "mmd_id", "omega", "price", "utility"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend(self.group_names.iter().map(|g| format!("n_{g}")));
        h
    }

    /// One row per outer round and MMD.
    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for r in &self.rounds {
            for (i, m) in r.mmds.iter().enumerate() {
                let mut row = vec![
                    r.round.to_string(),
                    i.to_string(),
                    format!("{}", m.omega),
                    format!("{}", m.price),
                    format!("{}", m.utility),
                ];
                row.extend(r.group_counts[i].iter().map(|c| c.to_string()));
                rows.push(row);
            }
        }
        rows
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = self.csv_header().join(",");
        s.push('\n');
        for row in self.csv_rows() {
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

/// Runs the two-level protocol from a random initial attachment.
pub fn run_imes(config: &ImesConfig, scenario: &ImesScenario) -> Result<SimTrace> {
    config.validate()?;
    scenario.validate()?;
    let m = scenario.mmds.len();
    let n_groups = scenario.group_names.len();
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);

    let mut agents: Vec<OmdAgent> = scenario
        .omds
        .iter()
        .map(|spec| OmdAgent::new(spec.group, spec.links.clone(), master.gen()))
        .collect();
    for a in agents.iter_mut() {
        let reach: Vec<usize> = a.reachable().collect();
        if !reach.is_empty() {
            a.current_mmd = Some(reach[master.gen_range(0..reach.len())]);
        }
    }
    let mut mmds: Vec<MmdAgent> = scenario
        .mmds
        .iter()
        .map(|p| MmdAgent::new(p, config.mu_omega, config.mu_price, config.delta_t))
        .collect();

    let mut rounds = Vec::new();
    let mut status = TraceStatus::BudgetExhausted;
    for round in 1..=config.max_rounds {
        let mut inner_rounds = 0;
        while inner_rounds < config.waiting_rounds {
            inner_rounds += 1;
            if dao_round(&mut agents, &mmds, scenario.model, &scenario.cap, config.utility_tol).stable {
                break;
            }
        }

        let counts = attachment_counts(&agents, m);
        let records: Vec<MmdRecord> = mmds
            .iter()
            .zip(&counts)
            .map(|(a, &n)| MmdRecord {
                omega: a.omega,
                price: a.price,
                utility: mmd_utility(a.price, n as f64, a.cost, a.omega),
                attached: n,
            })
            .collect();
        rounds.push(RoundRecord {
            round,
            inner_rounds,
            mmds: records.clone(),
            group_counts: group_counts(&agents, m, n_groups),
        });

        let slopes = response_slopes(&agents, &mmds);
        let mut moved = 0.0_f64;
        for ((mmd, rec), (s_omega, s_price)) in mmds.iter_mut().zip(&records).zip(slopes) {
            mmd.record_utility(rec.utility);
            let next = dam_step(mmd, s_omega / mmd.delta_t, s_price / mmd.delta_t);
            moved = moved
                .max((next.omega - mmd.omega).abs())
                .max((next.price - mmd.price).abs());
            mmd.omega = next.omega;
            mmd.price = next.price;
        }
        if moved < config.stability_tol {
            status = TraceStatus::Converged;
            break;
        }
    }

    Ok(SimTrace {
        status,
        group_names: scenario.group_names.clone(),
        rounds,
        final_strategies: mmds.iter().map(|a| (a.omega, a.price)).collect(),
        final_attachment: agents.iter().map(|a| a.current_mmd).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mmd(omega: f64, price: f64) -> MmdAgent {
        MmdAgent {
            omega,
            price,
            cost: 0.5,
            omega_cap: 50.0,
            mu_omega: 1.0,
            mu_p: 0.5,
            delta_t: 1.0,
            utility_history: [None, None],
        }
    }

    #[test]
    fn group_average_examples() {
        assert_eq!(group_average_utility(&[0.7, 0.7], &[3, 4]).unwrap(), 0.7);
        assert_eq!(group_average_utility(&[2.0, 0.0], &[1, 1]).unwrap(), 1.0);
        assert!((group_average_utility(&[3.0, 1.0, 2.0], &[10, 20, 10]).unwrap() - 1.75).abs() < 1e-15);
        assert!(matches!(group_average_utility(&[1.0], &[0]), Err(Error::EmptyGroup)));
    }

    #[test]
    fn switch_probability_examples() {
        assert_eq!(switch_probability(1.3, 1.3), 0.0);
        assert_eq!(switch_probability(2.0, 0.0), 1.0);
        assert!((switch_probability(2.0, 1.5) - 0.25).abs() < 1e-15);
        assert_eq!(switch_probability(0.0, -1.0), 0.0);
        assert!((switch_probability(-2.0, -2.5) - 0.25).abs() < 1e-15);
        assert_eq!(switch_probability(-2.0, -1.0), 0.0);
    }

    #[test]
    fn dam_update_examples() {
        let a = mmd(20.0, 1.0);
        assert_eq!(dam_update(&a, 3.0, 3.0), a);
        let b = dam_update(&mmd(49.0, 1.0), 5.0, 0.0);
        assert_eq!(b.omega, 50.0);
        let c = dam_update(&mmd(10.0, 0.1), -1.0, 0.0);
        assert_eq!(c.price, 0.0);
    }

    #[test]
    fn single_mmd_never_switches() {
        let link = Some(LinkFactors { tau: 1.2, b: 1.1 });
        let mut agents: Vec<OmdAgent> = (0..5).map(|k| OmdAgent::new(0, vec![link], k)).collect();
        for a in agents.iter_mut() {
            a.current_mmd = Some(0);
        }
        let out = dao_round(&mut agents, &[mmd(10.0, 1.0)], UtilityModel::ModifiedLog, &CapacityParams::default(), 1e-6);
        assert_eq!(out.switches, 0);
        assert!(out.stable);
    }

    #[test]
    fn imitation_never_targets_unreachable_mmds() {
        let l = LinkFactors { tau: 1.2, b: 1.1 };
        let mut agents = vec![
            OmdAgent::new(0, vec![Some(l), None], 1),
            OmdAgent::new(0, vec![Some(l), Some(l)], 2),
        ];
        agents[0].current_mmd = Some(0);
        agents[1].current_mmd = Some(1);
        let offers = [mmd(1.0, 0.0), mmd(50.0, 0.0)];
        for _ in 0..50 {
            dao_round(&mut agents, &offers, UtilityModel::Shannon, &CapacityParams::default(), 1e-9);
            assert_eq!(agents[0].current_mmd, Some(0));
        }
    }
}
