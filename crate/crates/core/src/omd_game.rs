//! Follower (OMD) evolutionary game.
//!
//! Each group `g` of OMDs splits over the MMDs according to a fraction vector
//! `pi^g`. Under the modified log-capacity the utility of a group-`g` member
//! renting MMD `i` is
//!
//! ```text
//! u_i^g = alpha * t * log2(k * omega_i * Y_gi / n_i) - p_i,   n_i = sum_g pi_i^g n^g
//! ```
//!
//! and fractions follow delayed replicator dynamics
//! `d pi_i^g / dt = delta * pi_i^g * (u_i^g(t - tau) - mean_u^g(t - tau))`,
//! integrated with explicit Euler.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::channel::CapacityParams;
use crate::{Error, Result};

/// Attachment below which an MMD is treated as empty when evaluating utilities.
const MIN_ATTACHED: f64 = 1e-12;
const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    fractions: Vec<Vec<f64>>,
    group_sizes: Vec<usize>,
}

impl PopulationState {
    pub fn new(fractions: Vec<Vec<f64>>, group_sizes: Vec<usize>) -> Result<Self> {
        if fractions.is_empty() || fractions.len() != group_sizes.len() {
            return Err(Error::Shape(format!(
                "{} fraction vectors for {} groups",
                fractions.len(),
                group_sizes.len()
            )));
        }
        let m = fractions[0].len();
        if m == 0 {
            return Err(Error::Shape("no MMDs".into()));
        }
        for (g, (pi, &size)) in fractions.iter().zip(&group_sizes).enumerate() {
            if pi.len() != m {
                return Err(Error::Shape(format!("group {g} has {} fractions, expected {m}", pi.len())));
            }
            if size == 0 {
                return Err(Error::InvalidParameter(format!("group {g}: size >= 1")));
            }
            if pi.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::InvalidParameter(format!("group {g}: fractions in [0, 1]")));
            }
            let sum: f64 = pi.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidParameter(format!(
                    "group {g}: fractions sum to 1 (got {sum})"
                )));
            }
        }
        Ok(Self {
            fractions,
            group_sizes,
        })
    }

    /// Two-MMD state from the share of each group attached to the first MMD.
    pub fn two_mmd(first_shares: &[f64], group_sizes: Vec<usize>) -> Result<Self> {
        let fractions = first_shares.iter().map(|&x| vec![x, 1.0 - x]).collect();
        Self::new(fractions, group_sizes)
    }

    pub fn uniform(group_sizes: Vec<usize>, n_mmds: usize) -> Result<Self> {
        let share = 1.0 / n_mmds as f64;
        let fractions = vec![vec![share; n_mmds]; group_sizes.len()];
        Self::new(fractions, group_sizes)
    }

    pub fn fractions(&self) -> &[Vec<f64>] {
        &self.fractions
    }

    pub fn fraction(&self, group: usize, mmd: usize) -> f64 {
        self.fractions[group][mmd]
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn n_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn n_mmds(&self) -> usize {
        self.fractions[0].len()
    }

    pub fn total(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    /// Expected number of OMDs attached to `mmd` over all groups.
    pub fn attached(&self, mmd: usize) -> f64 {
        self.fractions
            .iter()
            .zip(&self.group_sizes)
            .map(|(pi, &n)| pi[mmd] * n as f64)
            .sum()
    }

    pub fn is_interior(&self) -> bool {
        self.fractions
            .iter()
            .flatten()
            .all(|&x| x > 1e-12 && x < 1.0 - 1e-12)
    }

    /// Integer attachment counts per group, by largest-remainder rounding.
    /// Each row sums exactly to the group size.
    pub fn to_counts(&self) -> Vec<Vec<usize>> {
        self.fractions
            .iter()
            .zip(&self.group_sizes)
            .map(|(pi, &n)| largest_remainder(pi, n))
            .collect()
    }
}

fn largest_remainder(shares: &[f64], total: usize) -> Vec<usize> {
    let raw: Vec<f64> = shares.iter().map(|&s| s * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|&r| r.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Replicator speed, delay and Euler step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvoParams {
    pub delta: f64,
    /// Delay in time units; discretized to `round(tau / dt)` Euler steps.
    pub tau: f64,
    pub dt: f64,
}

impl Default for EvoParams {
    fn default() -> Self {
        Self {
            delta: 1.0,
            tau: 1.0,
            dt: 0.01,
        }
    }
}

impl EvoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta > 0 (got {})", self.delta)));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::InvalidParameter(format!("tau >= 0 (got {})", self.tau)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt > 0 (got {})", self.dt)));
        }
        Ok(())
    }

    pub fn delay_steps(&self) -> usize {
        (self.tau / self.dt).round() as usize
    }
}

/// Offers of the MMDs plus the effective SNR factor each group sees per MMD.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupEconomics {
    /// `y_values[g][i]`: `Y = max(tau, b)` for group `g` relaying through MMD `i`.
    pub y_values: Vec<Vec<f64>>,
    pub omega: Vec<f64>,
    pub prices: Vec<f64>,
}

impl GroupEconomics {
    /// Every group sees the same factor `y_per_mmd[i]` at MMD `i`.
    pub fn per_mmd(y_per_mmd: &[f64], n_groups: usize, omega: Vec<f64>, prices: Vec<f64>) -> Self {
        Self {
            y_values: vec![y_per_mmd.to_vec(); n_groups],
            omega,
            prices,
        }
    }

    pub fn validate(&self, n_groups: usize, n_mmds: usize) -> Result<()> {
        if self.y_values.len() != n_groups || self.y_values.iter().any(|row| row.len() != n_mmds) {
            return Err(Error::Shape(format!("y_values must be {n_groups} x {n_mmds}")));
        }
        if self.omega.len() != n_mmds || self.prices.len() != n_mmds {
            return Err(Error::Shape(format!("omega and prices need {n_mmds} entries")));
        }
        if self.y_values.iter().flatten().any(|&y| !(y >= 1.0)) {
            return Err(Error::InvalidParameter("y_values >= 1".into()));
        }
        if self.omega.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidParameter("omega >= 0".into()));
        }
        if self.prices.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidParameter("prices >= 0".into()));
        }
        Ok(())
    }
}

/// Follower utility `[alpha * t * max(c_r, c_d) - price] * x` with `x = 1`
/// only when relaying strictly beats the direct link.
pub fn omd_utility(c_r: f64, c_d: f64, price: f64, params: &CapacityParams) -> f64 {
    if c_r > c_d {
        params.alpha * params.t_access * c_r.max(c_d) - price
    } else {
        0.0
    }
}

/// Utilities of every (group, MMD) cell and the population-weighted group means.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilitySnapshot {
    pub utilities: Vec<Vec<f64>>,
    pub means: Vec<f64>,
}

impl UtilitySnapshot {
    /// Modified log-utilities at `state`. The evolutionary analysis assumes the
    /// relayed link is in use, so `max(C_R, C_D) = log2(k omega Y / n)`.
    pub fn evaluate(state: &PopulationState, econ: &GroupEconomics, cap: &CapacityParams) -> Self {
        let m = state.n_mmds();
        let attached: Vec<f64> = (0..m).map(|i| state.attached(i).max(MIN_ATTACHED)).collect();
        let utilities: Vec<Vec<f64>> = econ
            .y_values
            .iter()
            .map(|ys| {
                (0..m)
                    .map(|i| {
                        let c = (cap.k_omega * econ.omega[i] * ys[i] / attached[i]).log2();
                        cap.alpha * cap.t_access * c - econ.prices[i]
                    })
                    .collect()
            })
            .collect();
        let means = utilities
            .iter()
            .zip(state.fractions())
            .map(|(u, pi)| {
                u.iter()
                    .zip(pi)
                    .filter(|(_, &x)| x > 0.0)
                    .map(|(&ui, &x)| ui * x)
                    .sum()
            })
            .collect();
        Self { utilities, means }
    }

    /// Snapshot from explicit utilities; group means are weighted by `state`.
    pub fn from_utilities(state: &PopulationState, utilities: Vec<Vec<f64>>) -> Self {
        let means = utilities
            .iter()
            .zip(state.fractions())
            .map(|(u, pi)| u.iter().zip(pi).map(|(a, b)| a * b).sum())
            .collect();
        Self { utilities, means }
    }
}

/// Ring buffer of past utility snapshots, newest last.
#[derive(Debug, Clone)]
pub struct UtilityHistory {
    snapshots: VecDeque<UtilitySnapshot>,
    capacity: usize,
}

impl UtilityHistory {
    /// History able to serve lags up to `delay_steps`.
    pub fn new(delay_steps: usize) -> Self {
        Self {
            snapshots: VecDeque::with_capacity(delay_steps + 1),
            capacity: delay_steps + 1,
        }
    }

    /// History pre-filled by replaying `initial` for every past step.
    pub fn seeded(initial: UtilitySnapshot, delay_steps: usize) -> Self {
        let mut h = Self::new(delay_steps);
        for _ in 0..h.capacity {
            h.push(initial.clone());
        }
        h
    }

    pub fn push(&mut self, snapshot: UtilitySnapshot) {
        if self.snapshots.len() == self.capacity {
            self.snapshots.pop_front();
        }
        self.snapshots.push_back(snapshot);
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Snapshot `lag` steps back; `lag = 0` is the newest.
    pub fn delayed(&self, lag: usize) -> Option<&UtilitySnapshot> {
        let n = self.snapshots.len();
        if lag >= n {
            None
        } else {
            self.snapshots.get(n - 1 - lag)
        }
    }
}

/// Right-hand side of the replicator equation for a given utility snapshot.
pub fn replicator_rates(state: &PopulationState, snapshot: &UtilitySnapshot, delta: f64) -> Vec<Vec<f64>> {
    state
        .fractions()
        .iter()
        .zip(&snapshot.utilities)
        .zip(&snapshot.means)
        .map(|((pi, u), &mean)| {
            pi.iter()
                .zip(u)
                .map(|(&x, &ui)| if x > 0.0 { delta * x * (ui - mean) } else { 0.0 })
                .collect()
        })
        .collect()
}

/// One Euler step of the delayed replicator dynamics, followed by clipping to
/// `[0, 1]` and renormalization of every group onto the simplex.
pub fn replicator_step(
    state: &PopulationState,
    history: &UtilityHistory,
    params: &EvoParams,
) -> Result<PopulationState> {
    let lag = params.delay_steps();
    let past = history.delayed(lag).ok_or(Error::ShortHistory {
        have: history.len(),
        need: lag,
    })?;
    if past.utilities.len() != state.n_groups() {
        return Err(Error::Shape("history snapshot has a different group count".into()));
    }
    let rates = replicator_rates(state, past, params.delta);
    let fractions = state
        .fractions()
        .iter()
        .zip(rates)
        .map(|(pi, rate)| {
            let mut next: Vec<f64> = pi
                .iter()
                .zip(rate)
                .map(|(&x, r)| (x + params.dt * r).clamp(0.0, 1.0))
                .collect();
            let sum: f64 = next.iter().sum();
            if sum > 0.0 {
                next.iter_mut().for_each(|x| *x /= sum);
            } else {
                next.clone_from(pi);
            }
            next
        })
        .collect();
    Ok(PopulationState {
        fractions,
        group_sizes: state.group_sizes.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub max_steps: usize,
    /// Stop once every `|d pi / dt|` is below this.
    pub rate_tol: f64,
    /// Record the state every this many steps (plus the endpoints).
    pub record_every: Option<usize>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            max_steps: 1_000_000,
            rate_tol: 1e-8,
            record_every: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub state: PopulationState,
    pub steps: usize,
    pub converged: bool,
    /// `(time, state)` samples when recording was requested.
    pub trajectory: Vec<(f64, PopulationState)>,
}

/// Integrates the delayed replicator dynamics from `initial` until the
/// dynamics are at rest or the step budget runs out.
pub fn evolve(
    initial: &PopulationState,
    econ: &GroupEconomics,
    cap: &CapacityParams,
    params: &EvoParams,
    opts: &EvolveOptions,
) -> Result<Evolution> {
    params.validate()?;
    econ.validate(initial.n_groups(), initial.n_mmds())?;
    let lag = params.delay_steps();
    let mut state = initial.clone();
    let mut history = UtilityHistory::seeded(UtilitySnapshot::evaluate(&state, econ, cap), lag);
    let mut trajectory = Vec::new();
    if opts.record_every.is_some() {
        trajectory.push((0.0, state.clone()));
    }

    let at_rest = |state: &PopulationState, history: &UtilityHistory| {
        let current = history.delayed(0).expect("history is never empty");
        let past = history.delayed(lag).unwrap_or(current);
        let worst = |snap: &UtilitySnapshot| {
            replicator_rates(state, snap, params.delta)
                .into_iter()
                .flatten()
                .fold(0.0_f64, |a, r| a.max(r.abs()))
        };
        worst(current) < opts.rate_tol && worst(past) < opts.rate_tol
    };

    let mut steps = 0;
    let mut converged = at_rest(&state, &history);
    while !converged && steps < opts.max_steps {
        state = replicator_step(&state, &history, params)?;
        history.push(UtilitySnapshot::evaluate(&state, econ, cap));
        steps += 1;
        if let Some(every) = opts.record_every {
            if every > 0 && steps % every == 0 {
                trajectory.push((steps as f64 * params.dt, state.clone()));
            }
        }
        converged = at_rest(&state, &history);
    }
    if opts.record_every.is_some() && trajectory.last().map(|(t, _)| *t) != Some(steps as f64 * params.dt) {
        trajectory.push((steps as f64 * params.dt, state.clone()));
    }
    Ok(Evolution {
        state,
        steps,
        converged,
        trajectory,
    })
}

/// Count `X = n_1` attached to the first MMD at the evolutionary equilibrium
/// of the linear-capacity two-MMD game: the root in `(0, n)` of
/// `D X^2 - (omega1 A + omega2 B + n D) X + omega1 A n = 0`.
pub fn equilibrium_share_quadratic(a: f64, b: f64, d: f64, omega1: f64, omega2: f64, n: f64) -> Result<f64> {
    if !(n >= 1.0 && omega1 > 0.0 && omega2 > 0.0 && a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter(
            "n >= 1, omega > 0 and A, B > 0".into(),
        ));
    }
    let wa = omega1 * a;
    let wb = omega2 * b;
    let inside = |x: f64| x > 0.0 && x < n;
    if d == 0.0 {
        let x = wa * n / (wa + wb);
        return if inside(x) { Ok(x) } else { Err(Error::NoInteriorRoot { n }) };
    }
    let s = wa + wb + n * d;
    let c = wa * n;
    let disc = s * s - 4.0 * d * c;
    if disc < 0.0 {
        return Err(Error::NoInteriorRoot { n });
    }
    // cancellation-free pair of roots
    let q = 0.5 * (s + s.signum() * disc.sqrt());
    let roots = [q / d, c / q];
    roots
        .into_iter()
        .find(|&x| inside(x))
        .ok_or(Error::NoInteriorRoot { n })
}

/// Equilibrium count on the first MMD under the modified log-capacity:
/// `n / (1 + 2^(p1 - p2) * (omega2 Y2) / (omega1 Y1))`.
pub fn equilibrium_share_closed(p1: f64, p2: f64, omega1: f64, omega2: f64, y1: f64, y2: f64, n: f64) -> f64 {
    n / (1.0 + (p1 - p2).exp2() * (omega2 * y2) / (omega1 * y1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    AsymptoticallyStable,
    /// Largest real part is zero to working precision (e.g. a line of equilibria).
    Marginal,
    Unstable,
    /// Some fraction sits at 0 or 1; the linearization does not classify it.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianReport {
    pub matrix: [[f64; 2]; 2],
    pub eigenvalues: [Eigenvalue; 2],
    pub stability: Stability,
}

/// Eigenvalues of a 2x2 matrix, `(tr +- sqrt(4 J12 J21 + (J11 - J22)^2)) / 2`.
pub fn eigenvalues_2x2(j: &[[f64; 2]; 2]) -> [Eigenvalue; 2] {
    let tr = j[0][0] + j[1][1];
    let disc = 4.0 * j[0][1] * j[1][0] + (j[0][0] - j[1][1]).powi(2);
    if disc >= 0.0 {
        let r = disc.sqrt();
        [
            Eigenvalue { re: 0.5 * (tr + r), im: 0.0 },
            Eigenvalue { re: 0.5 * (tr - r), im: 0.0 },
        ]
    } else {
        let r = (-disc).sqrt();
        [
            Eigenvalue { re: 0.5 * tr, im: 0.5 * r },
            Eigenvalue { re: 0.5 * tr, im: -0.5 * r },
        ]
    }
}

/// Jacobian of `F_g = delta * pi_1^g (u_1^g - mean_u^g)` with respect to the
/// first-MMD shares of the two groups, by central finite differences.
pub fn evo_jacobian(
    state: &PopulationState,
    econ: &GroupEconomics,
    cap: &CapacityParams,
    delta: f64,
) -> Result<JacobianReport> {
    if state.n_groups() != 2 || state.n_mmds() != 2 {
        return Err(Error::Shape("Jacobian needs exactly two groups and two MMDs".into()));
    }
    econ.validate(2, 2)?;
    let shares = [state.fraction(0, 0), state.fraction(1, 0)];
    let sizes = state.group_sizes().to_vec();
    let field = |s: [f64; 2]| -> Result<[f64; 2]> {
        let st = PopulationState::two_mmd(&s, sizes.clone())?;
        let snap = UtilitySnapshot::evaluate(&st, econ, cap);
        let rates = replicator_rates(&st, &snap, delta);
        Ok([rates[0][0], rates[1][0]])
    };

    let h = 1e-6;
    let mut matrix = [[0.0; 2]; 2];
    for l in 0..2 {
        let lo = (shares[l] - h).max(0.0);
        let hi = (shares[l] + h).min(1.0);
        let mut minus = shares;
        let mut plus = shares;
        minus[l] = lo;
        plus[l] = hi;
        let f_minus = field(minus)?;
        let f_plus = field(plus)?;
        for k in 0..2 {
            matrix[k][l] = (f_plus[k] - f_minus[k]) / (hi - lo);
        }
    }
    let eigenvalues = eigenvalues_2x2(&matrix);
    let stability = if !state.is_interior() {
        Stability::Boundary
    } else {
        let scale = matrix.iter().flatten().fold(0.0_f64, |a, &v| a.max(v.abs())).max(1e-300);
        let top = eigenvalues[0].re.max(eigenvalues[1].re);
        if top.abs() <= 1e-6 * scale {
            Stability::Marginal
        } else if top < 0.0 {
            Stability::AsymptoticallyStable
        } else {
            Stability::Unstable
        }
    };
    Ok(JacobianReport {
        matrix,
        eigenvalues,
        stability,
    })
}
