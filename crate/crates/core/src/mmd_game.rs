//! Leader (MMD) game: revenue minus bandwidth cost, explicit best-response
//! pricing through the Lambert-W function, the iterated best-response Nash
//! solver for two MMDs, and numerical bandwidth best responses.

use serde::{Deserialize, Serialize};

use crate::lambert::lambert_w;
use crate::omd_game::equilibrium_share_closed;
use crate::{Error, Result};

/// Default upper bound on offered bandwidth.
pub const DEFAULT_OMEGA_CAP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdParams {
    pub omega: f64,
    pub cost: f64,
    pub price: f64,
    pub omega_cap: f64,
}

impl MmdParams {
    pub fn new(omega: f64, cost: f64, price: f64) -> Result<Self> {
        let p = Self {
            omega,
            cost,
            price,
            omega_cap: DEFAULT_OMEGA_CAP,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_cap > 0.0) {
            return Err(Error::InvalidParameter(format!("omega_cap > 0 (got {})", self.omega_cap)));
        }
        if !(self.omega >= 0.0 && self.omega <= self.omega_cap) {
            return Err(Error::InvalidParameter(format!(
                "0 <= omega <= omega_cap (got {} with cap {})",
                self.omega, self.omega_cap
            )));
        }
        if !(self.cost >= 0.0) {
            return Err(Error::InvalidParameter(format!("cost >= 0 (got {})", self.cost)));
        }
        if !(self.price >= 0.0) {
            return Err(Error::InvalidParameter(format!("price >= 0 (got {})", self.price)));
        }
        Ok(())
    }
}

/// Revenue from `attached` OMDs minus the cost of the offered bandwidth.
pub fn mmd_utility(price: f64, attached: f64, cost: f64, omega: f64) -> f64 {
    price * attached - cost * omega
}

/// MMD utility with attachment given by the followers' evolutionary
/// equilibrium, `p_i n / (1 + 2^(p_i - p_j) (omega_j y_j) / (omega_i y_i)) - c_i omega_i`.
#[allow(clippy::too_many_arguments)]
pub fn mmd_utility_closed(
    p_i: f64,
    p_j: f64,
    omega_i: f64,
    omega_j: f64,
    y_i: f64,
    y_j: f64,
    n: f64,
    cost_i: f64,
) -> f64 {
    let rival = omega_j * y_j / (omega_i * y_i);
    p_i * n / (1.0 + (p_i - p_j).exp2() * rival) - cost_i * omega_i
}

/// The same utility with `2^x` replaced by `e^x`; the explicit best-response
/// price maximizes this form.
#[allow(clippy::too_many_arguments)]
pub fn mmd_utility_closed_exp(
    p_i: f64,
    p_j: f64,
    omega_i: f64,
    omega_j: f64,
    y_i: f64,
    y_j: f64,
    n: f64,
    cost_i: f64,
) -> f64 {
    let rival = omega_j * y_j / (omega_i * y_i);
    p_i * n / (1.0 + (p_i - p_j).exp() * rival) - cost_i * omega_i
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponseResult {
    pub price_star: f64,
    pub w_argument: f64,
    /// Halley iterations spent inside the Lambert-W evaluation.
    pub iterations: usize,
}

/// `1 + W((omega_self y_self / (omega_other y_other)) e^(p_other - 1))`.
pub fn best_response_price(
    p_other: f64,
    omega_self: f64,
    omega_other: f64,
    y_self: f64,
    y_other: f64,
) -> Result<BestResponseResult> {
    if !(omega_self > 0.0 && omega_other > 0.0 && y_self > 0.0 && y_other > 0.0 && p_other >= 0.0) {
        return Err(Error::InvalidParameter(
            "best response needs positive bandwidths and Y factors and a non-negative rival price".into(),
        ));
    }
    let ratio = omega_self * y_self / (omega_other * y_other);
    let w_argument = ratio * (p_other - 1.0).exp();
    let (w, iterations) = crate::lambert::lambert_w_counted(w_argument)?;
    Ok(BestResponseResult {
        price_star: 1.0 + w,
        w_argument,
        iterations,
    })
}

/// Per-OMD derivative of the base-2 closed utility in the own price,
/// `d/dp_i [p_i / (1 + 2^(p_i - p_j) / ratio)]` with `ratio = omega_i y_i / (omega_j y_j)`.
/// Zero at a base-2 optimum; the explicit Lambert-W price generally leaves a
/// residual here since it solves the base-e condition.
pub fn base2_foc_residual(p_i: f64, p_j: f64, ratio: f64) -> f64 {
    let e2 = (p_i - p_j).exp2() / ratio;
    let d = 1.0 + e2;
    1.0 / d - p_i * e2 * std::f64::consts::LN_2 / (d * d)
}

/// Per-OMD derivative of the base-e closed utility in the own price.
pub fn exp_foc_residual(p_i: f64, p_j: f64, ratio: f64) -> f64 {
    let e = (p_i - p_j).exp() / ratio;
    let d = 1.0 + e;
    1.0 / d - p_i * e / (d * d)
}

/// `dB/dp_other = W(z) / (z (1 + W(z)))`, with its limit 1 at `z = 0`.
pub fn best_response_slope(z: f64) -> Result<f64> {
    if z == 0.0 {
        return Ok(1.0);
    }
    let w = lambert_w(z)?;
    Ok(w / (z * (1.0 + w)))
}

/// Two-MMD pricing game at fixed bandwidths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingGame {
    pub omega: [f64; 2],
    pub y: [f64; 2],
    pub cost: [f64; 2],
    /// Total OMD population.
    pub n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashPrices {
    pub prices: [f64; 2],
    pub iterations: usize,
    /// `|p_i - B_i(p_j)|` at the returned point.
    pub residuals: [f64; 2],
}

impl PricingGame {
    pub fn validate(&self) -> Result<()> {
        if self.omega.iter().chain(&self.y).any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidParameter("omega > 0 and y > 0 for both MMDs".into()));
        }
        if self.cost.iter().any(|&c| !(c >= 0.0)) {
            return Err(Error::InvalidParameter("cost >= 0".into()));
        }
        if !(self.n >= 1.0) {
            return Err(Error::InvalidParameter("n >= 1".into()));
        }
        Ok(())
    }

    pub fn best_response(&self, i: usize, p_other: f64) -> Result<BestResponseResult> {
        let j = 1 - i;
        best_response_price(p_other, self.omega[i], self.omega[j], self.y[i], self.y[j])
    }

    /// `omega_i y_i / (omega_j y_j)`.
    pub fn ratio(&self, i: usize) -> f64 {
        let j = 1 - i;
        self.omega[i] * self.y[i] / (self.omega[j] * self.y[j])
    }

    /// Base-2 closed utility of MMD `i` at a price pair.
    pub fn utility(&self, i: usize, prices: [f64; 2]) -> f64 {
        let j = 1 - i;
        mmd_utility_closed(
            prices[i], prices[j], self.omega[i], self.omega[j], self.y[i], self.y[j], self.n, self.cost[i],
        )
    }

    /// Followers' equilibrium count on each MMD at a price pair.
    pub fn attachment(&self, prices: [f64; 2]) -> [f64; 2] {
        let n1 = equilibrium_share_closed(
            prices[0], prices[1], self.omega[0], self.omega[1], self.y[0], self.y[1], self.n,
        );
        [n1, self.n - n1]
    }
}

/// Nash prices by alternating best responses from `(1, 1)`, tolerance 1e-9.
pub fn nash_prices(game: &PricingGame) -> Result<NashPrices> {
    nash_prices_from(game, [1.0, 1.0], 1e-9, 10_000)
}

pub fn nash_prices_from(game: &PricingGame, start: [f64; 2], tol: f64, budget: usize) -> Result<NashPrices> {
    game.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol > 0 (got {tol})")));
    }
    if start.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::InvalidParameter("start prices >= 0".into()));
    }
    let mut p = start;
    for iter in 1..=budget {
        let old = p;
        p[0] = game.best_response(0, p[1])?.price_star;
        p[1] = game.best_response(1, p[0])?.price_star;
        let change = (p[0] - old[0]).abs().max((p[1] - old[1]).abs());
        if change < tol {
            let residuals = [
                (p[0] - game.best_response(0, p[1])?.price_star).abs(),
                (p[1] - game.best_response(1, p[0])?.price_star).abs(),
            ];
            return Ok(NashPrices {
                prices: p,
                iterations: iter,
                residuals,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "nash_prices",
        budget,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupermodularityReport {
    /// True iff every slope lies in `(0, 1)` and every `lambda < 1`.
    pub holds: bool,
    /// Slopes with `z = e^(p_j - 1)`.
    pub plain: SlopeRange,
    /// Slopes with `z = ratio * e^(p_j - 1)`, per MMD.
    pub weighted: [SlopeRange; 2],
    /// Largest `sqrt(B_1' B_2')` over the grid.
    pub lambda_max: f64,
    pub points: usize,
}

/// Evaluates the best-response slopes over every `(p1, p2)` grid pair.
pub fn supermodularity_check(p1_grid: &[f64], p2_grid: &[f64], game: &PricingGame) -> Result<SupermodularityReport> {
    game.validate()?;
    if p1_grid.is_empty() || p2_grid.is_empty() {
        return Err(Error::InvalidParameter("price grids must be non-empty".into()));
    }
    if p1_grid.iter().chain(p2_grid).any(|&p| !(p > 0.0)) {
        return Err(Error::InvalidParameter("grid prices > 0".into()));
    }
    let empty = SlopeRange {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
    };
    let mut plain = empty;
    let mut weighted = [empty; 2];
    let mut lambda_max = f64::NEG_INFINITY;
    let mut holds = true;
    let mut points = 0;
    let widen = |r: &mut SlopeRange, v: f64| {
        r.min = r.min.min(v);
        r.max = r.max.max(v);
    };
    let inside = |v: f64| v > 0.0 && v < 1.0;
    for &p1 in p1_grid {
        for &p2 in p2_grid {
            points += 1;
            let others = [p2, p1];
            let mut w_slopes = [0.0; 2];
            let mut p_slopes = [0.0; 2];
            for i in 0..2 {
                let base = (others[i] - 1.0).exp();
                p_slopes[i] = best_response_slope(base)?;
                w_slopes[i] = best_response_slope(game.ratio(i) * base)?;
                widen(&mut plain, p_slopes[i]);
                widen(&mut weighted[i], w_slopes[i]);
                holds &= inside(p_slopes[i]) && inside(w_slopes[i]);
            }
            for slopes in [p_slopes, w_slopes] {
                let lambda = (slopes[0] * slopes[1]).sqrt();
                lambda_max = lambda_max.max(lambda);
                holds &= lambda < 1.0;
            }
        }
    }
    Ok(SupermodularityReport {
        holds,
        plain,
        weighted,
        lambda_max,
        points,
    })
}

/// Bandwidth game at fixed prices; attachment follows the followers'
/// evolutionary equilibrium for the current bandwidth pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthGame {
    pub prices: [f64; 2],
    pub y: [f64; 2],
    pub cost: [f64; 2],
    pub n: f64,
    pub omega_cap: f64,
}

impl BandwidthGame {
    pub fn validate(&self) -> Result<()> {
        if self.prices.iter().any(|&p| !(p >= 0.0)) || self.cost.iter().any(|&c| !(c >= 0.0)) {
            return Err(Error::InvalidParameter("prices >= 0 and cost >= 0".into()));
        }
        if self.y.iter().any(|&y| !(y > 0.0)) || !(self.n >= 1.0) || !(self.omega_cap > 0.0) {
            return Err(Error::InvalidParameter("y > 0, n >= 1 and omega_cap > 0".into()));
        }
        Ok(())
    }

    /// Utility of MMD `i` offering `omega_i` against a rival offering `omega_j`.
    pub fn utility(&self, i: usize, omega_i: f64, omega_j: f64) -> f64 {
        let j = 1 - i;
        let attached = if omega_i <= 0.0 {
            0.0
        } else if omega_j <= 0.0 {
            self.n
        } else {
            equilibrium_share_closed(
                self.prices[i], self.prices[j], omega_i, omega_j, self.y[i], self.y[j], self.n,
            )
        };
        mmd_utility(self.prices[i], attached, self.cost[i], omega_i)
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizer of `f` on `[lo, hi]` by golden-section search to width `tol`.
/// A flat objective yields `lo`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // endpoints are never probed by the search itself; ties go to `lo`
    let mut best = (lo, f(lo));
    for x in [mid, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best.0
}

/// Bandwidth maximizing MMD `i`'s utility on `[0, omega_cap]` given the
/// rival's bandwidth, to absolute tolerance 1e-6.
pub fn best_response_bandwidth(game: &BandwidthGame, i: usize, omega_other: f64) -> Result<f64> {
    game.validate()?;
    if !(omega_other >= 0.0) {
        return Err(Error::InvalidParameter("omega_other >= 0".into()));
    }
    if game.cost[i] == 0.0 {
        // revenue never decreases in bandwidth
        return Ok(game.omega_cap);
    }
    Ok(golden_section_max(
        |w| game.utility(i, w, omega_other),
        0.0,
        game.omega_cap,
        1e-7,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthEquilibrium {
    pub omega: [f64; 2],
    pub iterations: usize,
}

/// Fixed point of mutual bandwidth best responses by alternating updates.
pub fn bandwidth_equilibrium(game: &BandwidthGame, start: [f64; 2], tol: f64, budget: usize) -> Result<BandwidthEquilibrium> {
    game.validate()?;
    let mut w = start;
    for iter in 1..=budget {
        let old = w;
        w[0] = best_response_bandwidth(game, 0, w[1])?;
        w[1] = best_response_bandwidth(game, 1, w[0])?;
        if (w[0] - old[0]).abs().max((w[1] - old[1]).abs()) < tol {
            return Ok(BandwidthEquilibrium {
                omega: w,
                iterations: iter,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "bandwidth_equilibrium",
        budget,
    })
}
