//! Principal branch `W0` of the Lambert-W function on the reals.

use std::f64::consts::E;

use crate::{Error, Result};

const BRANCH_POINT: f64 = -1.0 / E;
const MAX_ITERATIONS: usize = 64;

/// `W0(z)`, the solution `w >= -1` of `w * e^w = z`.
pub fn lambert_w(z: f64) -> Result<f64> {
    lambert_w_counted(z).map(|(w, _)| w)
}

/// Same as [`lambert_w`], also returning the number of Halley steps taken.
pub fn lambert_w_counted(z: f64) -> Result<(f64, usize)> {
    if z.is_nan() {
        return Err(Error::InvalidParameter("lambert_w of NaN".into()));
    }
    // one ulp of slack so that the rounded -1/e itself is accepted
    if z < BRANCH_POINT - f64::EPSILON * 0.5 {
        return Err(Error::LambertDomain(z));
    }
    if z == 0.0 {
        return Ok((0.0, 0));
    }
    if z <= BRANCH_POINT {
        return Ok((-1.0, 0));
    }
    if z == f64::INFINITY {
        return Ok((f64::INFINITY, 0));
    }

    let mut w = initial_guess(z);
    for iter in 1..=MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            return Ok((w, iter));
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = w - step;
        if !next.is_finite() {
            break;
        }
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * (1.0 + next.abs());
        w = next;
        if done {
            return Ok((polish(w, z), iter));
        }
    }
    Ok((polish(w, z), MAX_ITERATIONS))
}

fn initial_guess(z: f64) -> f64 {
    if z < -0.25 {
        // branch-point series in p = sqrt(2 (e z + 1))
        let p = (2.0 * (E * z + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        z.ln_1p()
    }
}

// One Newton step in the relative form w <- w (1 + ln(z / w) - w) / (1 + w)
// settles the last few ulps for large z, where w e^w loses precision.
fn polish(w: f64, z: f64) -> f64 {
    if z > 1.0 && w > 0.0 {
        let refined = w / (1.0 + w) * (1.0 + (z / w).ln());
        if (refined * refined.exp() - z).abs() < (w * w.exp() - z).abs() {
            return refined;
        }
    }
    w
}
