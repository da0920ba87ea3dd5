//! Link budget for direct and amplify-and-forward (AF) relayed D2D links.
//!
//! Gains are amplitude gains; every SNR uses the squared gain. Capacities are
//! in bits per second for a given bandwidth share in hertz.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Gains and powers of one source → relay → destination link set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    pub h_sr: f64,
    pub h_sd: f64,
    pub h_rd: f64,
    pub p_source: f64,
    pub p_relay: f64,
    pub noise_var: f64,
}

impl ChannelGains {
    pub fn new(
        h_sr: f64,
        h_sd: f64,
        h_rd: f64,
        p_source: f64,
        p_relay: f64,
        noise_var: f64,
    ) -> Result<Self> {
        let g = Self {
            h_sr,
            h_sd,
            h_rd,
            p_source,
            p_relay,
            noise_var,
        };
        g.validate()?;
        Ok(g)
    }

    /// Source and relay share one transmit power.
    pub fn with_common_power(h_sr: f64, h_sd: f64, h_rd: f64, power: f64, noise_var: f64) -> Result<Self> {
        Self::new(h_sr, h_sd, h_rd, power, power, noise_var)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, h) in [("h_sr", self.h_sr), ("h_sd", self.h_sd), ("h_rd", self.h_rd)] {
            if !(h >= 0.0 && h.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} >= 0 (got {h})")));
            }
        }
        for (name, p) in [
            ("p_source", self.p_source),
            ("p_relay", self.p_relay),
            ("noise_var", self.noise_var),
        ] {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} > 0 (got {p})")));
            }
        }
        Ok(())
    }

    /// `1 + SNR_sd + SNR_srd`, the combined SNR factor of a relayed link.
    pub fn tau(&self) -> f64 {
        1.0 + snr_direct(self) + snr_relayed(self)
    }

    /// `1 + SNR_sd`, the SNR factor of the direct link.
    pub fn b(&self) -> f64 {
        1.0 + snr_direct(self)
    }

    /// Effective SNR factor `Y = max(tau, b)`.
    pub fn y_factor(&self) -> f64 {
        self.tau().max(self.b())
    }
}

/// Scaling and pricing constants of the follower utility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityParams {
    /// Scale inside the modified log-capacity.
    pub k_omega: f64,
    /// Monetary value per bit.
    pub alpha: f64,
    /// Fraction of time the source can access its relay.
    pub t_access: f64,
}

impl Default for CapacityParams {
    fn default() -> Self {
        Self {
            k_omega: 1.0,
            alpha: 1.0,
            t_access: 1.0,
        }
    }
}

impl CapacityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_omega > 0.0) {
            return Err(Error::InvalidParameter(format!("k_omega > 0 (got {})", self.k_omega)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha > 0 (got {})", self.alpha)));
        }
        if !(self.t_access > 0.0 && self.t_access <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "t_access in (0, 1] (got {})",
                self.t_access
            )));
        }
        Ok(())
    }
}

pub fn snr_direct(g: &ChannelGains) -> f64 {
    g.p_source * g.h_sd * g.h_sd / g.noise_var
}

/// AF end-to-end SNR through the relay.
pub fn snr_relayed(g: &ChannelGains) -> f64 {
    let s = g.p_source * g.h_sr * g.h_sr;
    let r = g.p_relay * g.h_rd * g.h_rd;
    s * r / (g.noise_var * (g.noise_var + s + r))
}

pub fn capacity_direct(bandwidth_share: f64, snr_d: f64) -> f64 {
    bandwidth_share * (1.0 + snr_d).log2()
}

/// Half-rate AF capacity with maximal-ratio combining at the destination.
pub fn capacity_relay(bandwidth_share: f64, snr_d: f64, snr_r: f64) -> f64 {
    0.5 * bandwidth_share * (1.0 + snr_d + snr_r).log2()
}

/// Relay selection condition: relaying must strictly beat the direct link.
/// A dead direct link makes any positive relayed capacity a gain.
pub fn relay_beneficial(c_r: f64, c_d: f64) -> bool {
    if c_d == 0.0 {
        c_r > 0.0
    } else {
        c_r / c_d > 1.0
    }
}

/// `log2(k * omega / n * y)` where `y` is `tau` (relayed) or `b` (direct).
pub fn modified_log_capacity(k_omega: f64, omega: f64, n_attached: usize, y: f64) -> Result<f64> {
    if n_attached == 0 {
        return Err(Error::InvalidParameter(
            "n_attached >= 1 (bandwidth share undefined with no attached OMDs)".into(),
        ));
    }
    Ok((k_omega * omega * y / n_attached as f64).log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group_a() -> ChannelGains {
        ChannelGains::with_common_power(0.3, 0.25, 0.4, 2.0, 1.0).unwrap()
    }

    #[test]
    fn direct_snr_examples() {
        assert!((snr_direct(&group_a()) - 0.125).abs() < 1e-15);
        let dead = ChannelGains::with_common_power(0.3, 0.0, 0.4, 2.0, 1.0).unwrap();
        assert_eq!(snr_direct(&dead), 0.0);
        let unit = ChannelGains::with_common_power(0.3, 1.0, 0.4, 1.5, 1.5).unwrap();
        assert!((snr_direct(&unit) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn relayed_snr_examples() {
        assert!((snr_relayed(&group_a()) - 0.0384).abs() < 1e-15);
        let mut g = group_a();
        g.h_sr = 0.0;
        assert_eq!(snr_relayed(&g), 0.0);
        let mut g = group_a();
        g.h_rd = 0.0;
        assert_eq!(snr_relayed(&g), 0.0);
    }

    #[test]
    fn capacity_examples() {
        assert!((capacity_direct(1.0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(capacity_direct(0.0, 3.0), 0.0);
        assert!((capacity_direct(2.0, 0.125) - 0.339_850_002_884_624_7).abs() < 1e-14);

        assert!((capacity_relay(2.0, 0.0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(capacity_relay(0.0, 0.3, 0.2), 0.0);
        assert!((capacity_relay(1.0, 0.125, 0.0384) - 0.109_173_604_639_249_6).abs() < 1e-14);
    }

    #[test]
    fn relay_selection_condition() {
        assert!(relay_beneficial(2.0, 1.0));
        assert!(!relay_beneficial(1.0, 1.0));
        assert!(!relay_beneficial(0.109, 0.170));
        assert!(relay_beneficial(0.1, 0.0));
        assert!(!relay_beneficial(0.0, 0.0));

        // group a of the default scenario: half-rate relaying loses
        let g = group_a();
        let c_r = capacity_relay(1.0, snr_direct(&g), snr_relayed(&g));
        let c_d = capacity_direct(1.0, snr_direct(&g));
        assert!(!relay_beneficial(c_r, c_d));
    }

    #[test]
    fn modified_log_capacity_examples() {
        assert!((modified_log_capacity(1.0, 2.0, 1, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(modified_log_capacity(1.0, 1.0, 1, 1.0).unwrap(), 0.0);
        let v = modified_log_capacity(1.0, 20.0, 10, 1.1634).unwrap();
        assert!((v - 1.218_347_209_278_499_2).abs() < 1e-14);
        assert!(modified_log_capacity(1.0, 20.0, 0, 1.1634).is_err());
    }

    #[test]
    fn rejects_invalid_gains() {
        assert!(ChannelGains::with_common_power(-0.1, 0.2, 0.2, 1.0, 1.0).is_err());
        assert!(ChannelGains::with_common_power(0.1, 0.2, 0.2, 0.0, 1.0).is_err());
        assert!(ChannelGains::with_common_power(0.1, 0.2, 0.2, 1.0, 0.0).is_err());
    }

    #[test]
    fn y_factor_prefers_relayed_sum() {
        let g = group_a();
        assert!((g.tau() - 1.1634).abs() < 1e-15);
        assert!((g.b() - 1.125).abs() < 1e-15);
        assert_eq!(g.y_factor(), g.tau());
    }
}
