//! Random planar topologies and distance-based channel gains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// Side length of the square area in meters.
    pub area: f64,
    pub omd_positions: Vec<Point>,
    pub mmd_positions: Vec<Point>,
    /// `(source, destination)` OMD indices.
    pub sd_pairs: Vec<(usize, usize)>,
    pub comm_range: f64,
}

impl Topology {
    /// Topology with explicit positions and pairs, checked for consistency.
    pub fn new(
        area: f64,
        omd_positions: Vec<Point>,
        mmd_positions: Vec<Point>,
        sd_pairs: Vec<(usize, usize)>,
        comm_range: f64,
    ) -> Result<Self> {
        let t = Self {
            area,
            omd_positions,
            mmd_positions,
            sd_pairs,
            comm_range,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.area > 0.0) || !(self.comm_range > 0.0) {
            return Err(Error::InvalidParameter("area > 0 and comm_range > 0".into()));
        }
        let inside = |p: &Point| (0.0..=self.area).contains(&p.x) && (0.0..=self.area).contains(&p.y);
        if !self.omd_positions.iter().chain(&self.mmd_positions).all(inside) {
            return Err(Error::InvalidParameter("all positions inside the area".into()));
        }
        let mut used = vec![false; self.omd_positions.len()];
        for &(s, d) in &self.sd_pairs {
            if s >= used.len() || d >= used.len() || s == d {
                return Err(Error::InvalidParameter(format!("pair ({s}, {d}) names unknown OMDs")));
            }
            if used[s] || used[d] {
                return Err(Error::InvalidParameter("each OMD in at most one pair".into()));
            }
            used[s] = true;
            used[d] = true;
            if self.omd_positions[s].distance(&self.omd_positions[d]) > self.comm_range {
                return Err(Error::InvalidParameter(format!("pair ({s}, {d}) beyond comm_range")));
            }
        }
        Ok(())
    }

    pub fn paired_fraction(&self) -> f64 {
        if self.omd_positions.is_empty() {
            0.0
        } else {
            2.0 * self.sd_pairs.len() as f64 / self.omd_positions.len() as f64
        }
    }

    /// Rows `(node_id, kind, x, y)`; MMD ids continue after the OMDs.
    pub fn dump_rows(&self) -> Vec<(usize, &'static str, f64, f64)> {
        let omds = self.omd_positions.iter().map(|p| ("omd", p));
        let mmds = self.mmd_positions.iter().map(|p| ("mmd", p));
        omds.chain(mmds)
            .enumerate()
            .map(|(id, (kind, p))| (id, kind, p.x, p.y))
            .collect()
    }
}

/// Uniform placement of OMDs and MMDs in an `area x area` square. Every
/// unpaired OMD, in index order, becomes a source paired with its nearest
/// unpaired OMD within `comm_range`.
pub fn generate_topology(area: f64, n_omd: usize, n_mmd: usize, comm_range: f64, seed: u64) -> Result<Topology> {
    if n_omd == 0 || n_mmd == 0 {
        return Err(Error::InvalidParameter("n_omd >= 1 and n_mmd >= 1".into()));
    }
    if !(area > 0.0) || !(comm_range > 0.0) {
        return Err(Error::InvalidParameter("area > 0 and comm_range > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut place = |n: usize| -> Vec<Point> {
        (0..n)
            .map(|_| Point {
                x: rng.gen_range(0.0..area),
                y: rng.gen_range(0.0..area),
            })
            .collect()
    };
    let omds = place(n_omd);
    let mmds = place(n_mmd);

    let mut paired = vec![false; n_omd];
    let mut pairs = Vec::new();
    for s in 0..n_omd {
        if paired[s] {
            continue;
        }
        let nearest = (0..n_omd)
            .filter(|&d| d != s && !paired[d])
            .map(|d| (d, omds[s].distance(&omds[d])))
            .filter(|&(_, dist)| dist <= comm_range)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((d, _)) = nearest {
            paired[s] = true;
            paired[d] = true;
            pairs.push((s, d));
        }
    }
    let unpaired = paired.iter().filter(|p| !**p).count();
    if 2 * unpaired > n_omd {
        return Err(Error::PairingInfeasible {
            paired: n_omd - unpaired,
            total: n_omd,
        });
    }
    Ok(Topology {
        area,
        omd_positions: omds,
        mmd_positions: mmds,
        sd_pairs: pairs,
        comm_range,
    })
}

/// Amplitude gain `sqrt(reference_gain * distance^(-exponent))`, at most 1.
pub fn channel_from_distance(distance: f64, exponent: f64, reference_gain: f64) -> f64 {
    (reference_gain * distance.max(f64::MIN_POSITIVE).powf(-exponent))
        .sqrt()
        .min(1.0)
}

/// Power-law path loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    pub exponent: f64,
    pub reference_gain: f64,
}

impl PathLoss {
    /// Reference gain chosen so that a link of `distance` meters has amplitude gain `gain`.
    pub fn calibrated(exponent: f64, distance: f64, gain: f64) -> Self {
        Self {
            exponent,
            reference_gain: gain * gain * distance.powf(exponent),
        }
    }

    pub fn gain(&self, distance: f64) -> f64 {
        channel_from_distance(distance, self.exponent, self.reference_gain)
    }
}

impl Default for PathLoss {
    fn default() -> Self {
        Self::calibrated(3.0, 30.0, 0.3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topology_is_deterministic() {
        let a = generate_topology(100.0, 40, 3, 50.0, 11).unwrap();
        let b = generate_topology(100.0, 40, 3, 50.0, 11).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
    }

    #[test]
    fn full_range_pairs_everyone() {
        let t = generate_topology(100.0, 40, 3, 150.0, 5).unwrap();
        assert_eq!(t.sd_pairs.len(), 20);
    }

    #[test]
    fn sparse_topology_is_reported() {
        let err = generate_topology(10_000.0, 10, 2, 1.0, 1).unwrap_err();
        assert!(matches!(err, Error::PairingInfeasible { .. }));
    }

    #[test]
    fn distance_gain_examples() {
        assert!((channel_from_distance(1.0, 3.0, 0.25) - 0.5).abs() < 1e-15);
        let g1 = channel_from_distance(10.0, 2.0, 50.0);
        let g2 = channel_from_distance(20.0, 2.0, 50.0);
        assert!((g1 / g2 - 2.0).abs() < 1e-12);
        assert!((PathLoss::default().gain(30.0) - 0.3).abs() < 1e-12);
        assert_eq!(PathLoss::default().gain(0.5), 1.0);
    }
}
