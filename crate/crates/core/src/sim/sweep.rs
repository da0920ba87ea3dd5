//! Parameter sweeps of the delay simulation over seeds, run in parallel and
//! merged in grid order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::delay::{simulate_delay, Policy, SimChannel, TrafficModel};
use super::topology::generate_topology;
use crate::imes::ImesConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    Omds,
    Mmds,
    Area,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Omds => "omds",
            SweepParameter::Mmds => "mmds",
            SweepParameter::Area => "area",
        }
    }
}

/// Fixed scenario the sweep varies one parameter of.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepBase {
    pub area: f64,
    pub n_omd: usize,
    pub n_mmd: usize,
    pub comm_range: f64,
    pub traffic: TrafficModel,
    pub channel: SimChannel,
    pub imes: ImesConfig,
}

impl Default for SweepBase {
    fn default() -> Self {
        Self {
            area: 100.0,
            n_omd: 40,
            n_mmd: 3,
            comm_range: 50.0,
            traffic: TrafficModel::default(),
            channel: SimChannel::default(),
            imes: ImesConfig::default(),
        }
    }
}

impl SweepBase {
    fn with(&self, parameter: SweepParameter, value: f64) -> Self {
        let mut b = *self;
        match parameter {
            SweepParameter::Omds => b.n_omd = value.round() as usize,
            SweepParameter::Mmds => b.n_mmd = value.round() as usize,
            SweepParameter::Area => b.area = value,
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub policies: Vec<Policy>,
    /// Seeds `base_seed .. base_seed + seed_count`; each seed fixes one topology.
    pub base_seed: u64,
    pub seed_count: usize,
}

/// Outcome of one seed in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub mean_delay: f64,
    pub p95_delay: f64,
    pub infinite: usize,
    pub error: Option<String>,
}

/// Aggregate over seeds for one (parameter value, policy) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub param_value: f64,
    pub policy: Policy,
    /// Seeds that produced a finite mean delay.
    pub seed_count: usize,
    pub mean_delay: f64,
    pub std_delay: f64,
    pub p95_delay: f64,
    pub infinite_count: usize,
    /// First failure among the cell's seeds, if any.
    pub error: Option<String>,
    pub runs: Vec<SeedRun>,
}

impl SweepCell {
    pub fn status(&self) -> &str {
        self.error.as_deref().unwrap_or("ok")
    }
}

fn run_one(base: &SweepBase, policy: Policy, seed: u64) -> SeedRun {
    let outcome = generate_topology(base.area, base.n_omd, base.n_mmd, base.comm_range, seed).and_then(|topo| {
        simulate_delay(&topo, policy, &base.traffic, &base.channel, &base.imes, seed)
    });
    match outcome {
        Ok(s) => SeedRun {
            seed,
            mean_delay: s.mean,
            p95_delay: s.p95,
            infinite: s.infinite,
            error: None,
        },
        Err(e) => SeedRun {
            seed,
            mean_delay: f64::NAN,
            p95_delay: f64::NAN,
            infinite: 0,
            error: Some(e.to_string()),
        },
    }
}

fn aggregate(param_value: f64, policy: Policy, runs: Vec<SeedRun>) -> SweepCell {
    let means: Vec<f64> = runs.iter().map(|r| r.mean_delay).filter(|m| m.is_finite()).collect();
    let p95s: Vec<f64> = runs.iter().map(|r| r.p95_delay).filter(|m| m.is_finite()).collect();
    let k = means.len();
    let mean = if k > 0 { means.iter().sum::<f64>() / k as f64 } else { f64::NAN };
    let std = if k > 1 {
        (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
    } else {
        0.0
    };
    let p95 = if p95s.is_empty() {
        f64::NAN
    } else {
        p95s.iter().sum::<f64>() / p95s.len() as f64
    };
    SweepCell {
        param_value,
        policy,
        seed_count: k,
        mean_delay: mean,
        std_delay: std,
        p95_delay: p95,
        infinite_count: runs.iter().map(|r| r.infinite).sum(),
        error: runs.iter().find_map(|r| r.error.clone()),
        runs,
    }
}

/// Runs every (value, policy, seed) combination on `jobs` worker threads and
/// returns one cell per (value, policy), values outermost.
pub fn delay_sweep(base: &SweepBase, spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepCell>> {
    if spec.values.is_empty() || spec.policies.is_empty() || spec.seed_count == 0 {
        return Err(Error::InvalidParameter(
            "sweep needs at least one value, one policy and one seed".into(),
        ));
    }
    let tasks: Vec<(usize, usize, u64)> = (0..spec.values.len())
        .flat_map(|v| {
            (0..spec.policies.len()).flat_map(move |p| (0..spec.seed_count as u64).map(move |s| (v, p, s)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let runs: Vec<SeedRun> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(v, p, s)| {
                let cell_base = base.with(spec.parameter, spec.values[v]);
                run_one(&cell_base, spec.policies[p], spec.base_seed + s)
            })
            .collect()
    });
    let per_cell = spec.seed_count;
    let mut cells = Vec::new();
    let mut chunks = runs.chunks(per_cell);
    for &value in &spec.values {
        for &policy in &spec.policies {
            let chunk = chunks.next().expect("one chunk per cell");
            cells.push(aggregate(value, policy, chunk.to_vec()));
        }
    }
    Ok(cells)
}

/// Inclusive arithmetic range parsed from `start:end:step`.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidParameter(format!("range `{spec}`: `{s}` is not a number")))
    };
    let (start, end, step) = match parts.as_slice() {
        [a] => (parse(a)?, parse(a)?, 1.0),
        [a, b] => (parse(a)?, parse(b)?, 1.0),
        [a, b, c] => (parse(a)?, parse(b)?, parse(c)?),
        _ => return Err(Error::InvalidParameter(format!("range `{spec}`: expected start:end:step"))),
    };
    if !(step > 0.0) || end < start {
        return Err(Error::InvalidParameter(format!("range `{spec}`: need step > 0 and end >= start")));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}
