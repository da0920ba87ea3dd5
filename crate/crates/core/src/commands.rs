//! Experiment drivers behind the `relay-game` binary. Each returns tables
//! that [`write_csv`] stores with the resolved scenario echoed as `#`
//! comment lines, so every output file records how it was produced.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::config::ScenarioConfig;
use crate::imes::{run_imes, SimTrace};
use crate::lambert::lambert_w;
use crate::mmd_game::{
    bandwidth_equilibrium, base2_foc_residual, exp_foc_residual, nash_prices, supermodularity_check,
    BandwidthEquilibrium, NashPrices, SupermodularityReport,
};
use crate::omd_game::{evolve, replicator_rates, EvolveOptions, PopulationState, UtilitySnapshot};
use crate::sim::{delay_sweep, generate_topology, Policy, SweepCell, SweepParameter, SweepSpec};
use crate::{Error, Result};

/// A header plus string rows, ready for CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// The resolved scenario as comment lines.
pub fn config_comment(cfg: &ScenarioConfig) -> String {
    let mut out = String::from("# relay-game resolved scenario\n");
    for line in cfg.to_toml_string().lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, cfg: &ScenarioConfig, table: &Table) -> Result<()> {
    let mut file = File::create(path)?;
    file.write_all(config_comment(cfg).as_bytes())?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column `x y` series for plotting tools.
pub fn write_series(path: &Path, cfg: &ScenarioConfig, label: &str, points: &[(f64, f64)]) -> Result<()> {
    let mut file = File::create(path)?;
    file.write_all(config_comment(cfg).as_bytes())?;
    writeln!(file, "# {label}")?;
    for (x, y) in points {
        writeln!(file, "{x} {y}")?;
    }
    Ok(())
}

pub struct PhasePlane {
    /// `pi1_a, pi1_b, dpi1_a, dpi1_b` on the grid.
    pub field: Table,
    /// `start_id, t, pi1_a, pi1_b` samples of every trajectory.
    pub trajectories: Table,
    /// Final `(pi1_a, pi1_b)` and whether the dynamics came to rest.
    pub endpoints: Vec<([f64; 2], bool)>,
}

/// Direction field of the undelayed replicator dynamics on a `density x
/// density` grid inside the unit square, plus delayed trajectories from `starts`.
pub fn phase_plane(cfg: &ScenarioConfig, density: usize, starts: &[[f64; 2]], record_every: usize) -> Result<PhasePlane> {
    if cfg.group.len() != 2 || cfg.mmd.len() != 2 {
        return Err(Error::Shape(format!(
            "phase plane needs 2 groups and 2 mmds, found {} and {}",
            cfg.group.len(),
            cfg.mmd.len()
        )));
    }
    if density == 0 {
        return Err(Error::InvalidParameter("density >= 1".into()));
    }
    let econ = cfg.economics()?;
    let cap = cfg.capacity_params();
    let sizes = cfg.group_sizes();
    let mut field = Table::new(&["pi1_a", "pi1_b", "dpi1_a", "dpi1_b"]);
    for i in 1..=density {
        for j in 1..=density {
            let s = [i as f64 / (density + 1) as f64, j as f64 / (density + 1) as f64];
            let d = direction(&PopulationState::two_mmd(&s, sizes.clone())?, &econ, &cap, cfg.evolution.delta);
            field.push(vec![num(s[0]), num(s[1]), num(d[0]), num(d[1])]);
        }
    }

    let mut trajectories = Table::new(&["start_id", "t", "pi1_a", "pi1_b"]);
    let mut endpoints = Vec::new();
    let opts = EvolveOptions {
        record_every: Some(record_every.max(1)),
        ..cfg.evolve_options()
    };
    for (k, start) in starts.iter().enumerate() {
        let s0 = PopulationState::two_mmd(start, sizes.clone())?;
        let ev = evolve(&s0, &econ, &cap, &cfg.evo_params(), &opts)?;
        for (t, st) in &ev.trajectory {
            trajectories.push(vec![k.to_string(), num(*t), num(st.fraction(0, 0)), num(st.fraction(1, 0))]);
        }
        endpoints.push(([ev.state.fraction(0, 0), ev.state.fraction(1, 0)], ev.converged));
    }
    Ok(PhasePlane {
        field,
        trajectories,
        endpoints,
    })
}

/// `(d pi_1^a / dt, d pi_1^b / dt)` at a two-group, two-MMD state.
pub fn direction(
    state: &PopulationState,
    econ: &crate::omd_game::GroupEconomics,
    cap: &crate::channel::CapacityParams,
    delta: f64,
) -> [f64; 2] {
    let rates = replicator_rates(state, &UtilitySnapshot::evaluate(state, econ, cap), delta);
    [rates[0][0], rates[1][0]]
}

/// Both best-response curves over `grid` and the Nash point they cross at.
pub fn best_response_curves(cfg: &ScenarioConfig, grid: &[f64]) -> Result<(Table, NashPrices)> {
    let game = cfg.pricing_game()?;
    let mut t = Table::new(&["p_other", "br1", "br2"]);
    for &p in grid {
        let b1 = game.best_response(0, p)?.price_star;
        let b2 = game.best_response(1, p)?.price_star;
        t.push(vec![num(p), num(b1), num(b2)]);
    }
    Ok((t, nash_prices(&game)?))
}

pub fn nash_point_table(nash: &NashPrices) -> Table {
    let mut t = Table::new(&["p1", "p2", "iterations"]);
    t.push(vec![num(nash.prices[0]), num(nash.prices[1]), nash.iterations.to_string()]);
    t
}

pub fn imes(cfg: &ScenarioConfig) -> Result<SimTrace> {
    run_imes(&cfg.imes_config(), &cfg.imes_scenario()?)
}

pub fn imes_table(trace: &SimTrace) -> Table {
    Table {
        header: trace.csv_header(),
        rows: trace.csv_rows(),
    }
}

pub struct DelayOutput {
    pub cells: Vec<SweepCell>,
    /// `param_value, policy, seed_count, mean_delay, std_delay, p95_delay, infinite_count, status`.
    pub sweep: Table,
    /// One row per (cell, seed) for replay.
    pub seeds: Table,
    /// `(file stem, points)` per policy and metric.
    pub series: Vec<(String, Vec<(f64, f64)>)>,
    /// `node_id, kind, x, y` of the first topology of the sweep.
    pub topology: Table,
}

pub fn delay(
    cfg: &ScenarioConfig,
    parameter: SweepParameter,
    values: Vec<f64>,
    policies: Vec<Policy>,
    jobs: usize,
) -> Result<DelayOutput> {
    let base = cfg.sweep_base();
    let spec = SweepSpec {
        parameter,
        values,
        policies,
        base_seed: cfg.seed,
        seed_count: cfg.sim.seeds,
    };
    let cells = delay_sweep(&base, &spec, jobs)?;

    let mut sweep = Table::new(&[
        "param_value",
        "policy",
        "seed_count",
        "mean_delay",
        "std_delay",
        "p95_delay",
        "infinite_count",
        "status",
    ]);
    let mut seeds = Table::new(&["param_value", "policy", "seed", "mean_delay", "p95_delay", "infinite", "status"]);
    for c in &cells {
        sweep.push(vec![
            num(c.param_value),
            c.policy.name().into(),
            c.seed_count.to_string(),
            num(c.mean_delay),
            num(c.std_delay),
            num(c.p95_delay),
            c.infinite_count.to_string(),
            c.status().into(),
        ]);
        for r in &c.runs {
            seeds.push(vec![
                num(c.param_value),
                c.policy.name().into(),
                r.seed.to_string(),
                num(r.mean_delay),
                num(r.p95_delay),
                r.infinite.to_string(),
                r.error.clone().unwrap_or_else(|| "ok".into()),
            ]);
        }
    }

    let mut series = Vec::new();
    for policy in &spec.policies {
        let pick = |f: fn(&SweepCell) -> f64| -> Vec<(f64, f64)> {
            cells
                .iter()
                .filter(|c| c.policy == *policy)
                .map(|c| (c.param_value, f(c)))
                .collect()
        };
        let stem = format!("delay_{}_{}", parameter.name(), policy.name());
        series.push((format!("{stem}_mean"), pick(|c| c.mean_delay)));
        series.push((format!("{stem}_p95"), pick(|c| c.p95_delay)));
    }

    let first = {
        let mut b = base;
        match parameter {
            SweepParameter::Omds => b.n_omd = spec.values[0].round() as usize,
            SweepParameter::Mmds => b.n_mmd = spec.values[0].round() as usize,
            SweepParameter::Area => b.area = spec.values[0],
        }
        b
    };
    let mut topology = Table::new(&["node_id", "kind", "x", "y"]);
    if let Ok(topo) = generate_topology(first.area, first.n_omd, first.n_mmd, first.comm_range, spec.base_seed) {
        for (id, kind, x, y) in topo.dump_rows() {
            topology.push(vec![id.to_string(), kind.into(), num(x), num(y)]);
        }
    }
    Ok(DelayOutput {
        cells,
        sweep,
        seeds,
        series,
        topology,
    })
}

pub struct NashReport {
    pub nash: NashPrices,
    /// Equilibrium attachment at the Nash prices.
    pub attachment: [f64; 2],
    /// Bandwidth equilibrium at the configured prices.
    pub bandwidth: BandwidthEquilibrium,
}

pub fn nash(cfg: &ScenarioConfig) -> Result<NashReport> {
    let game = cfg.pricing_game()?;
    let nash = nash_prices(&game)?;
    let mmds = cfg.mmd_params();
    let bw_game = cfg.bandwidth_game([mmds[0].price, mmds[1].price])?;
    let bandwidth = bandwidth_equilibrium(&bw_game, [mmds[0].omega, mmds[1].omega], 1e-9, 10_000)?;
    Ok(NashReport {
        attachment: game.attachment(nash.prices),
        nash,
        bandwidth,
    })
}

pub struct CheckReport {
    pub supermodularity: SupermodularityReport,
    /// Largest `|W(z) e^W(z) - z| / max(1, |z|)` over the sample.
    pub lambert_worst: f64,
    pub lambert_samples: usize,
    /// Base-e first-order residual at the Nash point, per MMD.
    pub exp_foc: [f64; 2],
    /// Base-2 first-order residual at the same point, per MMD.
    pub base2_foc: [f64; 2],
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.supermodularity.holds && self.lambert_worst <= 1e-12 && self.exp_foc.iter().all(|r| r.abs() <= 1e-6)
    }
}

/// Points of `[-1/e + 1e-6, 1e6]`, geometrically spaced away from the branch point.
pub fn lambert_sample(count: usize) -> Vec<f64> {
    let lo = -1.0 / std::f64::consts::E + 1e-6;
    let half = count / 2;
    let neg = (0..half).map(|k| lo + (0.0 - lo) * k as f64 / half as f64);
    let pos_n = count - half;
    let pos = (0..pos_n).map(move |k| 10f64.powf(-12.0 + 18.0 * k as f64 / (pos_n - 1).max(1) as f64));
    neg.chain(pos).collect()
}

pub fn check(cfg: &ScenarioConfig, grid_points: usize) -> Result<CheckReport> {
    let game = cfg.pricing_game()?;
    let grid: Vec<f64> = (1..=grid_points).map(|k| 5.0 * k as f64 / grid_points as f64).collect();
    let supermodularity = supermodularity_check(&grid, &grid, &game)?;
    let sample = lambert_sample(10_000);
    let mut worst = 0.0_f64;
    for &z in &sample {
        let w = lambert_w(z)?;
        worst = worst.max((w * w.exp() - z).abs() / z.abs().max(1.0));
    }
    let nash = nash_prices(&game)?;
    let p = nash.prices;
    Ok(CheckReport {
        supermodularity,
        lambert_worst: worst,
        lambert_samples: sample.len(),
        exp_foc: [exp_foc_residual(p[0], p[1], game.ratio(0)), exp_foc_residual(p[1], p[0], game.ratio(1))],
        base2_foc: [
            base2_foc_residual(p[0], p[1], game.ratio(0)),
            base2_foc_residual(p[1], p[0], game.ratio(1)),
        ],
    })
}

/// Column layout of one output kind; `true` marks numeric columns.
struct Schema {
    name: &'static str,
    columns: &'static [(&'static str, bool)],
}

const SCHEMAS: &[Schema] = &[
    Schema {
        name: "phase-plane field",
        columns: &[("pi1_a", true), ("pi1_b", true), ("dpi1_a", true), ("dpi1_b", true)],
    },
    Schema {
        name: "phase-plane trajectories",
        columns: &[("start_id", true), ("t", true), ("pi1_a", true), ("pi1_b", true)],
    },
    Schema {
        name: "best-response curves",
        columns: &[("p_other", true), ("br1", true), ("br2", true)],
    },
    Schema {
        name: "nash point",
        columns: &[("p1", true), ("p2", true), ("iterations", true)],
    },
    Schema {
        name: "delay sweep",
        columns: &[
            ("param_value", true),
            ("policy", false),
            ("seed_count", true),
            ("mean_delay", true),
            ("std_delay", true),
            ("p95_delay", true),
            ("infinite_count", true),
            ("status", false),
        ],
    },
    Schema {
        name: "delay seeds",
        columns: &[
            ("param_value", true),
            ("policy", false),
            ("seed", true),
            ("mean_delay", true),
            ("p95_delay", true),
            ("infinite", true),
            ("status", false),
        ],
    },
    Schema {
        name: "topology",
        columns: &[("node_id", true), ("kind", false), ("x", true), ("y", true)],
    },
];

/// Checks an emitted file against the known layouts. CSV files must match a
/// schema header (IMES traces: `round, mmd_id, omega, price, utility, n_*`);
/// `.dat` files must hold two numeric columns. Returns the schema name and
/// the number of data rows.
pub fn validate_output(path: &Path) -> Result<(String, usize)> {
    let schema_err = |message: String| Error::Schema {
        file: path.display().to_string(),
        message,
    };
    if path.extension().is_some_and(|e| e == "dat") {
        let mut rows = 0;
        for (k, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 || fields.iter().any(|f| f.parse::<f64>().is_err()) {
                return Err(schema_err(format!("line {}: expected two numbers", k + 1)));
            }
            rows += 1;
        }
        return Ok(("plot series".into(), rows));
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(File::open(path)?);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let (name, numeric): (String, Vec<bool>) = if let Some(s) = SCHEMAS
        .iter()
        .find(|s| s.columns.len() == header.len() && s.columns.iter().zip(&header).all(|(c, h)| c.0 == h))
    {
        (s.name.into(), s.columns.iter().map(|c| c.1).collect())
    } else if header.len() >= 5
        && header[..5] == ["round", "mmd_id", "omega", "price", "utility"]
        && header[5..].iter().all(|h| h.starts_with("n_"))
    {
        ("imes trace".into(), vec![true; header.len()])
    } else {
        return Err(schema_err(format!("unknown header {}", header.join(","))));
    };
    let mut rows = 0;
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != numeric.len() {
            return Err(schema_err(format!("row {}: {} fields, expected {}", k + 1, record.len(), numeric.len())));
        }
        for (field, &is_num) in record.iter().zip(&numeric) {
            if is_num && field.parse::<f64>().is_err() {
                return Err(schema_err(format!("row {}: `{field}` is not a number", k + 1)));
            }
        }
        rows += 1;
    }
    Ok((name, rows))
}
