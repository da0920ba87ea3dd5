//! Command-line front end. Exit codes: 0 success, 1 usage or configuration
//! error, 2 numerical non-convergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relay_game::commands::{self, write_csv, write_series};
use relay_game::config::{load_config, ScenarioConfig};
use relay_game::imes::TraceStatus;
use relay_game::sim::{parse_range, Policy, SweepParameter};
use relay_game::Error;

#[derive(Parser)]
#[command(name = "relay-game", version, about = "Bandwidth-relay allocation game experiments")]
struct Cli {
    /// Scenario file (TOML); defaults apply to absent keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replicator direction field and trajectories for two groups and two MMDs.
    PhasePlane {
        #[arg(long, default_value_t = 20)]
        density: usize,
        /// Trajectory start `pi1_a,pi1_b`; repeatable.
        #[arg(long = "start", value_parser = parse_point)]
        starts: Vec<[f64; 2]>,
        /// Record every this many Euler steps.
        #[arg(long, default_value_t = 10)]
        record_every: usize,
    },
    /// Best-response price curves and their intersection.
    BestResponse {
        /// Rival price grid `start:end:step`.
        #[arg(long, default_value = "0:5:0.05")]
        prices: String,
    },
    /// Runs the distributed protocol and writes its trace.
    Imes,
    /// Service-delay sweep of IMES against random selection.
    Delay {
        #[arg(long, conflicts_with_all = ["mmds", "area"])]
        omds: Option<String>,
        #[arg(long, conflicts_with = "area")]
        mmds: Option<String>,
        #[arg(long)]
        area: Option<String>,
        /// Topologies per cell; overrides `sim.seeds`.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Prints equilibrium prices, attachment and bandwidths.
    Nash,
    /// Supermodularity grid, contraction modulus and Lambert-W round trip.
    Check {
        #[arg(long, default_value_t = 50)]
        grid: usize,
    },
    /// Validates emitted CSV and plot files against their schemas.
    Validate { files: Vec<PathBuf> },
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [a, b] => Ok([
            a.trim().parse().map_err(|_| format!("bad number `{a}`"))?,
            b.trim().parse().map_err(|_| format!("bad number `{b}`"))?,
        ]),
        _ => Err(format!("expected `x,y`, got `{s}`")),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoConvergence { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> relay_game::Result<u8> {
    if let Command::Validate { files } = &cli.command {
        if files.is_empty() {
            return Err(Error::InvalidParameter("validate needs at least one file".into()));
        }
        for f in files {
            let (schema, rows) = commands::validate_output(f)?;
            println!("{}: {schema}, {rows} rows", f.display());
        }
        return Ok(0);
    }

    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    std::fs::create_dir_all(&cli.out)?;
    let out = |name: &str| -> PathBuf { Path::new(&cli.out).join(name) };

    match cli.command {
        Command::PhasePlane {
            density,
            starts,
            record_every,
        } => {
            let starts = if starts.is_empty() { vec![[0.56, 0.21]] } else { starts };
            let pp = commands::phase_plane(&cfg, density, &starts, record_every)?;
            write_csv(&out("phase_plane.csv"), &cfg, &pp.field)?;
            write_csv(&out("phase_trajectories.csv"), &cfg, &pp.trajectories)?;
            let mut all_rest = true;
            for (start, (end, rest)) in starts.iter().zip(&pp.endpoints) {
                println!(
                    "start ({:.3}, {:.3}) -> ({:.4}, {:.4}){}",
                    start[0],
                    start[1],
                    end[0],
                    end[1],
                    if *rest { "" } else { " [step budget exhausted]" }
                );
                all_rest &= rest;
            }
            Ok(if all_rest { 0 } else { 2 })
        }
        Command::BestResponse { prices } => {
            let grid = parse_range(&prices)?;
            let (curves, nash) = commands::best_response_curves(&cfg, &grid)?;
            write_csv(&out("best_response.csv"), &cfg, &curves)?;
            write_csv(&out("nash_point.csv"), &cfg, &commands::nash_point_table(&nash))?;
            println!("intersection: p1 = {:.4}, p2 = {:.4}", nash.prices[0], nash.prices[1]);
            Ok(0)
        }
        Command::Imes => {
            let trace = commands::imes(&cfg)?;
            write_csv(&out("imes_trace.csv"), &cfg, &commands::imes_table(&trace))?;
            for (i, (w, p)) in trace.final_strategies.iter().enumerate() {
                println!("mmd {i}: omega = {w:.4}, price = {p:.4}, attached = {}", trace.final_counts()[i]);
            }
            match trace.status {
                TraceStatus::Converged => {
                    println!("converged after {} rounds", trace.rounds.len());
                    Ok(0)
                }
                TraceStatus::BudgetExhausted => {
                    println!("budget exhausted after {} rounds", trace.rounds.len());
                    Ok(2)
                }
            }
        }
        Command::Delay {
            omds,
            mmds,
            area,
            seeds,
        } => {
            let (parameter, range) = match (omds, mmds, area) {
                (Some(r), _, _) => (SweepParameter::Omds, r),
                (_, Some(r), _) => (SweepParameter::Mmds, r),
                (_, _, Some(r)) => (SweepParameter::Area, r),
                _ => (SweepParameter::Omds, "40:120:20".to_string()),
            };
            if let Some(s) = seeds {
                cfg.sim.seeds = s;
            }
            cfg.validate()?;
            let values = parse_range(&range)?;
            let res = commands::delay(&cfg, parameter, values, vec![Policy::Imes, Policy::Rand], cli.jobs)?;
            write_csv(&out("delay_sweep.csv"), &cfg, &res.sweep)?;
            write_csv(&out("delay_seeds.csv"), &cfg, &res.seeds)?;
            write_csv(&out("topology.csv"), &cfg, &res.topology)?;
            for (stem, points) in &res.series {
                write_series(&out(&format!("{stem}.dat")), &cfg, stem, points)?;
            }
            for pair in res.cells.chunks(2) {
                if let [a, b] = pair {
                    println!(
                        "{} = {}: imes {:.3}, rand {:.3}, ratio {:.3}",
                        parameter.name(),
                        a.param_value,
                        a.mean_delay,
                        b.mean_delay,
                        a.mean_delay / b.mean_delay
                    );
                }
            }
            Ok(0)
        }
        Command::Nash => {
            let r = commands::nash(&cfg)?;
            println!("nash prices: p1 = {:.6}, p2 = {:.6} ({} iterations)", r.nash.prices[0], r.nash.prices[1], r.nash.iterations);
            println!("attachment at nash: n1 = {:.4}, n2 = {:.4}", r.attachment[0], r.attachment[1]);
            println!(
                "bandwidth equilibrium at configured prices: omega1 = {:.4}, omega2 = {:.4}",
                r.bandwidth.omega[0], r.bandwidth.omega[1]
            );
            Ok(0)
        }
        Command::Check { grid } => {
            let r = commands::check(&cfg, grid)?;
            let s = &r.supermodularity;
            println!("grid points: {}", s.points);
            println!("slope (z = e^(p-1)): [{:.6}, {:.6}]", s.plain.min, s.plain.max);
            for i in 0..2 {
                println!("slope mmd {} (weighted z): [{:.6}, {:.6}]", i + 1, s.weighted[i].min, s.weighted[i].max);
            }
            println!("max contraction modulus: {:.6}", s.lambda_max);
            println!("lambert-w worst relative residual over {} points: {:.3e}", r.lambert_samples, r.lambert_worst);
            println!("first-order residuals at nash: base e {:?}, base 2 {:?}", r.exp_foc, r.base2_foc);
            println!("{}", if r.passed() { "all checks passed" } else { "CHECK FAILED" });
            Ok(if r.passed() { 0 } else { 1 })
        }
        Command::Validate { .. } => unreachable!("handled above"),
    }
}
