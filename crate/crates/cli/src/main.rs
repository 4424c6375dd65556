//! `pyramid-planner`: scenario runs, seed sweeps, planner benchmarks and
//! replays.
//!
//! Exit codes: 0 arrival (or a completed hover run), 1 configuration or I/O
//! error, 2 collision, 3 timeout, 4 replay mismatch.

mod bench;
mod output;

use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use pyramid_planner::sim::{run_scenario, RunOptions, ScenarioConfig, Summary};
use rayon::prelude::*;

#[derive(Debug, Parser)]
#[command(name = "pyramid-planner", version, about = "Depth-image pyramid planner: simulation and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fly one scenario and write its CSV logs and summary.
    Run(RunArgs),
    /// Fly a range of seeds concurrently and aggregate the results.
    Sweep(SweepArgs),
    /// Time the planner on fixed synthetic 640x480 frames.
    Bench(BenchArgs),
    /// Re-run a logged run from its config snapshot and compare the CSVs.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct Overrides {
    /// Candidates per planning cycle.
    #[arg(long)]
    budget: Option<usize>,
    /// Wall-clock limit per planning cycle, ms. Makes runs timing dependent.
    #[arg(long = "deadline-ms")]
    deadline_ms: Option<f64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Defaults to the seed stored in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write every cycle's pyramids to `pyramids.jsonl`.
    #[arg(long)]
    dump_pyramids: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// `A..B` (exclusive) or `A..=B` (inclusive).
    #[arg(long, value_parser = parse_seed_range)]
    seeds: Range<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Concurrent runs; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Scenario whose planner section is benchmarked; defaults apply otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for obstacle placement and candidate sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Candidates in the fixed-budget pass.
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    /// Frame budget of the throughput pass, ms.
    #[arg(long = "deadline-ms", default_value_t = 33.0)]
    deadline_ms: f64,
    /// Repetitions per frame.
    #[arg(long, default_value_t = 5)]
    reps: usize,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    /// Directory written by `run`.
    #[arg(long)]
    out: PathBuf,
}

fn parse_seed_range(s: &str) -> std::result::Result<Range<u64>, String> {
    let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b, false)
    } else {
        let n: u64 = s.trim().parse().map_err(|e| format!("bad seed {s:?}: {e}"))?;
        return Ok(n..n + 1);
    };
    let parse = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("bad seed bound {x:?}: {e}"));
    let (a, b) = (parse(a)?, parse(b)?);
    Ok(a..if inclusive { b + 1 } else { b })
}

fn init_logging() {
    let level = std::env::var("PLANNER_LOG_LEVEL").unwrap_or_else(|_| "error".into());
    let level = match level.to_ascii_lowercase().as_str() {
        "error" | "info" | "debug" => level,
        other => {
            eprintln!("ignoring PLANNER_LOG_LEVEL={other:?}; expected error, info or debug");
            "error".into()
        }
    };
    env_logger::Builder::new().parse_filters(&level).format_timestamp(None).init();
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut cfg = ScenarioConfig::from_json(&text).with_context(|| format!("invalid config {}", path.display()))?;
    if let Some(b) = overrides.budget {
        cfg.planner.budget = b;
    }
    if overrides.deadline_ms.is_some() {
        cfg.planner.deadline_ms = overrides.deadline_ms;
    }
    cfg.validate().context("invalid override")?;
    Ok(cfg)
}

/// Runs one seed and writes its outputs into `dir`.
fn run_into(cfg: &ScenarioConfig, seed: u64, dir: &Path, options: RunOptions) -> Result<Summary> {
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    let log = run_scenario(&cfg, seed, options)?;
    output::write_run(dir, &cfg, &log)?;
    if options.record_pyramids {
        output::write_pyramids(&dir.join(output::PYRAMIDS_FILE), &log)?;
    }
    let s = &log.summary;
    info!(
        "{} seed {}: {:?} after {:.2} s, min clearance {:.3} m, max axis speed {:.3} m/s",
        s.name, seed, s.outcome, s.mission_time, s.min_clearance, s.max_axis_speed
    );
    Ok(log.summary)
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    let cfg = load_config(&args.config, &args.overrides)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let options = RunOptions { record_pyramids: args.dump_pyramids, ..Default::default() };
    let summary = run_into(&cfg, seed, &args.out, options)?;
    println!(
        "{}: {} in {:.2} s (min clearance {:.3} m, max axis speed {:.3} m/s)",
        summary.name,
        output::outcome_name(summary.outcome),
        summary.mission_time,
        summary.min_clearance,
        summary.max_axis_speed
    );
    Ok(summary.outcome.exit_code())
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let cfg = load_config(&args.config, &args.overrides)?;
    if args.seeds.is_empty() {
        bail!("empty seed range {:?}", args.seeds);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().context("building the worker pool")?;
    let seeds: Vec<u64> = args.seeds.clone().collect();
    let summaries = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| run_into(&cfg, seed, &args.out.join(format!("seed-{seed}")), RunOptions::default()))
            .collect::<Result<Vec<_>>>()
    })?;
    let agg = output::Aggregate::new(&cfg.name, summaries);
    output::write_json(&args.out.join("aggregate.json"), &agg)?;
    println!(
        "{}: {}/{} arrivals, {} collisions, {} timeouts, min clearance {:.3} m, max axis speed {:.3} m/s",
        agg.name, agg.arrivals, agg.runs, agg.collisions, agg.timeouts, agg.clearance.min, agg.max_axis_speed.max
    );
    Ok(0)
}

fn cmd_replay(args: &ReplayArgs) -> Result<i32> {
    let snapshot = args.out.join(output::CONFIG_FILE);
    let cfg = load_config(&snapshot, &Overrides { budget: None, deadline_ms: None })?;
    if cfg.planner.deadline_ms.is_some() {
        log::warn!("the logged run used a planning deadline; replay may diverge");
    }
    let dir = args.out.join("replay");
    run_into(&cfg, cfg.seed, &dir, RunOptions::default())?;
    let mut mismatched = Vec::new();
    for name in output::CSV_FILES {
        let a = std::fs::read(args.out.join(name)).with_context(|| format!("reading logged {name}"))?;
        let b = std::fs::read(dir.join(name))?;
        if a != b {
            mismatched.push(name);
        }
    }
    if mismatched.is_empty() {
        println!("replay of seed {} matches ({} files)", cfg.seed, output::CSV_FILES.len());
        Ok(0)
    } else {
        println!("replay of seed {} differs in {}", cfg.seed, mismatched.join(", "));
        Ok(4)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bench(a) => bench::cmd_bench(a),
        Command::Replay(a) => cmd_replay(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
