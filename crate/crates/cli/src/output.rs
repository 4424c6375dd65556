//! CSV and JSON writers. Column sets are documented in `docs/outputs.md`;
//! bump [`SCHEMA_VERSION`] whenever one of them changes.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use pyramid_planner::pyramid::Pyramid;
use pyramid_planner::sim::{MetricsLog, Outcome, ScenarioConfig, Summary};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;
pub const CONFIG_FILE: &str = "config.json";
pub const PYRAMIDS_FILE: &str = "pyramids.jsonl";
pub const CSV_FILES: [&str; 5] = ["trajectory.csv", "velocity.csv", "planner.csv", "thrust.csv", "world.csv"];

#[derive(Serialize)]
struct TrajectoryRow {
    t: f64,
    x: f64,
    y: f64,
    z: f64,
    clearance: f64,
}

#[derive(Serialize)]
struct VelocityRow {
    t: f64,
    vx: f64,
    vy: f64,
    vz: f64,
    speed: f64,
    v_max: f64,
}

#[derive(Serialize)]
struct PlannerRow {
    t: f64,
    sampled: usize,
    better_than_current: usize,
    higher_cost: usize,
    input_infeasible: usize,
    velocity_inadmissible: usize,
    in_collision: usize,
    collision_free: usize,
    pyramids: usize,
    replanned: u8,
    best_utility: Option<f64>,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    schema_version: u32,
    #[serde(flatten)]
    summary: &'a Summary,
    exit_code: i32,
    cause: &'static str,
}

pub fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Arrival => "arrival",
        Outcome::Collision => "collision",
        Outcome::Timeout => "timeout",
        Outcome::Completed => "completed",
    }
}

fn cause(o: Outcome) -> &'static str {
    match o {
        Outcome::Arrival => "reached the goal radius",
        Outcome::Collision => "clearance fell below the collision threshold",
        Outcome::Timeout => "goal not reached before the timeout",
        Outcome::Completed => "hover run reached its duration",
    }
}

pub const TRAJECTORY_HEADER: &[&str] = &["t", "x", "y", "z", "clearance"];
pub const VELOCITY_HEADER: &[&str] = &["t", "vx", "vy", "vz", "speed", "v_max"];
pub const PLANNER_HEADER: &[&str] = &[
    "t",
    "sampled",
    "better_than_current",
    "higher_cost",
    "input_infeasible",
    "velocity_inadmissible",
    "in_collision",
    "collision_free",
    "pyramids",
    "replanned",
    "best_utility",
];
pub const THRUST_HEADER: &[&str] = &["t", "voltage", "k_v", "k_m", "f_cmd", "f_hat", "command"];
pub const WORLD_HEADER: &[&str] = &["x", "y", "radius", "height"];

/// Rows are serialized positionally, so each row type must list its fields
/// in header order.
fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes the CSV logs, `summary.json` and the config snapshot of one run.
pub fn write_run(dir: &Path, cfg: &ScenarioConfig, log: &MetricsLog) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let v_max = cfg.planner.v_max;
    write_csv(
        &dir.join("trajectory.csv"),
        TRAJECTORY_HEADER,
        log.samples.iter().map(|s| TrajectoryRow { t: s.t, x: s.x, y: s.y, z: s.z, clearance: s.clearance }),
    )?;
    write_csv(
        &dir.join("velocity.csv"),
        VELOCITY_HEADER,
        log.samples.iter().map(|s| VelocityRow { t: s.t, vx: s.vx, vy: s.vy, vz: s.vz, speed: s.speed, v_max }),
    )?;
    write_csv(
        &dir.join("planner.csv"),
        PLANNER_HEADER,
        log.cycles.iter().map(|c| PlannerRow {
            t: c.t,
            sampled: c.sampled,
            better_than_current: c.better_than_current,
            higher_cost: c.higher_cost,
            input_infeasible: c.input_infeasible,
            velocity_inadmissible: c.velocity_inadmissible,
            in_collision: c.in_collision,
            collision_free: c.collision_free,
            pyramids: c.pyramids,
            replanned: c.replanned as u8,
            best_utility: c.best_utility,
        }),
    )?;
    write_csv(&dir.join("thrust.csv"), THRUST_HEADER, log.thrust.iter())?;
    write_csv(&dir.join("world.csv"), WORLD_HEADER, log.world.cylinders.iter())?;
    let s = &log.summary;
    write_json(
        &dir.join("summary.json"),
        &SummaryFile {
            schema_version: SCHEMA_VERSION,
            summary: s,
            exit_code: s.outcome.exit_code(),
            cause: cause(s.outcome),
        },
    )?;
    write_json(&dir.join(CONFIG_FILE), cfg)
}

#[derive(Serialize)]
struct PyramidLine<'a> {
    cycle: usize,
    t: f64,
    #[serde(flatten)]
    pyramid: &'a Pyramid,
}

/// One JSON object per pyramid, tagged with its planning cycle.
pub fn write_pyramids(path: &Path, log: &MetricsLog) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = std::io::BufWriter::new(file);
    for c in &log.pyramids {
        for pyramid in &c.pyramids {
            serde_json::to_writer(&mut out, &PyramidLine { cycle: c.cycle, t: c.time, pyramid })?;
            out.write_all(b"\n")?;
        }
    }
    out.flush().with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Serialize)]
pub struct Stats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Stats {
    fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        Some(Self {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Contents of `aggregate.json`.
#[derive(Debug, Serialize)]
pub struct Aggregate {
    pub schema_version: u32,
    pub name: String,
    pub runs: usize,
    pub arrivals: usize,
    pub collisions: usize,
    pub timeouts: usize,
    pub arrival_rate: f64,
    /// Over the per-run minimum clearances.
    pub clearance: Stats,
    /// Over the per-run maximum per-axis speeds.
    pub max_axis_speed: Stats,
    /// Over arriving runs only.
    pub mission_time: Option<Stats>,
    pub seeds: Vec<Summary>,
}

impl Aggregate {
    /// `summaries` must be non-empty.
    pub fn new(name: &str, summaries: Vec<Summary>) -> Self {
        let count = |o: Outcome| summaries.iter().filter(|s| s.outcome == o).count();
        let arrivals = count(Outcome::Arrival);
        Self {
            schema_version: SCHEMA_VERSION,
            name: name.to_string(),
            runs: summaries.len(),
            arrivals,
            collisions: count(Outcome::Collision),
            timeouts: count(Outcome::Timeout),
            arrival_rate: arrivals as f64 / summaries.len() as f64,
            clearance: Stats::of(summaries.iter().map(|s| s.min_clearance)).expect("non-empty sweep"),
            max_axis_speed: Stats::of(summaries.iter().map(|s| s.max_axis_speed)).expect("non-empty sweep"),
            mission_time: Stats::of(summaries.iter().filter(|s| s.arrival).map(|s| s.mission_time)),
            seeds: summaries,
        }
    }
}

#[cfg(test)]
mod tests {
    use pyramid_planner::sim::{Cylinder, ThrustRecord};

    use super::*;

    fn serde_header<T: Serialize>(row: T) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(row).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        text.lines().next().unwrap().to_string()
    }

    #[test]
    fn headers_match_row_fields() {
        let z = 0.0;
        let cases = [
            (TRAJECTORY_HEADER, serde_header(TrajectoryRow { t: z, x: z, y: z, z, clearance: z })),
            (VELOCITY_HEADER, serde_header(VelocityRow { t: z, vx: z, vy: z, vz: z, speed: z, v_max: z })),
            (
                PLANNER_HEADER,
                serde_header(PlannerRow {
                    t: z,
                    sampled: 0,
                    better_than_current: 0,
                    higher_cost: 0,
                    input_infeasible: 0,
                    velocity_inadmissible: 0,
                    in_collision: 0,
                    collision_free: 0,
                    pyramids: 0,
                    replanned: 0,
                    best_utility: None,
                }),
            ),
            (
                THRUST_HEADER,
                serde_header(ThrustRecord { t: z, voltage: z, k_v: z, k_m: z, f_cmd: z, f_hat: z, command: z }),
            ),
            (WORLD_HEADER, serde_header(Cylinder { x: z, y: z, radius: z, height: z })),
        ];
        for (header, derived) in cases {
            assert_eq!(header.join(","), derived);
        }
    }
}
