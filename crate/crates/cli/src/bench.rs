//! Planner timing on fixed synthetic frames.

use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use pyramid_planner::geometry::{camera_to_body, CameraIntrinsics, Pose, Rotation, Vec3};
use pyramid_planner::planner::{plan_with, CandidateChecks, PlanOptions, PlannerConfig, StandardChecks};
use pyramid_planner::pyramid::CollisionVerdict;
use pyramid_planner::sim::{render_depth, Cylinder, ScenarioConfig, VehicleState, World};
use pyramid_planner::trajectory::{Feasibility, QuinticPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::output::{write_json, SCHEMA_VERSION};
use crate::BenchArgs;

pub const OBSTACLE_COUNTS: [usize; 3] = [0, 20, 50];
const WIDTH: usize = 640;
const HEIGHT: usize = 480;
const FOCAL: f64 = 386.0;
/// Throughput passes stop on the deadline, not on the budget.
const UNBOUNDED_BUDGET: usize = 10_000_000;

type Prim = QuinticPrimitive<f64>;

/// Accumulates wall-clock time per stage around another set of checks.
struct Timed<C> {
    inner: C,
    feasibility: Duration,
    velocity: Duration,
    collision: Duration,
}

impl<C> Timed<C> {
    fn new(inner: C) -> Self {
        Self { inner, feasibility: Duration::ZERO, velocity: Duration::ZERO, collision: Duration::ZERO }
    }
}

impl<C: CandidateChecks> CandidateChecks for Timed<C> {
    fn input_feasibility(&mut self, prim: &Prim) -> Feasibility {
        let t = Instant::now();
        let r = self.inner.input_feasibility(prim);
        self.feasibility += t.elapsed();
        r
    }

    fn velocity_admissible(&mut self, prim: &Prim) -> bool {
        let t = Instant::now();
        let r = self.inner.velocity_admissible(prim);
        self.velocity += t.elapsed();
        r
    }

    fn collision_free(&mut self, prim_cam: &Prim) -> CollisionVerdict {
        let t = Instant::now();
        let r = self.inner.collision_free(prim_cam);
        self.collision += t.elapsed();
        r
    }
}

#[derive(Debug, Serialize)]
struct Stage {
    calls: usize,
    total_ms: f64,
    mean_us: f64,
}

impl Stage {
    fn new(calls: usize, d: Duration) -> Self {
        let total_ms = d.as_secs_f64() * 1e3;
        Self { calls, total_ms, mean_us: if calls > 0 { total_ms * 1e3 / calls as f64 } else { 0.0 } }
    }
}

#[derive(Debug, Serialize)]
struct Stages {
    feasibility: Stage,
    velocity: Stage,
    collision: Stage,
}

#[derive(Debug, Serialize)]
struct Pass {
    candidates: usize,
    /// Planning loop only.
    cycle_ms: f64,
    /// Free-space model construction from the depth image.
    setup_ms: f64,
    higher_cost: usize,
    input_infeasible: usize,
    velocity_inadmissible: usize,
    in_collision: usize,
    collision_free: usize,
    pyramids: usize,
    stages: Stages,
}

#[derive(Debug, Serialize)]
struct Frame {
    obstacles: usize,
    /// Fraction of pixels closer than the maximum range.
    occupied_fraction: f64,
    budget_pass: Pass,
    deadline_passes: Vec<Pass>,
    /// Minimum over the deadline passes.
    candidates_per_deadline: usize,
    median_candidates_per_deadline: usize,
}

#[derive(Debug, Serialize)]
struct Report {
    schema_version: u32,
    width: usize,
    height: usize,
    fx: f64,
    budget: usize,
    deadline_ms: f64,
    reps: usize,
    frames: Vec<Frame>,
}

fn scene(obstacles: usize, seed: u64) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (obstacles as u64) << 32);
    let mut world = World::empty(0.0);
    while world.cylinders.len() < obstacles {
        let c = Cylinder {
            x: rng.gen_range(2.5..14.0),
            y: rng.gen_range(-7.0..7.0),
            radius: rng.gen_range(0.15..0.4),
            height: 12.0,
        };
        if c.x.hypot(c.y) - c.radius > 2.0 {
            world.cylinders.push(c);
        }
    }
    world
}

fn timed_pass(
    state: &VehicleState,
    goal: Vec3<f64>,
    image: &pyramid_planner::geometry::DepthImage,
    pose: &Pose<f64>,
    config: &PlannerConfig,
    seed: u64,
) -> Result<Pass> {
    let started = Instant::now();
    let checks = StandardChecks::new(image, config)?;
    let setup = started.elapsed();
    // A frame deadline also pays for building the free-space model.
    let mut config = config.clone();
    if let Some(ms) = config.deadline_ms {
        let left = ms - setup.as_secs_f64() * 1e3;
        if left > 0.0 {
            config.deadline_ms = Some(left);
        } else {
            config.budget = 0;
        }
    }
    let mut checks = Timed::new(checks);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = plan_with(
        state,
        goal,
        image.intrinsics(),
        pose,
        &config,
        &mut rng,
        f64::NEG_INFINITY,
        PlanOptions::default(),
        &mut checks,
    );
    let c = r.counters;
    let calls = r.stage_calls;
    Ok(Pass {
        candidates: r.sampled(),
        cycle_ms: r.cycle_time.as_secs_f64() * 1e3,
        setup_ms: setup.as_secs_f64() * 1e3,
        higher_cost: c.higher_cost,
        input_infeasible: c.input_infeasible,
        velocity_inadmissible: c.velocity_inadmissible,
        in_collision: c.in_collision,
        collision_free: c.collision_free,
        pyramids: checks.inner.model.pyramids().len(),
        stages: Stages {
            feasibility: Stage::new(calls.feasibility, checks.feasibility),
            velocity: Stage::new(calls.velocity, checks.velocity),
            collision: Stage::new(calls.collision, checks.collision),
        },
    })
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let scenario = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            ScenarioConfig::from_json(&text).with_context(|| format!("invalid config {}", p.display()))?
        }
        None => ScenarioConfig::default().normalized(),
    };
    anyhow::ensure!(args.reps > 0, "--reps must be at least 1");
    anyhow::ensure!(args.deadline_ms > 0.0, "--deadline-ms must be positive");
    let intr = CameraIntrinsics::new(FOCAL, FOCAL, WIDTH as f64 / 2.0, HEIGHT as f64 / 2.0, WIDTH, HEIGHT)?;
    let state = VehicleState {
        position: Vec3::new(0.0, 0.0, 2.0),
        velocity: Vec3::new(2.0, 0.0, 0.0),
        attitude: Rotation::identity(),
        ..Default::default()
    };
    let goal = Vec3::new(30.0, 0.0, 2.0);
    let pose = Pose::new(state.attitude * camera_to_body(), state.position);
    let budget_cfg = PlannerConfig { budget: args.budget, deadline_ms: None, ..scenario.planner.clone() };
    let deadline_cfg =
        PlannerConfig { budget: UNBOUNDED_BUDGET, deadline_ms: Some(args.deadline_ms), ..scenario.planner.clone() };

    let mut frames = Vec::new();
    for n in OBSTACLE_COUNTS {
        let world = scene(n, args.seed);
        let image = render_depth(&world, &pose, &intr, scenario.camera.max_range)?;
        let occupied = image.depths().iter().filter(|&&d| d < image.max_range()).count();
        let budget_pass = timed_pass(&state, goal, &image, &pose, &budget_cfg, args.seed)?;
        let deadline_passes = (0..args.reps as u64)
            .map(|k| timed_pass(&state, goal, &image, &pose, &deadline_cfg, args.seed + 1 + k))
            .collect::<Result<Vec<_>>>()?;
        let mut counts: Vec<usize> = deadline_passes.iter().map(|p| p.candidates).collect();
        counts.sort_unstable();
        let frame = Frame {
            obstacles: n,
            occupied_fraction: occupied as f64 / (WIDTH * HEIGHT) as f64,
            candidates_per_deadline: counts[0],
            median_candidates_per_deadline: counts[counts.len() / 2],
            budget_pass,
            deadline_passes,
        };
        println!(
            "{:>2} obstacles: {} candidates in {:.2} ms; {} per {} ms frame (median {})",
            n,
            frame.budget_pass.candidates,
            frame.budget_pass.cycle_ms,
            frame.candidates_per_deadline,
            args.deadline_ms,
            frame.median_candidates_per_deadline
        );
        frames.push(frame);
    }

    let report = Report {
        schema_version: SCHEMA_VERSION,
        width: WIDTH,
        height: HEIGHT,
        fx: FOCAL,
        budget: args.budget,
        deadline_ms: args.deadline_ms,
        reps: args.reps,
        frames,
    };
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_json(&Path::new(&args.out).join("bench.json"), &report)?;
    Ok(0)
}
