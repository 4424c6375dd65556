use serde::{Deserialize, Serialize};

use super::{ScenarioConfig, VehicleState, World};
use crate::geometry::Pose;
use crate::planner::PlanResult;
use crate::pyramid::Pyramid;
use crate::sim::StepReport;
use crate::thrust::ThrustModelState;
use crate::trajectory::QuinticPrimitive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Arrival,
    Collision,
    Timeout,
    /// Hover runs end here when the timeout is reached.
    Completed,
}

impl Outcome {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Arrival | Outcome::Completed => 0,
            Outcome::Collision => 2,
            Outcome::Timeout => 3,
        }
    }
}

/// One control-rate sample of the flown path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub speed: f64,
    pub clearance: f64,
}

/// Planner statistics for one depth frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub t: f64,
    pub sampled: usize,
    pub better_than_current: usize,
    pub higher_cost: usize,
    pub input_infeasible: usize,
    pub velocity_inadmissible: usize,
    pub in_collision: usize,
    pub collision_free: usize,
    pub best_utility: Option<f64>,
    pub pyramids: usize,
    pub replanned: bool,
}

/// Adaptation trace at the control rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrustRecord {
    pub t: f64,
    pub voltage: f64,
    pub k_v: f64,
    pub k_m: f64,
    /// Commanded collective thrust, N.
    pub f_cmd: f64,
    /// Filtered per-motor thrust estimate, N.
    pub f_hat: f64,
    pub command: f64,
}

/// A primitive the planner declared collision-free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedPrimitive {
    pub cycle: usize,
    pub time: f64,
    /// Camera pose of the depth frame the check used.
    pub camera_pose: Pose<f64>,
    pub primitive: QuinticPrimitive<f64>,
}

/// Pyramids one planning cycle built, in its camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclePyramids {
    pub cycle: usize,
    pub time: f64,
    pub pyramids: Vec<Pyramid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub arrival: bool,
    /// Time at which the run ended, s.
    pub mission_time: f64,
    pub min_clearance: f64,
    pub max_axis_speed: f64,
    pub max_speed: f64,
    pub v_max: f64,
    pub path_length: f64,
    pub trees: usize,
    pub cycles: usize,
    pub replans: usize,
    pub mean_sampled: f64,
    pub mean_cycle_ms: f64,
    pub max_cycle_ms: f64,
    pub final_k_v: f64,
    pub final_k_m: f64,
}

/// Full record of a run.
#[derive(Debug, Clone)]
pub struct MetricsLog {
    pub world: World,
    pub samples: Vec<Sample>,
    pub cycles: Vec<CycleRecord>,
    /// Wall-clock planner time per cycle, s; not part of the CSV outputs.
    pub cycle_times: Vec<f64>,
    pub thrust: Vec<ThrustRecord>,
    pub certified: Vec<CertifiedPrimitive>,
    pub pyramids: Vec<CyclePyramids>,
    pub summary: Summary,
}

impl MetricsLog {
    pub(super) fn new(seed: u64, config: &ScenarioConfig, world: World) -> Self {
        let summary = Summary {
            name: config.name.clone(),
            seed,
            outcome: super::Outcome::Timeout,
            arrival: false,
            mission_time: 0.0,
            min_clearance: f64::INFINITY,
            max_axis_speed: 0.0,
            max_speed: 0.0,
            v_max: config.planner.v_max,
            path_length: 0.0,
            trees: world.cylinders.len(),
            cycles: 0,
            replans: 0,
            mean_sampled: 0.0,
            mean_cycle_ms: 0.0,
            max_cycle_ms: 0.0,
            final_k_v: config.thrust.k_v,
            final_k_m: config.thrust.k_m,
        };
        Self {
            world,
            samples: Vec::new(),
            cycles: Vec::new(),
            cycle_times: Vec::new(),
            thrust: Vec::new(),
            certified: Vec::new(),
            pyramids: Vec::new(),
            summary,
        }
    }

    pub(super) fn observe(&mut self, s: &VehicleState, clearance: f64) {
        let (p, v) = (s.position, s.velocity);
        if let Some(last) = self.samples.last() {
            self.summary.path_length += (p.x - last.x).hypot(p.y - last.y).hypot(p.z - last.z);
        }
        self.summary.min_clearance = self.summary.min_clearance.min(clearance);
        self.summary.max_axis_speed = self.summary.max_axis_speed.max(v.max_abs());
        self.summary.max_speed = self.summary.max_speed.max(v.norm());
        self.samples.push(Sample {
            t: s.time,
            x: p.x,
            y: p.y,
            z: p.z,
            vx: v.x,
            vy: v.y,
            vz: v.z,
            speed: v.norm(),
            clearance,
        });
    }

    pub(super) fn record_cycle(&mut self, t: f64, r: &PlanResult) {
        let c = r.counters;
        self.cycles.push(CycleRecord {
            t,
            sampled: r.sampled(),
            better_than_current: r.better_than_current(),
            higher_cost: c.higher_cost,
            input_infeasible: c.input_infeasible,
            velocity_inadmissible: c.velocity_inadmissible,
            in_collision: c.in_collision,
            collision_free: c.collision_free,
            best_utility: r.best_utility,
            pyramids: r.pyramids,
            replanned: r.best.is_some(),
        });
        self.cycle_times.push(r.cycle_time.as_secs_f64());
    }

    pub(super) fn record_thrust(&mut self, t: f64, r: &StepReport, model: &ThrustModelState) {
        self.thrust.push(ThrustRecord {
            t,
            voltage: r.voltage,
            k_v: model.k_v,
            k_m: model.k_m,
            f_cmd: r.collective_cmd,
            f_hat: model.filtered_thrust.unwrap_or(0.0),
            command: r.command,
        });
    }

    pub(super) fn finish(&mut self, outcome: Outcome, end_time: f64, model: &ThrustModelState) {
        let s = &mut self.summary;
        s.outcome = outcome;
        s.arrival = outcome == Outcome::Arrival;
        s.mission_time = end_time;
        s.cycles = self.cycles.len();
        s.replans = self.cycles.iter().filter(|c| c.replanned).count();
        if !self.cycles.is_empty() {
            let n = self.cycles.len() as f64;
            s.mean_sampled = self.cycles.iter().map(|c| c.sampled as f64).sum::<f64>() / n;
            s.mean_cycle_ms = self.cycle_times.iter().sum::<f64>() / n * 1e3;
            s.max_cycle_ms = self.cycle_times.iter().copied().fold(0.0, f64::max) * 1e3;
        }
        s.final_k_v = model.k_v;
        s.final_k_m = model.k_m;
    }
}
