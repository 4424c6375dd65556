//! Deterministic closed-loop simulation of the planner flying through a
//! cylinder forest.
//!
//! The control loop runs at a fixed rate. Depth frames arrive at the camera
//! rate and each one triggers a planning cycle until the goal is within the
//! arrival radius. Ground-truth clearance ends the run on collision.

mod metrics;
mod vehicle;
mod world;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use metrics::{CertifiedPrimitive, CyclePyramids, CycleRecord, MetricsLog, Outcome, Sample, Summary, ThrustRecord};
pub use vehicle::{
    apply_dynamics, imu_cz, plant_thrust, position_control, step, AdaptationConfig, BatteryModel, ControlOutput,
    PlantConfig, StepContext, StepReport, VehicleConfig, VehicleState,
};
pub use world::{render_depth, Cylinder, ForestConfig, World, WorldConfig};

use crate::error::{Error, Result};
use crate::geometry::{camera_to_body, CameraIntrinsics, Pose, Vec3};
use crate::planner::{
    goal_reached, plan_with, utility, yaw_command, CandidateStatus, PlanOptions, PlannerConfig, StandardChecks,
};
use crate::thrust::ThrustModelState;
use crate::trajectory::QuinticPrimitive;

type V3 = Vec3<f64>;

/// Random streams derived from the run seed.
const STREAM_WORLD: u64 = 1;
const STREAM_PLANNER: u64 = 2;
const STREAM_IMU: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Fly from start to goal with the planner.
    Mission,
    /// Hold position at the start until the timeout, without planning.
    Hover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub rate_hz: f64,
    pub max_range: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { width: 160, height: 120, fx: 96.5, fy: 96.5, rate_hz: 30.0, max_range: 10.0 }
    }
}

impl CameraConfig {
    pub fn intrinsics(&self) -> Result<CameraIntrinsics<f64>> {
        CameraIntrinsics::new(
            self.fx,
            self.fy,
            self.width as f64 / 2.0,
            self.height as f64 / 2.0,
            self.width,
            self.height,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImuConfig {
    /// Standard deviation of the specific-force noise, m/s².
    pub cz_noise_std: f64,
}

impl Default for ImuConfig {
    fn default() -> Self {
        Self { cz_noise_std: 0.15 }
    }
}

/// Complete description of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: Mode,
    pub seed: u64,
    pub start: [f64; 3],
    pub goal: [f64; 3],
    pub timeout_s: f64,
    pub control_rate_hz: f64,
    /// Collision is declared below this fraction of the planner radius.
    pub collision_fraction: f64,
    pub camera: CameraConfig,
    pub world: WorldConfig,
    /// `vehicle.mass` overrides the masses inside `planner` and `thrust`.
    pub vehicle: VehicleConfig,
    pub planner: PlannerConfig,
    pub thrust: ThrustModelState,
    pub plant: PlantConfig,
    pub battery: BatteryModel,
    pub imu: ImuConfig,
    pub adaptation: AdaptationConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "free-space".into(),
            mode: Mode::Mission,
            seed: 0,
            start: [0.0, 0.0, 2.0],
            goal: [30.0, 0.0, 2.0],
            timeout_s: 60.0,
            control_rate_hz: 100.0,
            collision_fraction: 0.3,
            camera: CameraConfig::default(),
            world: WorldConfig::default(),
            vehicle: VehicleConfig::default(),
            planner: PlannerConfig::default(),
            thrust: ThrustModelState::default(),
            plant: PlantConfig::default(),
            battery: BatteryModel::default(),
            imu: ImuConfig::default(),
            adaptation: AdaptationConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        let cfg = cfg.normalized();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Copies the vehicle mass into the nested sections.
    pub fn normalized(mut self) -> Self {
        self.planner.mass = self.vehicle.mass;
        self.thrust.mass = self.vehicle.mass;
        self.vehicle.speed_limit = self.vehicle.speed_limit.or(Some(self.planner.v_max));
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if !(self.timeout_s > 0.0) {
            return bad(format!("timeout_s must be positive, got {}", self.timeout_s));
        }
        if !(self.control_rate_hz >= 50.0) {
            return bad(format!("control_rate_hz must be at least 50, got {}", self.control_rate_hz));
        }
        if !(self.camera.rate_hz > 0.0 && self.camera.rate_hz <= self.control_rate_hz) {
            return bad("camera rate must be positive and not above the control rate".into());
        }
        if !(self.camera.max_range > 0.0) {
            return bad("camera max_range must be positive".into());
        }
        if !(self.collision_fraction >= 0.0 && self.collision_fraction <= 1.0) {
            return bad("collision_fraction must lie in [0, 1]".into());
        }
        if self.start.iter().chain(&self.goal).any(|v| !v.is_finite()) {
            return bad("start and goal must be finite".into());
        }
        if self.imu.cz_noise_std < 0.0 {
            return bad("imu noise must be non-negative".into());
        }
        self.camera.intrinsics().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        self.vehicle.validate()?;
        self.planner.validate()?;
        self.thrust.validate()?;
        self.battery.validate()?;
        if !(self.plant.gain > 0.0) {
            return bad("plant gain must be positive".into());
        }
        Ok(())
    }
}

/// Switches that only affect what the log keeps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep every primitive the planner certified collision-free.
    pub record_certified: bool,
    /// Keep the pyramids each planning cycle built.
    pub record_pyramids: bool,
}

struct Reference {
    primitive: QuinticPrimitive<f64>,
    start: f64,
}

impl Reference {
    fn hold(p: V3, t: f64) -> Self {
        let primitive = QuinticPrimitive::new(p, V3::zero(), V3::zero(), p, 1.0).expect("unit duration");
        Self { primitive, start: t }
    }

    fn sample(&self, t: f64) -> crate::trajectory::PrimitiveSample<f64> {
        let tau = t - self.start;
        if tau >= self.primitive.duration() {
            let zero = V3::zero();
            return crate::trajectory::PrimitiveSample {
                position: self.primitive.end_position(),
                velocity: zero,
                acceleration: zero,
                jerk: zero,
            };
        }
        self.primitive.sample(tau.max(0.0))
    }

    /// Utility of following the rest of this reference from `s`.
    fn remaining_utility(&self, s: V3, goal: V3, t: f64) -> f64 {
        let left = self.primitive.duration() - (t - self.start);
        if left <= 1e-3 {
            return f64::NEG_INFINITY;
        }
        utility(s, self.primitive.end_position(), goal, left).unwrap_or(f64::NEG_INFINITY)
    }
}

/// Runs one scenario with the given seed.
pub fn run_scenario(config: &ScenarioConfig, seed: u64, options: RunOptions) -> Result<MetricsLog> {
    let config = config.clone().normalized();
    config.validate()?;
    let rng_for = |stream: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(stream);
        r
    };
    let mut world_rng = rng_for(STREAM_WORLD);
    let mut planner_rng = rng_for(STREAM_PLANNER);
    let mut imu_rng = rng_for(STREAM_IMU);

    let start = V3::from_array(config.start);
    let goal = V3::from_array(config.goal);
    let world = World::generate(&config.world, &[start, goal], &mut world_rng)?;
    let intr = config.camera.intrinsics()?;
    let dt = 1.0 / config.control_rate_hz;
    let steps = (config.timeout_s * config.control_rate_hz).round() as u64;
    let collision_floor = config.collision_fraction * config.planner.radius;

    let initial_yaw = yaw_command(start, goal).unwrap_or(0.0);
    let attitude = crate::geometry::Rotation::from_euler(0.0, 0.0, initial_yaw);
    let mut state = VehicleState { position: start, attitude, yaw: initial_yaw, ..Default::default() };
    let mut model = config.thrust.clone();
    let mut yaw_cmd = initial_yaw;
    let mut reference = Reference::hold(start, 0.0);
    let mut log = MetricsLog::new(seed, &config, world.clone());
    let mut next_frame = 0u64;
    let mut outcome = None;

    for k in 0..=steps {
        let t = k as f64 * dt;
        state.time = t;
        let clearance = world.clearance(state.position);
        log.observe(&state, clearance);
        if clearance < collision_floor {
            outcome = Some(Outcome::Collision);
            break;
        }
        if config.mode == Mode::Mission && goal_reached(state.position, goal, &config.planner) {
            outcome = Some(Outcome::Arrival);
            break;
        }
        if k == steps {
            break;
        }

        let frame_due = config.mode == Mode::Mission && k >= next_frame;
        if frame_due {
            next_frame = frame_step(log.cycles.len() as u64 + 1, config.control_rate_hz, config.camera.rate_hz);
            if let Ok(y) = yaw_command(state.position, goal) {
                yaw_cmd = y;
            }
            let camera_pose = Pose::new(state.attitude * camera_to_body(), state.position);
            let image = render_depth(&world, &camera_pose, &intr, config.camera.max_range)?;
            let best_known = reference.remaining_utility(state.position, goal, t);
            let plan_opts = PlanOptions { record_candidates: options.record_certified };
            let mut checks = StandardChecks::new(&image, &config.planner)?;
            let mut result = plan_with(
                &state,
                goal,
                &intr,
                &camera_pose,
                &config.planner,
                &mut planner_rng,
                best_known,
                plan_opts,
                &mut checks,
            );
            result.pyramids = checks.model.pyramids().len();
            let cycle = log.cycles.len();
            if options.record_pyramids {
                log.pyramids.push(CyclePyramids { cycle, time: t, pyramids: checks.model.pyramids().to_vec() });
            }
            if options.record_certified {
                log.certified.extend(
                    result
                        .candidates
                        .iter()
                        .filter(|c| c.verdict.status == CandidateStatus::CollisionFree)
                        .map(|c| CertifiedPrimitive { cycle, time: t, camera_pose, primitive: c.primitive }),
                );
            }
            log.record_cycle(t, &result);
            if let Some(best) = result.best {
                reference = Reference { primitive: best, start: t };
            }
        }

        let mut ctx = StepContext {
            vehicle: &config.vehicle,
            plant: &config.plant,
            battery: &config.battery,
            adaptation: config.adaptation,
            imu_noise_std: config.imu.cz_noise_std,
            imu_rng: &mut imu_rng,
        };
        let report = step(&mut state, &reference.sample(t), yaw_cmd, &mut model, &mut ctx, dt)?;
        log.record_thrust(t, &report, &model);
    }

    let outcome = outcome.unwrap_or(match config.mode {
        Mode::Mission => Outcome::Timeout,
        Mode::Hover => Outcome::Completed,
    });
    log.finish(outcome, state.time, &model);
    Ok(log)
}

/// Control step at which frame `n` is captured.
fn frame_step(n: u64, control_hz: f64, camera_hz: f64) -> u64 {
    (n as f64 * control_hz / camera_hz).ceil() as u64
}
