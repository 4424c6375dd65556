//! Receding-horizon candidate sampling and selection.
//!
//! Each planning cycle draws candidate endpoints inside the camera's field of
//! view, builds a quintic from the current state to each, and screens it
//! with the checks in increasing order of cost: progress against the best
//! known utility, input feasibility, per-axis speed, and finally the pyramid
//! collision check.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{back_project, CameraIntrinsics, DepthImage, Pose, Rotation, Vec3};
use crate::pyramid::{CollisionVerdict, FreeSpaceModel};
use crate::sim::VehicleState;
use crate::trajectory::{Feasibility, FeasibilityLimits, Frame, QuinticPrimitive, DEFAULT_FEASIBILITY_DT_MIN};
use crate::STANDARD_GRAVITY;

type V3 = Vec3<f64>;
type Prim = QuinticPrimitive<f64>;

/// Planner parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Per-axis speed limit, m/s.
    pub v_max: f64,
    /// Vehicle radius, m.
    pub radius: f64,
    /// Fractions of the image width and height that bound endpoint pixels.
    pub fov_margins: [f64; 2],
    /// Endpoint depth range, m.
    pub depth_range: [f64; 2],
    /// Primitive duration range, s.
    pub duration_range: [f64; 2],
    /// Candidates per cycle.
    pub budget: usize,
    /// Optional wall-clock limit per cycle, ms.
    pub deadline_ms: Option<f64>,
    /// Replanning stops inside this distance of the goal, m.
    pub goal_radius: f64,
    /// Free distance around the camera used for the near field, m.
    pub free_distance: f64,
    /// Collective thrust bounds, N.
    pub f_min: f64,
    pub f_max: f64,
    /// Body-rate bound, rad/s; `None` disables the rate proxy.
    pub omega_max: Option<f64>,
    pub mass: f64,
    /// Minimum section length of the feasibility subdivision, s.
    pub feasibility_dt_min: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            v_max: 3.0,
            radius: 0.6,
            fov_margins: [0.1, 0.9],
            depth_range: [1.5, 8.0],
            duration_range: [1.0, 4.0],
            budget: 2000,
            deadline_ms: None,
            goal_radius: 1.0,
            free_distance: crate::pyramid::DEFAULT_FREE_DISTANCE,
            f_min: 10.0,
            f_max: 40.0,
            omega_max: Some(6.0),
            mass: 2.4,
            feasibility_dt_min: DEFAULT_FEASIBILITY_DT_MIN,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(format!("planner: {m}")));
        let [lo, hi] = self.fov_margins;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return bad(format!("fov margins {:?} must satisfy 0 < lo <= hi < 1", self.fov_margins));
        }
        for (name, [a, b]) in [("depth", self.depth_range), ("duration", self.duration_range)] {
            if !(a > 0.0 && a <= b && b.is_finite()) {
                return bad(format!("{name} range [{a}, {b}] must be positive and ordered"));
            }
        }
        if !(self.radius > 0.0 && self.goal_radius > 0.0 && self.free_distance > 0.0) {
            return bad("radius, goal_radius and free_distance must be positive".into());
        }
        if let Some(ms) = self.deadline_ms {
            if !(ms > 0.0) {
                return bad(format!("deadline {ms} ms must be positive"));
            }
        }
        if !(self.feasibility_dt_min > 0.0) {
            return bad("feasibility_dt_min must be positive".into());
        }
        self.limits().validate()
    }

    pub fn limits(&self) -> FeasibilityLimits<f64> {
        FeasibilityLimits {
            f_min: self.f_min,
            f_max: self.f_max,
            omega_max: self.omega_max.unwrap_or(f64::INFINITY),
            v_max: self.v_max,
            mass: self.mass,
        }
    }
}

/// Outcome of the checks for one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    CollisionFree,
    InCollision,
    VelocityInadmissible,
    InputInfeasible,
    HigherCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateVerdict {
    pub status: CandidateStatus,
    /// Average progress speed toward the goal, m/s.
    pub utility: f64,
}

/// Candidates per status.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounters {
    pub collision_free: usize,
    pub in_collision: usize,
    pub velocity_inadmissible: usize,
    pub input_infeasible: usize,
    pub higher_cost: usize,
}

impl VerdictCounters {
    pub fn total(&self) -> usize {
        self.collision_free + self.in_collision + self.velocity_inadmissible + self.input_infeasible + self.higher_cost
    }

    fn bump(&mut self, s: CandidateStatus) {
        match s {
            CandidateStatus::CollisionFree => self.collision_free += 1,
            CandidateStatus::InCollision => self.in_collision += 1,
            CandidateStatus::VelocityInadmissible => self.velocity_inadmissible += 1,
            CandidateStatus::InputInfeasible => self.input_infeasible += 1,
            CandidateStatus::HigherCost => self.higher_cost += 1,
        }
    }
}

/// How many times each expensive stage ran.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCalls {
    pub feasibility: usize,
    pub velocity: usize,
    pub collision: usize,
}

/// Per-candidate trace entry, kept when [`PlanOptions::record_candidates`]
/// is set.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRecord {
    pub primitive: Prim,
    pub verdict: CandidateVerdict,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PlanOptions {
    pub record_candidates: bool,
}

/// Result of one planning cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    /// Best collision-free primitive, inertial frame.
    pub best: Option<Prim>,
    pub best_utility: Option<f64>,
    pub counters: VerdictCounters,
    pub stage_calls: StageCalls,
    /// Pyramids in the free-space model at the end of the cycle.
    pub pyramids: usize,
    pub cycle_time: Duration,
    pub candidates: Vec<CandidateRecord>,
}

impl PlanResult {
    pub fn sampled(&self) -> usize {
        self.counters.total()
    }

    /// Candidates that beat the best utility known when they were drawn.
    pub fn better_than_current(&self) -> usize {
        self.counters.total() - self.counters.higher_cost
    }
}

/// The three expensive checks, in the order the planner runs them.
pub trait CandidateChecks {
    fn input_feasibility(&mut self, prim: &Prim) -> Feasibility;
    fn velocity_admissible(&mut self, prim: &Prim) -> bool;
    /// `prim_cam` is expressed in the camera frame of the depth image.
    fn collision_free(&mut self, prim_cam: &Prim) -> CollisionVerdict;
}

/// Checks backed by the trajectory tests and a [`FreeSpaceModel`].
#[derive(Debug)]
pub struct StandardChecks<'a> {
    pub model: FreeSpaceModel<'a>,
    pub limits: FeasibilityLimits<f64>,
    pub dt_min: f64,
}

impl<'a> StandardChecks<'a> {
    pub fn new(image: &'a DepthImage, config: &PlannerConfig) -> Result<Self> {
        Ok(Self {
            model: FreeSpaceModel::new(image, config.radius, config.free_distance)?,
            limits: config.limits(),
            dt_min: config.feasibility_dt_min,
        })
    }
}

impl CandidateChecks for StandardChecks<'_> {
    fn input_feasibility(&mut self, prim: &Prim) -> Feasibility {
        prim.check_input_feasibility(&self.limits, self.dt_min)
    }

    fn velocity_admissible(&mut self, prim: &Prim) -> bool {
        prim.check_velocity_admissible(self.limits.v_max)
    }

    fn collision_free(&mut self, prim_cam: &Prim) -> CollisionVerdict {
        self.model.trajectory_collision_free(prim_cam)
    }
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Draws a camera-frame endpoint: pixel inside the FOV margins, depth
/// uniform in the configured range.
pub fn sample_endpoint<R: Rng>(rng: &mut R, intr: &CameraIntrinsics<f64>, config: &PlannerConfig) -> V3 {
    let [lo, hi] = config.fov_margins;
    let u = uniform(rng, lo * intr.width_f(), hi * intr.width_f());
    let v = uniform(rng, lo * intr.height_f(), hi * intr.height_f());
    let d = uniform(rng, config.depth_range[0], config.depth_range[1]);
    back_project(u, v, d, intr).expect("depth range is positive")
}

/// Average speed of progress toward `goal` when moving from `s` to `endpoint`
/// in `t` seconds.
pub fn utility(s: V3, endpoint: V3, goal: V3, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveDuration(t));
    }
    Ok(((goal - s).norm() - (goal - endpoint).norm()) / t)
}

/// Heading from `s` toward `goal`.
pub fn yaw_command(s: V3, goal: V3) -> Result<f64> {
    let (dx, dy) = (goal.x - s.x, goal.y - s.y);
    if dx.hypot(dy) < 1e-9 {
        return Err(Error::DegenerateDirection);
    }
    Ok(dy.atan2(dx))
}

/// Acceleration implied by collective thrust `c` along the body z axis,
/// inertial frame with +z up.
pub fn acceleration_estimate(c: f64, attitude: &Rotation<f64>, mass: f64) -> Result<V3> {
    if !(mass > 0.0) {
        return Err(Error::NonPositiveMass);
    }
    Ok(attitude.z_axis() * (c / mass) - V3::new(0.0, 0.0, STANDARD_GRAVITY))
}

pub fn goal_reached(s: V3, goal: V3, config: &PlannerConfig) -> bool {
    (s - goal).norm() < config.goal_radius
}

/// Runs one planning cycle with the standard checks.
///
/// `camera_pose` maps camera-frame points into the inertial frame at the
/// image timestamp. Candidates must beat `current_best_utility`
/// (`-inf` when there is no reference to keep).
#[allow(clippy::too_many_arguments)]
pub fn plan<R: Rng>(
    state: &VehicleState,
    goal: V3,
    image: &DepthImage,
    camera_pose: &Pose<f64>,
    config: &PlannerConfig,
    rng: &mut R,
    current_best_utility: f64,
    options: PlanOptions,
) -> Result<PlanResult> {
    config.validate()?;
    let mut checks = StandardChecks::new(image, config)?;
    let mut result = plan_with(
        state,
        goal,
        image.intrinsics(),
        camera_pose,
        config,
        rng,
        current_best_utility,
        options,
        &mut checks,
    );
    result.pyramids = checks.model.pyramids().len();
    Ok(result)
}

/// Planning cycle with caller-supplied checks.
#[allow(clippy::too_many_arguments)]
pub fn plan_with<R: Rng, C: CandidateChecks>(
    state: &VehicleState,
    goal: V3,
    intr: &CameraIntrinsics<f64>,
    camera_pose: &Pose<f64>,
    config: &PlannerConfig,
    rng: &mut R,
    current_best_utility: f64,
    options: PlanOptions,
    checks: &mut C,
) -> PlanResult {
    let started = Instant::now();
    let deadline = config.deadline_ms.map(|ms| Duration::from_secs_f64(ms / 1e3));
    let mut best_utility = current_best_utility;
    let mut best = None;
    let mut counters = VerdictCounters::default();
    let mut calls = StageCalls::default();
    let mut candidates = Vec::new();

    for _ in 0..config.budget {
        if deadline.is_some_and(|d| started.elapsed() >= d) {
            break;
        }
        let end_cam = sample_endpoint(rng, intr, config);
        let duration = uniform(rng, config.duration_range[0], config.duration_range[1]);
        let end = camera_pose.transform_point(end_cam);
        let prim = QuinticPrimitive::new(state.position, state.velocity, state.acceleration, end, duration)
            .expect("sampled durations are positive");
        let u = utility(state.position, end, goal, duration).expect("sampled durations are positive");

        let status = if u <= best_utility {
            CandidateStatus::HigherCost
        } else {
            calls.feasibility += 1;
            if checks.input_feasibility(&prim) != Feasibility::Feasible {
                CandidateStatus::InputInfeasible
            } else {
                calls.velocity += 1;
                if !checks.velocity_admissible(&prim) {
                    CandidateStatus::VelocityInadmissible
                } else {
                    calls.collision += 1;
                    let prim_cam = prim.to_local_frame(camera_pose, Frame::Camera);
                    match checks.collision_free(&prim_cam) {
                        CollisionVerdict::CollisionFree => CandidateStatus::CollisionFree,
                        CollisionVerdict::InCollision => CandidateStatus::InCollision,
                    }
                }
            }
        };
        if status == CandidateStatus::CollisionFree {
            best_utility = u;
            best = Some(prim);
        }
        counters.bump(status);
        if options.record_candidates {
            candidates.push(CandidateRecord { primitive: prim, verdict: CandidateVerdict { status, utility: u } });
        }
    }

    PlanResult {
        best_utility: best.map(|_| best_utility),
        best,
        counters,
        stage_calls: calls,
        pyramids: 0,
        cycle_time: started.elapsed(),
        candidates,
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::camera_to_body;

    fn intr() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap()
    }

    #[test]
    fn endpoints_stay_inside_margins() {
        let intr = intr();
        let cfg = PlannerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let p = sample_endpoint(&mut rng, &intr, &cfg);
            let (u, v) = crate::geometry::project(p, &intr).unwrap();
            assert!((10.0 - 1e-9..=90.0 + 1e-9).contains(&u) && (10.0 - 1e-9..=90.0 + 1e-9).contains(&v));
            assert!((1.5..=8.0).contains(&p.z));
        }
    }

    #[test]
    fn sampling_is_deterministic_and_degenerate_margins_hit_center() {
        let intr = intr();
        let cfg = PlannerConfig::default();
        let a: Vec<_> = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            (0..5).map(|_| sample_endpoint(&mut rng, &intr, &cfg)).collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b: Vec<_> = (0..5).map(|_| sample_endpoint(&mut rng, &intr, &cfg)).collect();
        assert_eq!(a, b);
        let center = PlannerConfig { fov_margins: [0.5, 0.5], ..cfg };
        let p = sample_endpoint(&mut rng, &intr, &center);
        assert!(p.x.abs() < 1e-12 && p.y.abs() < 1e-12);
    }

    #[test]
    fn utility_examples() {
        let g = V3::new(30.0, 0.0, 0.0);
        assert_eq!(utility(V3::zero(), V3::new(3.0, 0.0, 0.0), g, 2.0).unwrap(), 1.5);
        assert_eq!(utility(V3::zero(), V3::zero(), g, 2.0).unwrap(), 0.0);
        assert_eq!(utility(V3::zero(), g, g, 10.0).unwrap(), 3.0);
        assert_eq!(utility(V3::zero(), g, g, 0.0), Err(Error::NonPositiveDuration(0.0)));
    }

    #[test]
    fn yaw_examples() {
        assert_eq!(yaw_command(V3::zero(), V3::new(5.0, 0.0, 1.0)).unwrap(), 0.0);
        assert!((yaw_command(V3::zero(), V3::new(0.0, 2.0, 0.0)).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!(
            (yaw_command(V3::new(1.0, 1.0, 0.0), V3::zero()).unwrap() + 3.0 * std::f64::consts::FRAC_PI_4).abs()
                < 1e-15
        );
        assert_eq!(yaw_command(V3::zero(), V3::new(0.0, 0.0, 3.0)), Err(Error::DegenerateDirection));
    }

    #[test]
    fn acceleration_examples() {
        let m = 2.4;
        let level = Rotation::identity();
        assert!(acceleration_estimate(m * STANDARD_GRAVITY, &level, m).unwrap().norm() < 1e-12);
        assert_eq!(acceleration_estimate(0.0, &level, m).unwrap(), V3::new(0.0, 0.0, -STANDARD_GRAVITY));
        let a = acceleration_estimate(m * STANDARD_GRAVITY, &Rotation::from_euler(FRAC_PI_6, 0.0, 0.0), m).unwrap();
        assert!((a.y.abs() - STANDARD_GRAVITY * 0.5).abs() < 1e-12);
        assert!((a.z - STANDARD_GRAVITY * (FRAC_PI_6.cos() - 1.0)).abs() < 1e-12);
        assert_eq!(acceleration_estimate(1.0, &level, 0.0), Err(Error::NonPositiveMass));
    }

    #[test]
    fn goal_radius_is_strict() {
        let cfg = PlannerConfig::default();
        let g = V3::new(30.0, 0.0, 2.0);
        assert!(goal_reached(V3::new(29.5, 0.0, 2.0), g, &cfg));
        assert!(!goal_reached(V3::new(29.0, 0.0, 2.0), g, &cfg));
        assert!(!goal_reached(V3::new(5.0, 0.0, 2.0), g, &cfg));
    }

    fn hover_state() -> VehicleState {
        VehicleState { position: V3::new(0.0, 0.0, 2.0), ..Default::default() }
    }

    fn camera_pose(state: &VehicleState) -> Pose<f64> {
        Pose::new(state.attitude * camera_to_body(), state.position)
    }

    #[test]
    fn free_space_plan_makes_progress() {
        let img = DepthImage::uniform(intr(), 10.0, 10.0).unwrap();
        let s = hover_state();
        let cfg = PlannerConfig::default();
        let goal = V3::new(30.0, 0.0, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r =
            plan(&s, goal, &img, &camera_pose(&s), &cfg, &mut rng, f64::NEG_INFINITY, PlanOptions::default()).unwrap();
        let best = r.best.expect("free space has a solution");
        assert!(r.best_utility.unwrap() > 0.0);
        assert!(best.check_velocity_admissible(cfg.v_max));
        assert_eq!(r.sampled(), cfg.budget);
    }

    #[test]
    fn zero_budget_returns_nothing() {
        let img = DepthImage::uniform(intr(), 10.0, 10.0).unwrap();
        let s = hover_state();
        let cfg = PlannerConfig { budget: 0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = plan(
            &s,
            V3::new(30.0, 0.0, 2.0),
            &img,
            &camera_pose(&s),
            &cfg,
            &mut rng,
            f64::NEG_INFINITY,
            PlanOptions::default(),
        )
        .unwrap();
        assert!(r.best.is_none());
        assert_eq!(r.counters, VerdictCounters::default());
        assert_eq!(r.stage_calls, StageCalls::default());
    }

    #[test]
    fn wall_ahead_blocks_straight_candidates() {
        let img = DepthImage::uniform(intr(), 1.0, 10.0).unwrap();
        let s = hover_state();
        let cfg = PlannerConfig { depth_range: [2.0, 8.0], ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = plan(
            &s,
            V3::new(30.0, 0.0, 2.0),
            &img,
            &camera_pose(&s),
            &cfg,
            &mut rng,
            f64::NEG_INFINITY,
            PlanOptions::default(),
        )
        .unwrap();
        assert!(r.counters.in_collision > 0);
        assert!(r.best.is_none());
    }
}
