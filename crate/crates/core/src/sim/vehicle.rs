use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Rotation, Vec3};
use crate::thrust::{command_from_thrust_clamped, update_km, update_kv, ThrustModelState};
use crate::trajectory::PrimitiveSample;
use crate::STANDARD_GRAVITY;

type V3 = Vec3<f64>;

/// Ground-truth vehicle state, inertial frame with +z up.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: V3,
    pub velocity: V3,
    /// Acceleration estimate handed to the planner.
    pub acceleration: V3,
    pub attitude: Rotation<f64>,
    pub yaw: f64,
    pub time: f64,
}

/// Linear battery droop down to a floor voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryModel {
    pub v_full: f64,
    /// Volts lost per second.
    pub droop_rate: f64,
    pub v_min: f64,
}

impl Default for BatteryModel {
    fn default() -> Self {
        Self { v_full: 16.8, droop_rate: 2.8 / 300.0, v_min: 14.0 }
    }
}

impl BatteryModel {
    pub fn voltage(&self, t: f64) -> f64 {
        (self.v_full - self.droop_rate * t.max(0.0)).max(self.v_min)
    }

    pub fn validate(&self) -> Result<()> {
        if self.v_full > 0.0 && self.droop_rate >= 0.0 && self.v_min > 0.0 && self.v_min <= self.v_full {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(format!("battery {self:?} needs 0 < v_min <= v_full and droop_rate >= 0")))
        }
    }
}

/// Airframe and position-controller parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleConfig {
    pub mass: f64,
    /// Attitude time constant, s.
    pub tau_att: f64,
    pub kp: [f64; 3],
    pub kd: [f64; 3],
    pub max_tilt_deg: f64,
    /// Per-axis speed the controller does not accelerate past, m/s. Scenario
    /// runs fill it from the planner's `v_max` when unset.
    pub speed_limit: Option<f64>,
    /// Time constant of the approach to `speed_limit`, s.
    pub speed_tau: f64,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        Self {
            mass: 2.4,
            tau_att: 0.12,
            kp: [6.25, 6.25, 6.25],
            kd: [5.0, 5.0, 5.0],
            max_tilt_deg: 35.0,
            speed_limit: None,
            speed_tau: 0.5,
        }
    }
}

impl VehicleConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mass > 0.0
            && self.tau_att > 0.0
            && self.kp.iter().chain(&self.kd).all(|&k| k >= 0.0)
            && self.max_tilt_deg > 0.0
            && self.max_tilt_deg < 90.0
            && self.speed_limit.is_none_or(|v| v > 0.0)
            && self.speed_tau > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(format!("vehicle {self:?} has invalid parameters")))
        }
    }
}

/// The motors as they really behave: the model family with its own gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    /// Multiplier on the voltage-scaled nominal thrust.
    pub gain: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self { gain: 1.0 }
    }
}

/// Which parts of the thrust adaptation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptationConfig {
    pub k_v: bool,
    pub k_m: bool,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self { k_v: true, k_m: true }
    }
}

/// Per-motor thrust the real motors produce at command `u` and voltage `v`.
pub fn plant_thrust(u: f64, voltage: f64, nominal: &ThrustModelState, plant: &PlantConfig) -> f64 {
    let k = plant.gain * nominal.hover_throttle(nominal.v_ref) / nominal.hover_throttle(voltage);
    nominal.thrust_with_gain(u.clamp(0.0, 1.0), k)
}

/// Specific force along body z as an accelerometer would report it.
pub fn imu_cz<R: Rng>(true_collective: f64, mass: f64, noise_std: f64, rng: &mut R) -> f64 {
    let noise = if noise_std > 0.0 { Normal::new(0.0, noise_std).expect("positive std").sample(rng) } else { 0.0 };
    true_collective / mass + noise
}

/// Output of the position controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Collective thrust, N.
    pub collective: f64,
    pub attitude: Rotation<f64>,
}

/// PD position control with acceleration and lag-compensating jerk
/// feedforward, mapped to a tilt-limited thrust vector.
pub fn position_control(
    state: &VehicleState,
    reference: &PrimitiveSample<f64>,
    yaw: f64,
    cfg: &VehicleConfig,
) -> ControlOutput {
    let e_p = reference.position - state.position;
    let e_v = reference.velocity - state.velocity;
    let fb = V3::new(
        cfg.kp[0] * e_p.x + cfg.kd[0] * e_v.x,
        cfg.kp[1] * e_p.y + cfg.kd[1] * e_v.y,
        cfg.kp[2] * e_p.z + cfg.kd[2] * e_v.z,
    );
    let mut a = reference.acceleration + reference.jerk * cfg.tau_att + fb;
    if let Some(limit) = cfg.speed_limit {
        let govern = |a: f64, v: f64| a.clamp((-limit - v) / cfg.speed_tau, (limit - v) / cfg.speed_tau);
        let v = state.velocity;
        a = V3::new(govern(a.x, v.x), govern(a.y, v.y), govern(a.z, v.z));
    }
    let mut f = (a + V3::new(0.0, 0.0, STANDARD_GRAVITY)) * cfg.mass;
    f.z = f.z.max(0.2 * cfg.mass * STANDARD_GRAVITY);
    let max_horizontal = f.z * cfg.max_tilt_deg.to_radians().tan();
    let horizontal = f.x.hypot(f.y);
    if horizontal > max_horizontal {
        let s = max_horizontal / horizontal;
        f.x *= s;
        f.y *= s;
    }
    // thrust along the current body axis only
    let collective = f.dot(state.attitude.z_axis()).max(0.0);
    ControlOutput { collective, attitude: Rotation::from_z_axis_and_yaw(f, yaw) }
}

/// Thrust and adaptation quantities from one step, for logging.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub voltage: f64,
    pub command: f64,
    pub saturated: bool,
    /// Collective thrust the controller asked for, N.
    pub collective_cmd: f64,
    /// Collective thrust the motors produced, N.
    pub collective_true: f64,
    pub c_z: f64,
}

/// Everything `step` needs besides the state.
pub struct StepContext<'a, R> {
    pub vehicle: &'a VehicleConfig,
    pub plant: &'a PlantConfig,
    pub battery: &'a BatteryModel,
    pub adaptation: AdaptationConfig,
    pub imu_noise_std: f64,
    pub imu_rng: &'a mut R,
}

/// Advances the closed loop by `dt`: control, thrust model inversion, plant,
/// first-order attitude lag, semi-implicit Euler, IMU and adaptation.
pub fn step<R: Rng>(
    state: &mut VehicleState,
    reference: &PrimitiveSample<f64>,
    yaw: f64,
    model: &mut ThrustModelState,
    ctx: &mut StepContext<'_, R>,
    dt: f64,
) -> Result<StepReport> {
    assert!(dt > 0.0 && dt <= 0.02, "dt must be in (0, 0.02]");
    let voltage = ctx.battery.voltage(state.time);
    if ctx.adaptation.k_v {
        update_kv(voltage, model)?;
    }
    let cmd = position_control(state, reference, yaw, ctx.vehicle);
    let n = model.motors as f64;
    let (u, saturated) = command_from_thrust_clamped(cmd.collective / n, model);
    let collective_true = n * plant_thrust(u, voltage, model, ctx.plant);
    apply_dynamics(state, cmd, collective_true, ctx.vehicle, dt);

    let c_z = imu_cz(collective_true, ctx.vehicle.mass, ctx.imu_noise_std, ctx.imu_rng);
    if ctx.adaptation.k_m {
        update_km(model, u, c_z, dt);
    }
    let model_collective = n * model.thrust_with_gain(u, model.gain());
    state.acceleration = crate::planner::acceleration_estimate(model_collective, &state.attitude, ctx.vehicle.mass)?;
    Ok(StepReport { voltage, command: u, saturated, collective_cmd: cmd.collective, collective_true, c_z })
}

/// Attitude lag and translational integration with the true thrust.
pub fn apply_dynamics(
    state: &mut VehicleState,
    cmd: ControlOutput,
    collective_true: f64,
    cfg: &VehicleConfig,
    dt: f64,
) {
    let blend = 1.0 - (-dt / cfg.tau_att).exp();
    state.attitude = state.attitude.slerp(&cmd.attitude, blend);
    let accel = state.attitude.z_axis() * (collective_true / cfg.mass) - V3::new(0.0, 0.0, STANDARD_GRAVITY);
    state.velocity += accel * dt;
    state.position += state.velocity * dt;
    state.yaw = state.attitude.yaw();
    state.time += dt;
}
