//! Voltage-adaptive motor thrust model.
//!
//! Per-motor thrust follows `f(u) = K (c0 (u + c1)^2 + c2)` with
//! `K = kV * kM`. `kV` comes from an affine hover-throttle fit against
//! battery voltage; `kM` is adapted online from the measured specific force.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thrust model coefficients, fit parameters and adaptive gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThrustModelState {
    /// Quadratic gain in newtons.
    pub c0: f64,
    /// Command offset.
    pub c1: f64,
    /// Thrust offset in newtons.
    pub c2: f64,
    pub k_v: f64,
    pub k_m: f64,
    /// Reference voltage at which `kV = 1`.
    pub v_ref: f64,
    pub h_slope: f64,
    pub h_intercept: f64,
    pub motors: usize,
    pub mass: f64,
    /// Adaptation gain in 1/(N s).
    pub gamma_m: f64,
    pub k_m_min: f64,
    pub k_m_max: f64,
    /// Cutoff of the low-pass filter on the thrust estimate, Hz.
    pub filter_cutoff_hz: f64,
    /// Filtered per-motor thrust estimate; `None` until the first sample.
    #[serde(skip)]
    pub filtered_thrust: Option<f64>,
}

impl Default for ThrustModelState {
    fn default() -> Self {
        Self {
            c0: 16.62,
            c1: 0.05,
            c2: -0.1,
            k_v: 1.0,
            k_m: 1.0,
            v_ref: 16.8,
            h_slope: -0.03,
            h_intercept: 1.054,
            motors: 4,
            mass: 2.4,
            gamma_m: 0.02,
            k_m_min: 0.5,
            k_m_max: 2.0,
            filter_cutoff_hz: 5.0,
            filtered_thrust: None,
        }
    }
}

impl ThrustModelState {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ConfigInvalid(format!("thrust model: {m}")));
        if !(self.c0 > 0.0) {
            return bad("c0 must be positive");
        }
        if !(self.k_v > 0.0 && self.k_m > 0.0) {
            return bad("kV and kM must be positive");
        }
        if self.motors == 0 {
            return bad("at least one motor is required");
        }
        if !(self.mass > 0.0) {
            return bad("mass must be positive");
        }
        if !(self.k_m_min > 0.0 && self.k_m_min <= self.k_m_max) {
            return bad("kM clamp must satisfy 0 < min <= max");
        }
        if !(self.gamma_m >= 0.0 && self.filter_cutoff_hz > 0.0) {
            return bad("gamma_m must be non-negative and the filter cutoff positive");
        }
        Ok(())
    }

    /// Combined gain `K = kV * kM`.
    pub fn gain(&self) -> f64 {
        self.k_v * self.k_m
    }

    /// Hover throttle predicted by the affine fit at voltage `v`.
    pub fn hover_throttle(&self, v: f64) -> f64 {
        self.h_slope * v + self.h_intercept
    }

    /// Thrust produced at command `u` for gain `k`, without range checks.
    pub fn thrust_with_gain(&self, u: f64, k: f64) -> f64 {
        let s = u + self.c1;
        k * (self.c0 * s * s + self.c2)
    }

    /// Achievable per-motor thrust range `[f(0), f(1)]`.
    pub fn thrust_range(&self) -> (f64, f64) {
        (self.thrust_with_gain(0.0, self.gain()), self.thrust_with_gain(1.0, self.gain()))
    }
}

/// Per-motor thrust for command `u`.
pub fn thrust_from_command(u: f64, state: &ThrustModelState) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::CommandOutOfRange(u));
    }
    Ok(state.thrust_with_gain(u, state.gain()))
}

/// Inverse of [`thrust_from_command`].
///
/// Out-of-range requests return [`Error::ThrustUnachievable`]; use
/// [`command_from_thrust_clamped`] for the saturated command.
pub fn command_from_thrust(f_des: f64, state: &ThrustModelState) -> Result<f64> {
    let (lo, hi) = state.thrust_range();
    if !(f_des >= lo && f_des <= hi) {
        return Err(Error::ThrustUnachievable { requested: f_des, min: lo, max: hi });
    }
    Ok(invert(f_des, state))
}

/// Saturating inverse: returns the clamped command and whether clamping
/// occurred.
pub fn command_from_thrust_clamped(f_des: f64, state: &ThrustModelState) -> (f64, bool) {
    match command_from_thrust(f_des, state) {
        Ok(u) => (u, false),
        Err(_) => {
            let (lo, _) = state.thrust_range();
            (if f_des.is_nan() || f_des < lo { 0.0 } else { 1.0 }, true)
        }
    }
}

fn invert(f_des: f64, state: &ThrustModelState) -> f64 {
    let inner = ((f_des / state.gain() - state.c2) / state.c0).max(0.0);
    (inner.sqrt() - state.c1).clamp(0.0, 1.0)
}

/// Sets `kV = h(V_R) / h(V)` and returns it.
pub fn update_kv(voltage: f64, state: &mut ThrustModelState) -> Result<f64> {
    let h = state.hover_throttle(voltage);
    let h_ref = state.hover_throttle(state.v_ref);
    if !(h > 0.0) {
        return Err(Error::NonPositiveHoverFit(h));
    }
    if !(h_ref > 0.0) {
        return Err(Error::NonPositiveHoverFit(h_ref));
    }
    state.k_v = if voltage == state.v_ref { 1.0 } else { h_ref / h };
    Ok(state.k_v)
}

/// Thrust implied by the measured body-z specific force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrustEstimate {
    pub total: f64,
    pub per_motor: f64,
}

pub fn estimate_thrust(c_z: f64, state: &ThrustModelState) -> ThrustEstimate {
    let total = state.mass * c_z;
    ThrustEstimate { total, per_motor: total / state.motors as f64 }
}

/// One adaptation step of `kM` from the per-motor command and the measured
/// specific force; returns the new `kM`.
///
/// The estimate is low-pass filtered, then `kM` moves by
/// `gamma_m * (f_hat - f_model) * dt` and is clamped.
pub fn update_km(state: &mut ThrustModelState, u_cmd: f64, c_z: f64, dt: f64) -> f64 {
    assert!(dt > 0.0, "time step must be positive");
    let measured = estimate_thrust(c_z, state).per_motor;
    let alpha = 1.0 - (-2.0 * std::f64::consts::PI * state.filter_cutoff_hz * dt).exp();
    let f_hat = match state.filtered_thrust {
        Some(prev) => prev + alpha * (measured - prev),
        None => measured,
    };
    state.filtered_thrust = Some(f_hat);
    let f_model = state.thrust_with_gain(u_cmd.clamp(0.0, 1.0), state.gain());
    let k = state.k_m + state.gamma_m * (f_hat - f_model) * dt;
    state.k_m = k.clamp(state.k_m_min, state.k_m_max);
    state.k_m
}
