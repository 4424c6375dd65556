//! Quintic minimum-jerk motion primitives with zero terminal velocity and
//! acceleration, plus the velocity-admissibility and input-feasibility checks
//! run on every candidate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};
use crate::poly::{solve_cubic, Poly};
use crate::scalar::{Real, STANDARD_GRAVITY};

/// Frame a primitive is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Inertial,
    Camera,
}

/// Kinematic state of a primitive at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveSample<T> {
    pub position: Vec3<T>,
    pub velocity: Vec3<T>,
    pub acceleration: Vec3<T>,
    pub jerk: Vec3<T>,
}

/// Per-axis quintic
/// `s(t) = α t⁵/120 + β t⁴/24 + γ t³/6 + a₀ t²/2 + v₀ t + s₀` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticPrimitive<T> {
    alpha: Vec3<T>,
    beta: Vec3<T>,
    gamma: Vec3<T>,
    p0: Vec3<T>,
    v0: Vec3<T>,
    a0: Vec3<T>,
    duration: T,
    frame: Frame,
}

impl<T: Real> QuinticPrimitive<T> {
    /// Primitive from `(s0, v0, a0)` reaching `sT` at rest after `duration`.
    pub fn new(s0: Vec3<T>, v0: Vec3<T>, a0: Vec3<T>, s_end: Vec3<T>, duration: T) -> Result<Self> {
        if !(duration > T::zero()) || !duration.is_finite() {
            return Err(Error::NonPositiveDuration(duration.to_f64().unwrap_or(f64::NAN)));
        }
        let t = duration;
        let (t2, t3) = (t * t, t * t * t);
        let t5 = t2 * t3;
        // Residuals of the terminal conditions after the known initial terms.
        let dp = s_end - s0 - v0 * t - a0 * (t2 * T::half());
        let dv = -(v0 + a0 * t);
        let da = -a0;
        let c = |k: f64| T::lit(k);
        let alpha = (dp * c(720.0) - dv * (c(360.0) * t) + da * (c(60.0) * t2)) / t5;
        let beta = (-dp * (c(360.0) * t) + dv * (c(168.0) * t2) - da * (c(24.0) * t3)) / t5;
        let gamma = (dp * (c(60.0) * t2) - dv * (c(24.0) * t3) + da * (c(3.0) * t2 * t2)) / t5;
        Ok(Self { alpha, beta, gamma, p0: s0, v0, a0, duration, frame: Frame::Inertial })
    }

    pub fn duration(&self) -> T {
        self.duration
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn alpha(&self) -> Vec3<T> {
        self.alpha
    }

    pub fn beta(&self) -> Vec3<T> {
        self.beta
    }

    pub fn gamma(&self) -> Vec3<T> {
        self.gamma
    }

    pub fn initial_position(&self) -> Vec3<T> {
        self.p0
    }

    pub fn initial_velocity(&self) -> Vec3<T> {
        self.v0
    }

    pub fn initial_acceleration(&self) -> Vec3<T> {
        self.a0
    }

    pub fn end_position(&self) -> Vec3<T> {
        self.position(self.duration)
    }

    /// State at `t`; times within 1e-12 of the domain are clamped into it.
    pub fn eval(&self, t: T) -> Result<PrimitiveSample<T>> {
        let eps = T::lit(1e-12);
        let t = if t < T::zero() && t >= -eps {
            T::zero()
        } else if t > self.duration && t <= self.duration + eps {
            self.duration
        } else {
            t
        };
        if !(t >= T::zero() && t <= self.duration) {
            return Err(Error::TimeOutOfRange {
                t: t.to_f64().unwrap_or(f64::NAN),
                duration: self.duration.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(self.sample(t))
    }

    /// Unchecked evaluation; callers keep `t` inside `[0, T]`.
    #[inline]
    pub fn sample(&self, t: T) -> PrimitiveSample<T> {
        PrimitiveSample {
            position: self.position(t),
            velocity: self.velocity(t),
            acceleration: self.acceleration(t),
            jerk: self.jerk(t),
        }
    }

    #[inline]
    pub fn position(&self, t: T) -> Vec3<T> {
        let c = |k: f64| T::lit(k);
        ((((self.alpha * (t / c(120.0)) + self.beta / c(24.0)) * t + self.gamma / c(6.0)) * t + self.a0 * T::half())
            * t
            + self.v0)
            * t
            + self.p0
    }

    #[inline]
    pub fn velocity(&self, t: T) -> Vec3<T> {
        let c = |k: f64| T::lit(k);
        (((self.alpha * (t / c(24.0)) + self.beta / c(6.0)) * t + self.gamma * T::half()) * t + self.a0) * t + self.v0
    }

    #[inline]
    pub fn acceleration(&self, t: T) -> Vec3<T> {
        let c = |k: f64| T::lit(k);
        ((self.alpha * (t / c(6.0)) + self.beta * T::half()) * t + self.gamma) * t + self.a0
    }

    #[inline]
    pub fn jerk(&self, t: T) -> Vec3<T> {
        (self.alpha * (t * T::half()) + self.beta) * t + self.gamma
    }

    /// Position along one axis as a polynomial in `t`.
    pub fn position_poly(&self, axis: usize) -> Poly<T> {
        let c = |k: f64| T::lit(k);
        Poly::new(&[
            self.p0[axis],
            self.v0[axis],
            self.a0[axis] * T::half(),
            self.gamma[axis] / c(6.0),
            self.beta[axis] / c(24.0),
            self.alpha[axis] / c(120.0),
        ])
    }

    /// Position projected on `n` plus `offset`, as a polynomial in `t`.
    pub fn projected_position_poly(&self, n: Vec3<T>, offset: T) -> Poly<T> {
        let mut p = self.position_poly(0).scale(n.x).add(&self.position_poly(1).scale(n.y));
        p = p.add(&self.position_poly(2).scale(n.z));
        p.add(&Poly::new(&[offset]))
    }

    /// Expresses the primitive in the local frame of `pose` (which maps that
    /// frame into the primitive's current frame).
    pub fn to_local_frame(&self, pose: &Pose<T>, frame: Frame) -> Self {
        let v = |x: Vec3<T>| pose.inverse_transform_vector(x);
        Self {
            alpha: v(self.alpha),
            beta: v(self.beta),
            gamma: v(self.gamma),
            p0: pose.inverse_transform_point(self.p0),
            v0: v(self.v0),
            a0: v(self.a0),
            duration: self.duration,
            frame,
        }
    }

    /// Peak `|ṡ|` along `axis` over `[0, T]`, from the zeros of the
    /// acceleration cubic and the two boundary times.
    pub fn per_axis_peak_speed(&self, axis: usize) -> T {
        assert!(axis < 3, "axis index {axis} out of range");
        let c = |k: f64| T::lit(k);
        let speed = |t: T| self.velocity(t)[axis].abs();
        let mut peak = speed(T::zero()).max(speed(self.duration));
        if let Ok(roots) =
            solve_cubic(self.alpha[axis] / c(6.0), self.beta[axis] * T::half(), self.gamma[axis], self.a0[axis])
        {
            for r in roots {
                if r > T::zero() && r < self.duration {
                    peak = peak.max(speed(r));
                }
            }
        }
        peak
    }

    /// True when no axis exceeds `v_max` anywhere on the primitive.
    pub fn check_velocity_admissible(&self, v_max: T) -> bool {
        (0..3).all(|axis| self.per_axis_peak_speed(axis) <= v_max)
    }

    /// Bounds the collective-thrust acceleration `‖s̈ + g‖` and the body-rate
    /// proxy `‖j‖ / ‖s̈ + g‖` by recursive subdivision of `[0, T]`.
    ///
    /// Only meaningful for inertial-frame primitives with +z up.
    pub fn check_input_feasibility(&self, limits: &FeasibilityLimits<T>, dt_min: T) -> Feasibility {
        let g = Vec3::new(T::zero(), T::zero(), T::lit(STANDARD_GRAVITY));
        let f_lo = limits.f_min / limits.mass;
        let f_hi = limits.f_max / limits.mass;
        let rate_limited = limits.omega_max.is_finite();
        let point_violates = |t: T| {
            let f = (self.acceleration(t) + g).norm();
            if f < f_lo || f > f_hi {
                return true;
            }
            rate_limited && self.jerk(t).norm() > limits.omega_max * f
        };
        if point_violates(T::zero()) || point_violates(self.duration) {
            return Feasibility::Infeasible;
        }
        let mut indeterminate = false;
        // Depth-first in time order so the earliest violation is found first.
        let mut stack = vec![(T::zero(), self.duration)];
        while let Some((t1, t2)) = stack.pop() {
            if point_violates(t1) || point_violates(t2) {
                return Feasibility::Infeasible;
            }
            let (f_min_lb, f_max_ub) = self.thrust_bounds(t1, t2, g);
            if f_max_ub < f_lo || f_min_lb > f_hi {
                return Feasibility::Infeasible;
            }
            let thrust_ok = f_min_lb >= f_lo && f_max_ub <= f_hi;
            let rate_ok =
                !rate_limited || (f_min_lb > T::zero() && self.jerk_norm_bound(t1, t2) <= limits.omega_max * f_min_lb);
            if thrust_ok && rate_ok {
                continue;
            }
            let half = (t2 - t1) * T::half();
            if half < dt_min {
                indeterminate = true;
                continue;
            }
            let mid = t1 + half;
            stack.push((mid, t2));
            stack.push((t1, mid));
        }
        if indeterminate {
            Feasibility::Indeterminate
        } else {
            Feasibility::Feasible
        }
    }

    /// Lower and upper bounds of `‖s̈(t) + g‖` over `[t1, t2]`.
    fn thrust_bounds(&self, t1: T, t2: T, g: Vec3<T>) -> (T, T) {
        let (mut lo_sq, mut hi_sq) = (T::zero(), T::zero());
        for axis in 0..3 {
            let (lo, hi) = self.accel_range(axis, t1, t2);
            let (lo, hi) = (lo + g[axis], hi + g[axis]);
            hi_sq = hi_sq + (lo * lo).max(hi * hi);
            if lo > T::zero() || hi < T::zero() {
                lo_sq = lo_sq + (lo * lo).min(hi * hi);
            }
        }
        (lo_sq.sqrt(), hi_sq.sqrt())
    }

    /// Range of one acceleration component on `[t1, t2]` using the jerk zeros.
    fn accel_range(&self, axis: usize, t1: T, t2: T) -> (T, T) {
        let a = |t: T| self.acceleration(t)[axis];
        let (mut lo, mut hi) = (a(t1).min(a(t2)), a(t1).max(a(t2)));
        let roots = crate::poly::solve_quadratic(self.alpha[axis] * T::half(), self.beta[axis], self.gamma[axis]);
        for r in roots {
            if r > t1 && r < t2 {
                lo = lo.min(a(r));
                hi = hi.max(a(r));
            }
        }
        (lo, hi)
    }

    fn jerk_norm_bound(&self, t1: T, t2: T) -> T {
        let mut sq = T::zero();
        for axis in 0..3 {
            let j = |t: T| self.jerk(t)[axis].abs();
            let mut m = j(t1).max(j(t2));
            if !self.alpha[axis].is_zero() {
                let r = -self.beta[axis] / self.alpha[axis];
                if r > t1 && r < t2 {
                    m = m.max(j(r));
                }
            }
            sq = sq + m * m;
        }
        sq.sqrt()
    }
}

/// Actuator and speed limits used to screen candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityLimits<T> {
    /// Minimum collective thrust, N.
    pub f_min: T,
    /// Maximum collective thrust, N.
    pub f_max: T,
    /// Body-rate bound, rad/s; infinite disables the rate proxy.
    pub omega_max: T,
    /// Per-axis speed limit, m/s.
    pub v_max: T,
    /// Vehicle mass, kg.
    pub mass: T,
}

impl<T: Real> FeasibilityLimits<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.f_min >= T::zero()
            && self.f_min < self.f_max
            && self.omega_max > T::zero()
            && self.v_max > T::zero()
            && self.mass > T::zero();
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(format!(
                "feasibility limits {self:?} violate 0 <= f_min < f_max, omega_max > 0, v_max > 0, mass > 0"
            )))
        }
    }
}

/// Outcome of the input-feasibility test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feasibility {
    Feasible,
    Infeasible,
    /// Subdivision reached the minimum section length without a decision.
    Indeterminate,
}

/// Default minimum section length for the feasibility subdivision, s.
pub const DEFAULT_FEASIBILITY_DT_MIN: f64 = 0.02;
