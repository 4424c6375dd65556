use std::ops::Mul;

use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::scalar::Real;

/// Rotation stored as a unit quaternion `(w, x, y, z)`.
///
/// A rotation maps vectors from a local frame into its parent frame, e.g. the
/// vehicle attitude maps body-frame vectors into the inertial frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Default for Rotation<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Rotation<T> {
    pub fn identity() -> Self {
        Self { w: T::one(), x: T::zero(), y: T::zero(), z: T::zero() }
    }

    /// Builds a rotation from raw components, normalising them.
    pub fn from_quaternion(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }.renormalized()
    }

    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let Some(a) = axis.normalized() else {
            return Self::identity();
        };
        let (s, c) = (angle * T::half()).sin_cos();
        Self { w: c, x: a.x * s, y: a.y * s, z: a.z * s }
    }

    /// Z-Y-X (yaw, pitch, roll) Euler angles.
    pub fn from_euler(roll: T, pitch: T, yaw: T) -> Self {
        Self::from_axis_angle(Vec3::unit_z(), yaw)
            * Self::from_axis_angle(Vec3::unit_y(), pitch)
            * Self::from_axis_angle(Vec3::unit_x(), roll)
    }

    /// Builds a rotation whose columns are the given orthonormal axes.
    pub fn from_basis(cx: Vec3<T>, cy: Vec3<T>, cz: Vec3<T>) -> Self {
        let (m00, m01, m02) = (cx.x, cy.x, cz.x);
        let (m10, m11, m12) = (cx.y, cy.y, cz.y);
        let (m20, m21, m22) = (cx.z, cy.z, cz.z);
        let one = T::one();
        let quarter = T::lit(0.25);
        let trace = m00 + m11 + m22;
        let q = if trace > T::zero() {
            let s = (trace + one).sqrt() * T::two();
            Self { w: quarter * s, x: (m21 - m12) / s, y: (m02 - m20) / s, z: (m10 - m01) / s }
        } else if m00 > m11 && m00 > m22 {
            let s = (one + m00 - m11 - m22).sqrt() * T::two();
            Self { w: (m21 - m12) / s, x: quarter * s, y: (m01 + m10) / s, z: (m02 + m20) / s }
        } else if m11 > m22 {
            let s = (one + m11 - m00 - m22).sqrt() * T::two();
            Self { w: (m02 - m20) / s, x: (m01 + m10) / s, y: quarter * s, z: (m12 + m21) / s }
        } else {
            let s = (one + m22 - m00 - m11).sqrt() * T::two();
            Self { w: (m10 - m01) / s, x: (m02 + m20) / s, y: (m12 + m21) / s, z: quarter * s }
        };
        q.renormalized()
    }

    /// Attitude whose body z axis is `z_axis` and whose heading is `yaw`.
    pub fn from_z_axis_and_yaw(z_axis: Vec3<T>, yaw: T) -> Self {
        let z = z_axis.normalized().unwrap_or_else(Vec3::unit_z);
        let heading = Vec3::new(yaw.cos(), yaw.sin(), T::zero());
        let y = match z.cross(heading).normalized() {
            Some(y) => y,
            // Thrust axis horizontal and aligned with the heading.
            None => z.cross(Vec3::unit_z()).normalized().unwrap_or_else(Vec3::unit_y),
        };
        let x = y.cross(z);
        Self::from_basis(x, y, z)
    }

    pub fn norm(&self) -> T {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn renormalized(self) -> Self {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Self { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
        } else {
            Self::identity()
        }
    }

    pub fn inverse(&self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Rotates `v` from the local frame into the parent frame.
    pub fn rotate(&self, v: Vec3<T>) -> Vec3<T> {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * T::two();
        v + t * self.w + u.cross(t)
    }

    /// Rotates `v` from the parent frame into the local frame.
    pub fn inverse_rotate(&self, v: Vec3<T>) -> Vec3<T> {
        self.inverse().rotate(v)
    }

    pub fn x_axis(&self) -> Vec3<T> {
        self.rotate(Vec3::unit_x())
    }

    pub fn y_axis(&self) -> Vec3<T> {
        self.rotate(Vec3::unit_y())
    }

    pub fn z_axis(&self) -> Vec3<T> {
        self.rotate(Vec3::unit_z())
    }

    /// Heading of the body x axis projected onto the horizontal plane.
    pub fn yaw(&self) -> T {
        let x = self.x_axis();
        x.y.atan2(x.x)
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> T {
        let v = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        T::two() * v.atan2(self.w.abs())
    }

    pub fn angle_to(&self, other: &Self) -> T {
        (self.inverse() * *other).angle()
    }

    /// Spherical interpolation, `s = 0` gives `self` and `s = 1` gives `other`.
    pub fn slerp(&self, other: &Self, s: T) -> Self {
        let mut o = *other;
        let mut d = self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z;
        if d < T::zero() {
            o = Self { w: -o.w, x: -o.x, y: -o.y, z: -o.z };
            d = -d;
        }
        let (a, b) = if d > T::lit(0.9995) {
            (T::one() - s, s)
        } else {
            let theta = d.min(T::one()).acos();
            let sin = theta.sin();
            (((T::one() - s) * theta).sin() / sin, (s * theta).sin() / sin)
        };
        Self { w: self.w * a + o.w * b, x: self.x * a + o.x * b, y: self.y * a + o.y * b, z: self.z * a + o.z * b }
            .renormalized()
    }
}

impl<T: Real> Mul for Rotation<T> {
    type Output = Self;

    fn mul(self, r: Self) -> Self {
        Self {
            w: self.w * r.w - self.x * r.x - self.y * r.y - self.z * r.z,
            x: self.w * r.x + self.x * r.w + self.y * r.z - self.z * r.y,
            y: self.w * r.y - self.x * r.z + self.y * r.w + self.z * r.x,
            z: self.w * r.z + self.x * r.y - self.y * r.x + self.z * r.w,
        }
    }
}

/// Rigid transform from a local frame into its parent frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose<T> {
    pub rotation: Rotation<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> Default for Pose<T> {
    fn default() -> Self {
        Self::new(Rotation::identity(), Vec3::zero())
    }
}

impl<T: Real> Pose<T> {
    pub fn new(rotation: Rotation<T>, translation: Vec3<T>) -> Self {
        Self { rotation, translation }
    }

    /// Maps a point expressed in the local frame into the parent frame.
    pub fn transform_point(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.rotate(p) + self.translation
    }

    /// Maps a parent-frame point into the local frame.
    pub fn inverse_transform_point(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.inverse_rotate(p - self.translation)
    }

    pub fn transform_vector(&self, v: Vec3<T>) -> Vec3<T> {
        self.rotation.rotate(v)
    }

    pub fn inverse_transform_vector(&self, v: Vec3<T>) -> Vec3<T> {
        self.rotation.inverse_rotate(v)
    }
}
