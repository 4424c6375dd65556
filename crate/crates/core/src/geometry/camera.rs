use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Pinhole intrinsics. The camera looks along +z with x right and y down;
/// pixel `(i, j)` has its center at `(u, v) = (i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        let intr = Self { fx, fy, cx, cy, width, height };
        intr.validate()?;
        Ok(intr)
    }

    /// Intrinsics with the principal point at the image center and the given
    /// horizontal field of view in radians.
    pub fn from_hfov(width: usize, height: usize, hfov: T) -> Result<Self> {
        let w = T::from_usize(width).unwrap_or_else(T::zero);
        let h = T::from_usize(height).unwrap_or_else(T::zero);
        let f = w * T::half() / (hfov * T::half()).tan();
        Self::new(f, f, (w - T::one()) * T::half(), (h - T::one()) * T::half(), width, height)
    }

    pub fn validate(&self) -> Result<()> {
        let w = T::from_usize(self.width).unwrap_or_else(T::zero);
        let h = T::from_usize(self.height).unwrap_or_else(T::zero);
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidIntrinsics("image dimensions must be positive".into()));
        }
        if !(self.fx > T::zero() && self.fy > T::zero()) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::InvalidIntrinsics("focal lengths must be positive".into()));
        }
        if !(self.cx > T::zero() && self.cx < w && self.cy > T::zero() && self.cy < h) {
            return Err(Error::InvalidIntrinsics("principal point must lie inside the image".into()));
        }
        Ok(())
    }

    pub fn width_f(&self) -> T {
        T::from_usize(self.width).unwrap_or_else(T::zero)
    }

    pub fn height_f(&self) -> T {
        T::from_usize(self.height).unwrap_or_else(T::zero)
    }

    /// True when `(u, v)` falls on a pixel of the image.
    pub fn contains(&self, u: T, v: T) -> bool {
        let half = T::half();
        u >= -half && u < self.width_f() - half && v >= -half && v < self.height_f() - half
    }

    /// Pixel whose footprint contains `(u, v)`.
    pub fn pixel_at(&self, u: T, v: T) -> Option<(usize, usize)> {
        if !self.contains(u, v) {
            return None;
        }
        let i = (u + T::half()).floor().to_usize()?.min(self.width - 1);
        let j = (v + T::half()).floor().to_usize()?.min(self.height - 1);
        Some((i, j))
    }

    /// Unit-depth ray through `(u, v)`: the camera-frame point at depth 1.
    pub fn ray(&self, u: T, v: T) -> Vec3<T> {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, T::one())
    }
}

/// Projects a camera-frame point to pixel coordinates.
pub fn project<T: Real>(point_cam: Vec3<T>, intr: &CameraIntrinsics<T>) -> Result<(T, T)> {
    if !(point_cam.z > T::zero()) {
        return Err(Error::NonPositiveDepth);
    }
    Ok((intr.fx * point_cam.x / point_cam.z + intr.cx, intr.fy * point_cam.y / point_cam.z + intr.cy))
}

/// Inverse of [`project`] for a planar depth along the optical axis.
pub fn back_project<T: Real>(u: T, v: T, depth: T, intr: &CameraIntrinsics<T>) -> Result<Vec3<T>> {
    if !(depth > T::zero()) {
        return Err(Error::NonPositiveDepth);
    }
    Ok(intr.ray(u, v) * depth)
}
