//! Vectors, rotations, the pinhole camera model and depth images.

mod camera;
mod depth;
mod rotation;
mod vec3;

pub use camera::{back_project, project, CameraIntrinsics};
pub use depth::DepthImage;
pub use rotation::{Pose, Rotation};
pub use vec3::Vec3;

use crate::scalar::Real;

/// Rotation taking camera-frame vectors (x right, y down, z forward) into a
/// body frame with x forward, y left, z up.
pub fn camera_to_body<T: Real>() -> Rotation<T> {
    Rotation::from_basis(-Vec3::unit_y(), -Vec3::unit_z(), Vec3::unit_x())
}
