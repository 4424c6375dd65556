//! Memoryless, depth-image based collision-avoidance planning for
//! multicopters.
//!
//! Candidate quintic motion primitives are sampled inside the camera's field
//! of view, screened for progress, thrust feasibility and per-axis speed, and
//! finally checked for collisions against free-space pyramids inflated
//! directly from the latest depth image. A deterministic closed-loop
//! simulator with battery droop and an adaptive thrust model exercises the
//! planner in synthetic forests.
//!
//! The math modules are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which the planner and simulator use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod planner;
pub mod poly;
pub mod pyramid;
pub mod scalar;
pub mod sim;
pub mod thrust;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::{Real, STANDARD_GRAVITY};

pub type Vec3d = geometry::Vec3<f64>;
pub type Rotationd = geometry::Rotation<f64>;
pub type Posed = geometry::Pose<f64>;
pub type Intrinsics = geometry::CameraIntrinsics<f64>;
pub type Primitive = trajectory::QuinticPrimitive<f64>;
pub type Limits = trajectory::FeasibilityLimits<f64>;
