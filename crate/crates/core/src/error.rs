use thiserror::Error;

/// Errors raised by the planner library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point has non-positive depth along the optical axis")]
    NonPositiveDepth,
    #[error("polynomial is identically zero")]
    AllCoefficientsZero,
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("time {t} outside primitive domain [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("no pyramid containing the query point could be inflated")]
    NotFound,
    #[error("query point projects outside the image")]
    OutOfFrustum,
    #[error("trajectory does not start inside the pyramid")]
    StartOutsidePyramid,
    #[error("horizontal direction to goal is degenerate")]
    DegenerateDirection,
    #[error("mass must be positive")]
    NonPositiveMass,
    #[error("motor command {0} outside [0, 1]")]
    CommandOutOfRange(f64),
    #[error("thrust {requested} N outside achievable range [{min}, {max}] N")]
    ThrustUnachievable { requested: f64, min: f64, max: f64 },
    #[error("hover throttle fit is non-positive at {0} V")]
    NonPositiveHoverFit(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid depth image: {0}")]
    InvalidDepthImage(String),
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("PFM format error: {0}")]
    Pfm(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
