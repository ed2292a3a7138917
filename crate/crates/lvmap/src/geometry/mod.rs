//! Shared geometric primitives: SE(3) poses, pinhole projection, images,
//! bilinear sampling and box-filter pyramids.
//!
//! Conventions used throughout the crate:
//! - Poses are world-from-sensor: `x_world = R * x_sensor + t`.
//! - Integer pixel coordinate `(i, j)` is the center of pixel `(i, j)`.
//! - Color channels are RGB floats in `[0, 1]`.

mod camera;
mod image;
mod pose;
mod pyramid;

pub use camera::{project, project_with_depth, Intrinsics, Z_MIN};
pub(crate) use image::luma;
pub use image::{Image, Rgb};
pub use pose::{se3_exp, skew, Pose};
pub use pyramid::{build_pyramid, Pyramid, PyramidError};
