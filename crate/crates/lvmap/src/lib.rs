//! Global LiDAR-visual bundle adjustment for RGB point cloud mapping.
//!
//! The pipeline runs in two stages. A LiDAR bundle adjustment first refines
//! scan poses against plane features extracted from a voxel map, and the
//! correction is propagated to the camera trajectory. A photometric visual
//! bundle adjustment then refines camera poses and per-frame relative
//! exposure times by minimizing patch intensity differences between frames,
//! using the LiDAR planar points as fixed scene structure. Visibility between
//! distant frames is resolved without ray casting through a LiDAR-derived
//! visibility voxel map.
//!
//! The crate also ships the evaluation toolchain: point cloud colorization
//! into exposure-normalized radiance, z-buffer splat rendering, PSNR/SSIM
//! scoring, and a deterministic synthetic scene generator used as the test
//! oracle for all of the above.

pub mod colorize_eval;
pub mod config;
pub mod dataset;
pub mod geometry;
pub mod global_visibility;
pub mod lidar_ba;
pub mod photometric_ba;
pub mod pipeline;
pub mod scene_points;
pub mod synthetic;

pub use geometry::{Image, Intrinsics, Pose, Pyramid};
