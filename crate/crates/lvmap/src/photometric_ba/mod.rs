//! Photometric visual bundle adjustment with a fixed LiDAR scene prior.
//!
//! Scene points carry a position and plane normal estimated by the LiDAR
//! stage and are never optimized here. Each cost item warps a reference
//! patch into a target frame through the plane-induced homography and
//! penalizes the exposure-normalized RGB difference. The solver estimates
//! a 6-DoF pose and a relative exposure time per camera frame with
//! coarse-to-fine sparse Levenberg-Marquardt.

mod coarse_to_fine;
mod homography;
mod problem;
mod residual;
mod solver;

pub use coarse_to_fine::{coarse_to_fine, VisualBaInputs};
pub use homography::{homography, warp_patch, DEPTH_EPS};
pub use problem::{build_problem, CostItem};
pub use residual::{photometric_residual, residual_jacobians, ResidualEval};
pub use solver::{lm_solve, IterationRecord, SolveError, SolveReport};

use serde::{Deserialize, Serialize};

use crate::geometry::Pose;

/// Per-frame optimization variable: camera pose plus relative exposure
/// time. Exposure is strictly positive; the solver works in log space.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CameraState {
    pub pose: Pose,
    pub exposure: f64,
}

impl CameraState {
    pub fn new(pose: Pose, exposure: f64) -> Self {
        debug_assert!(exposure > 0.0);
        Self { pose, exposure }
    }
}

/// Levenberg-Marquardt and problem-construction parameters for the visual
/// BA stage.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub cost_rel_tol: f64,
    pub step_tol: f64,
    /// Huber threshold in normalized radiance units.
    pub huber_threshold: f64,
    /// Pyramid levels for coarse-to-fine.
    pub pyramid_levels: usize,
    /// Patch side length N (patch has N^2 pixels).
    pub patch_size: usize,
    /// Consecutive rejected steps before giving up on a level.
    pub max_reject: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            lambda_init: 1e-4,
            lambda_up: 10.0,
            lambda_down: 0.5,
            cost_rel_tol: 1e-6,
            step_tol: 1e-6,
            huber_threshold: 0.05,
            pyramid_levels: 3,
            patch_size: 8,
            max_reject: 8,
        }
    }
}
