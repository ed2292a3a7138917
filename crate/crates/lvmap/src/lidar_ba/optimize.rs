use nalgebra::{Matrix3, Matrix6, RowVector6, Vector6};
use serde::{Deserialize, Serialize};

use super::map::{build_plane_voxel_map, PlaneMapParams, PlaneVoxelMap};
use super::{LidarBaError, LidarScan, PlaneFeature};
use crate::geometry::{skew, Pose};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LidarLmParams {
    pub max_iters: usize,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub cost_rel_tol: f64,
    pub step_tol: f64,
    /// Consecutive rejected steps before declaring divergence.
    pub max_reject: usize,
}

impl Default for LidarLmParams {
    fn default() -> Self {
        Self {
            max_iters: 30,
            lambda_init: 1e-4,
            lambda_up: 10.0,
            lambda_down: 0.5,
            cost_rel_tol: 1e-10,
            step_tol: 1e-10,
            max_reject: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LidarBaParams {
    pub map: PlaneMapParams,
    pub lm: LidarLmParams,
    /// Alternations of plane re-fit and pose LM.
    pub outer_iters: usize,
    /// Stop alternating once the largest pose change falls below this.
    pub outer_pose_tol: f64,
}

impl Default for LidarBaParams {
    fn default() -> Self {
        Self {
            map: PlaneMapParams::default(),
            lm: LidarLmParams::default(),
            outer_iters: 8,
            outer_pose_tol: 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIterations,
    Diverged,
}

/// One LM step record, kept for the optimization log.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LidarIteration {
    pub outer: usize,
    pub iteration: usize,
    pub cost: f64,
    pub lambda: f64,
    pub step_norm: f64,
    pub residual_count: usize,
    pub accepted: bool,
}

#[derive(Clone, Debug)]
pub struct LidarBaResult {
    pub poses: Vec<Pose>,
    pub features: Vec<PlaneFeature>,
    pub iterations: Vec<LidarIteration>,
    pub termination: Termination,
}

/// Eq. update of a camera pose after the LiDAR poses moved:
/// `T̂_C = T̂_L · T_L⁻¹ · T_C`, where `T_L` is the pre-optimization pose of
/// the LiDAR frame nearest in time to the camera frame.
pub fn propagate_camera_pose(t_c: &Pose, t_l: &Pose, t_l_hat: &Pose) -> Pose {
    t_l_hat.compose(&t_l.inverse()).compose(t_c)
}

/// Optimize scan poses by minimizing point-to-plane distances against the
/// plane voxel map, alternating plane re-fits with LM pose updates. The
/// first scan pose is held fixed as the gauge.
pub fn optimize_lidar_poses(
    scans: &[LidarScan],
    init_poses: &[Pose],
    params: &LidarBaParams,
) -> Result<LidarBaResult, LidarBaError> {
    if scans.is_empty() {
        return Err(LidarBaError::EmptyInput);
    }
    if scans.len() != init_poses.len() {
        return Err(LidarBaError::CountMismatch {
            scans: scans.len(),
            poses: init_poses.len(),
        });
    }

    let mut poses = init_poses.to_vec();
    let mut iterations = Vec::new();
    let mut termination = Termination::Converged;

    for outer in 0..params.outer_iters {
        let map = build_plane_voxel_map(scans, &poses, &params.map)?;
        if map.is_empty() || scans.len() < 2 {
            break;
        }
        let before = poses.clone();
        let term = lm_pass(scans, &mut poses, &map, &params.lm, outer, &mut iterations);
        if term == Termination::Diverged {
            termination = Termination::Diverged;
            break;
        }
        let max_change = poses
            .iter()
            .zip(&before)
            .map(|(a, b)| a.translation_distance_to(b) + a.rotation_angle_to(b))
            .fold(0.0, f64::max);
        if max_change < params.outer_pose_tol {
            break;
        }
        if outer + 1 == params.outer_iters {
            termination = Termination::MaxIterations;
        }
    }

    // Final re-fit at the optimized poses for feature export.
    let map = build_plane_voxel_map(scans, &poses, &params.map)?;
    let features = map
        .voxels
        .iter()
        .map(|(key, v)| PlaneFeature {
            position: v.centroid,
            normal: v.normal,
            thickness: v.thickness,
            voxel_key: *key,
        })
        .collect();

    Ok(LidarBaResult {
        poses,
        features,
        iterations,
        termination,
    })
}

/// Total point-to-plane squared error, including the gauge scan.
fn total_cost(scans: &[LidarScan], poses: &[Pose], map: &PlaneVoxelMap) -> (f64, usize) {
    let mut cost = 0.0;
    let mut count = 0;
    for v in map.voxels.values() {
        for &(s, i) in &v.members {
            let w = poses[s].transform_point(&scans[s].points[i]);
            let r = v.normal.dot(&(w - v.centroid));
            cost += r * r;
            count += 1;
        }
    }
    (cost, count)
}

/// One LM descent with a fixed plane map. Scan 0 is not a free variable;
/// the remaining scans decouple into independent 6x6 systems because every
/// residual touches exactly one scan.
fn lm_pass(
    scans: &[LidarScan],
    poses: &mut Vec<Pose>,
    map: &PlaneVoxelMap,
    lm: &LidarLmParams,
    outer: usize,
    iterations: &mut Vec<LidarIteration>,
) -> Termination {
    let n_scans = scans.len();
    let (mut current_cost, residual_count) = total_cost(scans, poses, map);
    let mut lambda = lm.lambda_init;
    let mut rejects = 0;

    for iter in 0..lm.max_iters {
        // Per-scan normal equations.
        let mut h = vec![Matrix6::<f64>::zeros(); n_scans];
        let mut g = vec![Vector6::<f64>::zeros(); n_scans];
        for v in map.voxels.values() {
            for &(s, i) in &v.members {
                if s == 0 {
                    continue;
                }
                let q = &scans[s].points[i];
                let rot: Matrix3<f64> = poses[s].rotation_matrix();
                let w = poses[s].transform_point(q);
                let r = v.normal.dot(&(w - v.centroid));
                let n_r = v.normal.transpose() * rot;
                let d_rho = n_r;
                let d_phi = -n_r * skew(q);
                let mut jac = RowVector6::zeros();
                jac.fixed_view_mut::<1, 3>(0, 0).copy_from(&d_rho);
                jac.fixed_view_mut::<1, 3>(0, 3).copy_from(&d_phi);
                h[s] += jac.transpose() * jac;
                g[s] += jac.transpose() * r;
            }
        }

        // Damped solves, one block per free scan.
        let mut trial = poses.clone();
        let mut step_norm_sq = 0.0;
        let mut solvable = true;
        for s in 1..n_scans {
            let mut damped = h[s];
            for d in 0..6 {
                damped[(d, d)] += lambda * damped[(d, d)].max(1e-12);
            }
            match damped.cholesky() {
                Some(chol) => {
                    let delta = chol.solve(&(-g[s]));
                    step_norm_sq += delta.norm_squared();
                    trial[s] = poses[s].retract(&delta);
                }
                None => {
                    solvable = false;
                    break;
                }
            }
        }
        let step_norm = step_norm_sq.sqrt();

        let (trial_cost, _) = if solvable {
            total_cost(scans, &trial, map)
        } else {
            (f64::INFINITY, 0)
        };

        let accepted = trial_cost < current_cost;
        iterations.push(LidarIteration {
            outer,
            iteration: iter,
            cost: if accepted { trial_cost } else { current_cost },
            lambda,
            step_norm,
            residual_count,
            accepted,
        });

        if accepted {
            let rel_change = (current_cost - trial_cost) / current_cost.max(1e-300);
            *poses = trial;
            current_cost = trial_cost;
            lambda *= lm.lambda_down;
            rejects = 0;
            if rel_change < lm.cost_rel_tol || step_norm < lm.step_tol {
                return Termination::Converged;
            }
        } else {
            lambda *= lm.lambda_up;
            rejects += 1;
            if rejects >= lm.max_reject {
                return Termination::Diverged;
            }
        }
    }
    Termination::MaxIterations
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{UnitQuaternion, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut impl Rng) -> Pose {
        let axis = Vector3::new(
            rng.gen_range(-1.0f64..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        Pose::new(
            UnitQuaternion::from_scaled_axis(axis),
            Vector3::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            ),
        )
    }

    #[test]
    fn propagate_without_correction_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t_c = random_pose(&mut rng);
        let t_l = random_pose(&mut rng);
        let out = propagate_camera_pose(&t_c, &t_l, &t_l);
        assert_abs_diff_eq!(out.to_homogeneous(), t_c.to_homogeneous(), epsilon = 1e-12);
    }

    #[test]
    fn propagate_coincident_frames_inherit_correction() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let t_l = random_pose(&mut rng);
        let t_l_hat = random_pose(&mut rng);
        let out = propagate_camera_pose(&t_l, &t_l, &t_l_hat);
        assert_abs_diff_eq!(
            out.to_homogeneous(),
            t_l_hat.to_homogeneous(),
            epsilon = 1e-12
        );
    }

    // Oracle: 4x4 homogeneous matrix product.
    #[test]
    fn propagate_matches_homogeneous_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let t_c = random_pose(&mut rng);
            let t_l = random_pose(&mut rng);
            let t_l_hat = random_pose(&mut rng);
            let out = propagate_camera_pose(&t_c, &t_l, &t_l_hat);
            let oracle = t_l_hat.to_homogeneous()
                * t_l.to_homogeneous().try_inverse().unwrap()
                * t_c.to_homogeneous();
            assert_abs_diff_eq!(out.to_homogeneous(), oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_scan_returns_unchanged() {
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                pts.push(Vector3::new(i as f64 * 0.1, j as f64 * 0.1, 0.0));
            }
        }
        let scans = vec![LidarScan {
            points: pts,
            timestamp: 0.0,
            init_pose: Pose::identity(),
        }];
        let init = vec![Pose::new(
            UnitQuaternion::identity(),
            Vector3::new(0.0, 0.0, 2.0),
        )];
        let result = optimize_lidar_poses(&scans, &init, &LidarBaParams::default()).unwrap();
        assert_abs_diff_eq!(
            result.poses[0].to_homogeneous(),
            init[0].to_homogeneous(),
            epsilon = 1e-15
        );
    }
}
