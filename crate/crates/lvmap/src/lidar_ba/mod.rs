//! LiDAR bundle adjustment: plane-feature voxel map construction,
//! point-to-plane pose optimization, and propagation of the pose
//! correction to the camera trajectory.

mod map;
mod optimize;

pub use map::{build_plane_voxel_map, PlaneMapParams, PlaneVoxel, PlaneVoxelMap};
pub use optimize::{
    optimize_lidar_poses, propagate_camera_pose, LidarBaParams, LidarBaResult, LidarIteration,
    LidarLmParams, Termination,
};

use nalgebra::Vector3;
use thiserror::Error;

use crate::geometry::Pose;

/// Integer voxel key: `floor(p / voxel_size)` per axis. Floor (not
/// truncation) so negative coordinates bin correctly.
pub type VoxelKey = (i64, i64, i64);

pub fn voxel_key(p: &Vector3<f64>, voxel_size: f64) -> VoxelKey {
    (
        (p.x / voxel_size).floor() as i64,
        (p.y / voxel_size).floor() as i64,
        (p.z / voxel_size).floor() as i64,
    )
}

/// One LiDAR scan: points in the sensor frame plus a rough initial pose.
#[derive(Clone, Debug)]
pub struct LidarScan {
    pub points: Vec<Vector3<f64>>,
    pub timestamp: f64,
    pub init_pose: Pose,
}

/// A planar feature extracted from the voxel map, in world frame.
/// `thickness` is the off-plane standard deviation of the member points.
#[derive(Clone, Debug)]
pub struct PlaneFeature {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub thickness: f64,
    pub voxel_key: VoxelKey,
}

#[derive(Debug, Error)]
pub enum LidarBaError {
    #[error("no scans provided")]
    EmptyInput,
    #[error("scan/pose count mismatch: {scans} scans, {poses} poses")]
    CountMismatch { scans: usize, poses: usize },
    #[error("scan {0} contains no points")]
    EmptyScan(usize),
}

/// Index of the LiDAR frame nearest in time to `timestamp`; ties broken
/// toward the earlier frame.
pub fn nearest_lidar_index(timestamp: f64, lidar_timestamps: &[f64]) -> usize {
    let mut best = 0;
    let mut best_diff = f64::INFINITY;
    for (i, &t) in lidar_timestamps.iter().enumerate() {
        let diff = (t - timestamp).abs();
        if diff < best_diff {
            best_diff = diff;
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn voxel_key_floors_negative_coordinates() {
        let k = voxel_key(&Vector3::new(-0.1, 0.1, 1.9), 1.0);
        assert_eq!(k, (-1, 0, 1));
        let k = voxel_key(&Vector3::new(-1.0, -0.5, 2.0), 0.5);
        assert_eq!(k, (-2, -1, 4));
    }

    #[test]
    fn nearest_index_ties_break_earlier() {
        let ts = [0.0, 1.0, 2.0];
        assert_eq!(nearest_lidar_index(0.5, &ts), 0);
        assert_eq!(nearest_lidar_index(0.6, &ts), 1);
        assert_eq!(nearest_lidar_index(2.4, &ts), 2);
    }
}
