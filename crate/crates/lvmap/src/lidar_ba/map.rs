use std::collections::BTreeMap;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::{voxel_key, LidarBaError, LidarScan, VoxelKey};
use crate::geometry::Pose;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PlaneMapParams {
    pub voxel_size: f64,
    /// Minimum points in a voxel before a plane fit is attempted.
    pub min_points: usize,
    /// Planarity test: `lambda_min / lambda_mid` must stay below this.
    pub max_eigen_ratio: f64,
    /// Planarity test: off-plane standard deviation cap, meters.
    pub max_thickness: f64,
}

impl Default for PlaneMapParams {
    fn default() -> Self {
        Self {
            voxel_size: 1.0,
            min_points: 10,
            max_eigen_ratio: 0.1,
            max_thickness: 0.05,
        }
    }
}

/// A voxel that passed the planarity test: fitted plane plus the member
/// points that produced it, referenced as (scan index, point index).
#[derive(Clone, Debug)]
pub struct PlaneVoxel {
    pub centroid: Vector3<f64>,
    pub normal: Vector3<f64>,
    /// Off-plane standard deviation, `sqrt(lambda_min)`.
    pub thickness: f64,
    pub members: Vec<(usize, usize)>,
}

/// Voxel map of fitted plane features keyed by integer voxel coordinates.
#[derive(Clone, Debug, Default)]
pub struct PlaneVoxelMap {
    pub voxel_size: f64,
    pub voxels: BTreeMap<VoxelKey, PlaneVoxel>,
}

impl PlaneVoxelMap {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }
}

/// Hash world-frame scan points into voxels and fit a plane per voxel.
/// Voxels with fewer than `min_points` points or failing the planarity
/// test are discarded. Normals are oriented toward the origin of the
/// first scan observing the voxel.
pub fn build_plane_voxel_map(
    scans: &[LidarScan],
    poses: &[Pose],
    params: &PlaneMapParams,
) -> Result<PlaneVoxelMap, LidarBaError> {
    if scans.is_empty() {
        return Err(LidarBaError::EmptyInput);
    }
    if scans.len() != poses.len() {
        return Err(LidarBaError::CountMismatch {
            scans: scans.len(),
            poses: poses.len(),
        });
    }
    for (i, scan) in scans.iter().enumerate() {
        if scan.points.is_empty() {
            return Err(LidarBaError::EmptyScan(i));
        }
    }

    let mut bins: BTreeMap<VoxelKey, Vec<(usize, usize, Vector3<f64>)>> = BTreeMap::new();
    for (s, (scan, pose)) in scans.iter().zip(poses).enumerate() {
        for (i, q) in scan.points.iter().enumerate() {
            let w = pose.transform_point(q);
            bins.entry(voxel_key(&w, params.voxel_size))
                .or_default()
                .push((s, i, w));
        }
    }

    let mut voxels = BTreeMap::new();
    for (key, pts) in bins {
        if pts.len() < params.min_points {
            continue;
        }
        let Some(fit) = fit_plane(pts.iter().map(|(_, _, w)| w), pts.len()) else {
            continue;
        };
        let (centroid, mut normal, eigenvalues) = fit;
        let (l_min, l_mid) = (eigenvalues[0], eigenvalues[1]);
        if l_mid > 0.0 && l_min / l_mid >= params.max_eigen_ratio {
            continue;
        }
        if l_min >= params.max_thickness * params.max_thickness {
            continue;
        }
        let first_scan = pts.iter().map(|&(s, _, _)| s).min().unwrap();
        let toward = poses[first_scan].translation() - centroid;
        if normal.dot(&toward) < 0.0 {
            normal = -normal;
        }
        voxels.insert(
            key,
            PlaneVoxel {
                centroid,
                normal,
                thickness: l_min.max(0.0).sqrt(),
                members: pts.iter().map(|&(s, i, _)| (s, i)).collect(),
            },
        );
    }

    Ok(PlaneVoxelMap {
        voxel_size: params.voxel_size,
        voxels,
    })
}

/// Centroid plus least-eigenvector normal of the scatter matrix; returns
/// eigenvalues sorted ascending.
fn fit_plane<'a>(
    points: impl Iterator<Item = &'a Vector3<f64>>,
    n: usize,
) -> Option<(Vector3<f64>, Vector3<f64>, [f64; 3])> {
    if n < 3 {
        return None;
    }
    let pts: Vec<&Vector3<f64>> = points.collect();
    let centroid = pts.iter().fold(Vector3::zeros(), |acc, p| acc + **p) / n as f64;
    let mut cov = Matrix3::zeros();
    for p in &pts {
        let d = **p - centroid;
        cov += d * d.transpose();
    }
    cov /= n as f64;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = [
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    ];
    let normal = eig.eigenvectors.column(order[0]).into_owned();
    let norm = normal.norm();
    if norm < 1e-12 {
        return None;
    }
    Some((centroid, normal / norm, eigenvalues))
}
