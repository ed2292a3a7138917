//! LiDAR-assisted global visibility: a voxel map records which camera
//! frames can see each voxel, inferred from the positions of the LiDAR
//! scans that observed it. Occlusion is resolved by construction — a
//! camera behind a wall is never proximate to a scan that saw the voxel —
//! so no ray casting is needed.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{project, Image, Intrinsics, Pose};
use crate::lidar_ba::{voxel_key, LidarScan, VoxelKey};
use crate::photometric_ba::CameraState;
use crate::scene_points::{
    passes_visibility_checks, Patch, ScenePoint, ScenePointConfig, VisibilityRecord,
};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GlobalVisibilityConfig {
    pub voxel_size: f64,
    /// Camera frames within this distance of a scan position inherit that
    /// scan's voxel visibility, meters.
    pub proximity: f64,
}

impl Default for GlobalVisibilityConfig {
    fn default() -> Self {
        Self {
            voxel_size: 0.5,
            proximity: 1.0,
        }
    }
}

/// Voxel grid storing, per voxel, the sorted set of camera frame indices
/// that can observe it.
#[derive(Clone, Debug, Default)]
pub struct VisibilityVoxelMap {
    pub voxel_size: f64,
    map: BTreeMap<VoxelKey, Vec<usize>>,
}

impl VisibilityVoxelMap {
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Camera frames stored for the voxel containing `p`.
    pub fn frames_for(&self, p: &Vector3<f64>) -> Option<&[usize]> {
        self.map
            .get(&voxel_key(p, self.voxel_size))
            .map(|v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VoxelKey, &Vec<usize>)> {
        self.map.iter()
    }
}

/// Build the visibility voxel map from optimized LiDAR poses: every
/// world-frame scan point marks its voxel visible from the scan position,
/// and each scan position contributes the camera frames within
/// `proximity` of it. Voxels that end up with no camera are dropped.
pub fn build_visibility_map(
    scans: &[LidarScan],
    lidar_poses: &[Pose],
    camera_positions: &[Vector3<f64>],
    cfg: &GlobalVisibilityConfig,
) -> VisibilityVoxelMap {
    let mut map: BTreeMap<VoxelKey, BTreeSet<usize>> = BTreeMap::new();
    for (scan, pose) in scans.iter().zip(lidar_poses) {
        let scan_pos = pose.translation();
        let near_cameras: Vec<usize> = camera_positions
            .iter()
            .enumerate()
            .filter(|(_, c)| (*c - scan_pos).norm() <= cfg.proximity)
            .map(|(i, _)| i)
            .collect();
        if near_cameras.is_empty() {
            continue;
        }
        for p in &scan.points {
            let w = pose.transform_point(p);
            map.entry(voxel_key(&w, cfg.voxel_size))
                .or_default()
                .extend(near_cameras.iter().copied());
        }
    }
    VisibilityVoxelMap {
        voxel_size: cfg.voxel_size,
        map: map
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().collect()))
            .collect(),
    }
}

/// Observation-quality score of a scene point from its reference frame:
/// `s = nᵀ(p - t_r) / |p - t_r|²` — the projected area of a unit surface
/// element. `None` when the point coincides with the camera.
pub fn observation_score(sp: &ScenePoint, t_r: &Vector3<f64>) -> Option<f64> {
    let rel = sp.position - t_r;
    let d2 = rel.norm_squared();
    if d2 < 1e-18 {
        return None;
    }
    Some(sp.normal.dot(&rel) / d2)
}

/// Pick one global scene point per voxel: the local point with the best
/// |observation score| against its own reference frame. Ties break toward
/// the lower reference frame index. Points in voxels no local point maps
/// to simply never compete.
pub fn select_global_scene_points(
    local_points: &[ScenePoint],
    vmap: &VisibilityVoxelMap,
    ref_positions: &[Vector3<f64>],
) -> Vec<ScenePoint> {
    let mut best: BTreeMap<VoxelKey, (f64, usize, ScenePoint)> = BTreeMap::new();
    for sp in local_points {
        let Some(score) = observation_score(sp, &ref_positions[sp.ref_frame]) else {
            continue;
        };
        let score = score.abs();
        let key = voxel_key(&sp.position, vmap.voxel_size);
        match best.get(&key) {
            Some(&(s, rf, _)) if s > score || (s == score && rf <= sp.ref_frame) => {}
            _ => {
                best.insert(key, (score, sp.ref_frame, *sp));
            }
        }
    }
    best.into_values()
        .map(|(_, _, mut sp)| {
            sp.is_global = true;
            sp
        })
        .collect()
}

/// Global visibility of one global scene point: candidate targets are the
/// frames stored in the point's voxel (no ray casting), filtered by the
/// same per-candidate checks as local visibility. An absent voxel yields
/// an empty record.
#[allow(clippy::too_many_arguments)]
pub fn determine_global_visibility(
    sp: &ScenePoint,
    vmap: &VisibilityVoxelMap,
    states: &[CameraState],
    images: &[&Image],
    k: &Intrinsics,
    patch_size: usize,
    cfg: &ScenePointConfig,
) -> VisibilityRecord {
    debug_assert!(sp.is_global);
    let mut targets = Vec::new();
    if let Some(candidates) = vmap.frames_for(&sp.position) {
        let ref_state = &states[sp.ref_frame];
        if let Some(u_r) = project(k, &ref_state.pose, &sp.position) {
            if let Some(ref_patch) = Patch::build(images[sp.ref_frame], &u_r, patch_size) {
                for &j in candidates {
                    if j == sp.ref_frame {
                        continue;
                    }
                    if passes_visibility_checks(
                        sp, &ref_patch, ref_state, j, states, images, k, cfg,
                    ) {
                        targets.push(j);
                    }
                }
            }
        }
    }
    VisibilityRecord {
        point: *sp,
        targets,
    }
}
