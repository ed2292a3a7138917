use log::{debug, warn};

use crate::geometry::{Image, Intrinsics, Pyramid};
use crate::global_visibility::{
    determine_global_visibility, select_global_scene_points, VisibilityVoxelMap,
};
use crate::lidar_ba::PlaneFeature;
use crate::scene_points::{
    determine_local_visibility, generate_local_scene_points, window_around, ScenePointConfig,
    VisibilityRecord,
};

use super::problem::build_problem;
use super::solver::{lm_solve, SolveError, SolveReport};
use super::{CameraState, SolverConfig};

/// Everything the visual BA consumes besides the camera states.
pub struct VisualBaInputs<'a> {
    /// LiDAR plane features (fixed scene prior).
    pub features: &'a [PlaneFeature],
    /// One image pyramid per camera frame, all with the same level count.
    pub pyramids: &'a [Pyramid],
    /// Global visibility map; `None` disables global scene points.
    pub visibility_map: Option<&'a VisibilityVoxelMap>,
    pub sp_cfg: ScenePointConfig,
    /// When false, all exposures stay at their initial values.
    pub optimize_exposures: bool,
}

/// Coarse-to-fine visual BA: from the coarsest pyramid level down to full
/// resolution, regenerate scene points and visibility at the current state
/// estimates, build the photometric problem, and run LM. Levels that
/// produce no cost items are skipped with a warning.
pub fn coarse_to_fine(
    states: &mut [CameraState],
    inputs: &VisualBaInputs,
    cfg: &SolverConfig,
) -> Result<Vec<SolveReport>, SolveError> {
    assert_eq!(states.len(), inputs.pyramids.len());
    let n_levels = cfg
        .pyramid_levels
        .min(inputs.pyramids.iter().map(|p| p.num_levels()).min().unwrap_or(1));
    let mut reports = Vec::new();
    for level in (0..n_levels).rev() {
        let images: Vec<&Image> = inputs.pyramids.iter().map(|p| p.image(level)).collect();
        let k: &Intrinsics = inputs.pyramids[0].intrinsics(level);
        let records = gather_visibility(states, inputs, &images, k, cfg.patch_size);
        let items = build_problem(states, &records, &images, k, level, cfg.patch_size);
        debug!(
            "level {level}: {} records, {} cost items",
            records.len(),
            items.len()
        );
        if items.is_empty() {
            warn!("level {level}: no cost items; skipping");
            continue;
        }
        let report = lm_solve(
            states,
            &items,
            &images,
            k,
            cfg,
            inputs.optimize_exposures,
            level,
        )?;
        debug!(
            "level {level}: cost {} -> {} ({:?})",
            report.initial_cost, report.final_cost, report.termination
        );
        reports.push(report);
    }
    Ok(reports)
}

/// Scene point generation and visibility determination at the current
/// states: local points for every frame, plus global points and their
/// voxel-map targets when enabled.
pub fn gather_visibility(
    states: &[CameraState],
    inputs: &VisualBaInputs,
    images: &[&Image],
    k: &Intrinsics,
    patch_size: usize,
) -> Vec<VisibilityRecord> {
    let n_frames = states.len();
    let mut local_points = Vec::new();
    for (frame, state) in states.iter().enumerate() {
        local_points.extend(generate_local_scene_points(
            frame,
            images[frame],
            k,
            &state.pose,
            inputs.features,
            &inputs.sp_cfg,
        ));
    }

    let mut records = Vec::new();
    for sp in &local_points {
        let window = window_around(sp.ref_frame, n_frames, inputs.sp_cfg.window_size);
        let rec = determine_local_visibility(
            sp,
            &window,
            states,
            images,
            k,
            patch_size,
            &inputs.sp_cfg,
        );
        if !rec.targets.is_empty() {
            records.push(rec);
        }
    }

    if let Some(vmap) = inputs.visibility_map {
        let positions: Vec<_> = states.iter().map(|s| s.pose.translation()).collect();
        let globals = select_global_scene_points(&local_points, vmap, &positions);
        for sp in &globals {
            let mut rec = determine_global_visibility(
                sp,
                vmap,
                states,
                images,
                k,
                patch_size,
                &inputs.sp_cfg,
            );
            // Local records already cover the sliding window; keep only
            // targets outside it to avoid duplicating cost terms.
            rec.targets.retain(|&j| {
                (j as i64 - sp.ref_frame as i64).unsigned_abs() as usize
                    > inputs.sp_cfg.window_size
            });
            if !rec.targets.is_empty() {
                records.push(rec);
            }
        }
    }
    records
}
