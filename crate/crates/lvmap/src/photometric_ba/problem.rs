use crate::geometry::{project, Image, Intrinsics};
use crate::scene_points::{Patch, ScenePoint, VisibilityRecord};

use super::CameraState;

/// One term of the photometric cost: a scene point observed from its
/// reference frame and re-observed in one target frame.
#[derive(Clone, Debug)]
pub struct CostItem {
    pub point: ScenePoint,
    pub ref_frame: usize,
    pub target_frame: usize,
    pub patch: Patch,
    pub level: usize,
}

/// Expand visibility records into cost items at one pyramid level: one
/// item per (scene point, target frame) pair, with the reference patch
/// regenerated at this level's resolution and current states.
pub fn build_problem(
    states: &[CameraState],
    records: &[VisibilityRecord],
    images: &[&Image],
    k: &Intrinsics,
    level: usize,
    patch_size: usize,
) -> Vec<CostItem> {
    let mut items = Vec::new();
    for record in records {
        let sp = &record.point;
        if record.targets.is_empty() {
            continue;
        }
        let Some(u_r) = project(k, &states[sp.ref_frame].pose, &sp.position) else {
            continue;
        };
        let Some(patch) = Patch::build(images[sp.ref_frame], &u_r, patch_size) else {
            continue;
        };
        for &target in &record.targets {
            debug_assert_ne!(target, sp.ref_frame);
            items.push(CostItem {
                point: *sp,
                ref_frame: sp.ref_frame,
                target_frame: target,
                patch: patch.clone(),
                level,
            });
        }
    }
    items
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use nalgebra::Vector3;

    fn setup() -> (Vec<CameraState>, Image, Intrinsics) {
        let k = Intrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64);
        let img = Image::from_fn(64, 64, |x, y| {
            Vector3::repeat(0.5 + 0.2 * ((x + 2 * y) as f64 * 0.3).sin())
        });
        let states = vec![
            CameraState::new(Pose::identity(), 1.0),
            CameraState::new(Pose::identity(), 1.0),
            CameraState::new(Pose::identity(), 1.0),
            CameraState::new(Pose::identity(), 1.0),
        ];
        (states, img, k)
    }

    fn sp_with_targets(targets: Vec<usize>) -> VisibilityRecord {
        VisibilityRecord {
            point: ScenePoint {
                position: Vector3::new(0.0, 0.0, 2.0),
                normal: Vector3::new(0.0, 0.0, -1.0),
                ref_frame: 0,
                dog_score: 1.0,
                is_global: false,
            },
            targets,
        }
    }

    #[test]
    fn one_point_three_targets_makes_three_items() {
        let (states, img, k) = setup();
        let images: Vec<&Image> = vec![&img; 4];
        let items = build_problem(&states, &[sp_with_targets(vec![1, 2, 3])], &images, &k, 0, 8);
        assert_eq!(items.len(), 3);
    }

    #[test]
    fn empty_target_set_makes_no_items() {
        let (states, img, k) = setup();
        let images: Vec<&Image> = vec![&img; 4];
        let items = build_problem(&states, &[sp_with_targets(vec![])], &images, &k, 0, 8);
        assert!(items.is_empty());
    }

    // Oracle: item count equals the sum of target set sizes.
    #[test]
    fn item_count_is_sum_of_visibilities() {
        let (states, img, k) = setup();
        let images: Vec<&Image> = vec![&img; 4];
        let records = vec![
            sp_with_targets(vec![1]),
            sp_with_targets(vec![1, 2]),
            sp_with_targets(vec![3, 2, 1]),
            sp_with_targets(vec![]),
        ];
        let expected: usize = records.iter().map(|r| r.targets.len()).sum();
        let items = build_problem(&states, &records, &images, &k, 0, 8);
        assert_eq!(items.len(), expected);
    }
}
