//! Scene point generation from LiDAR planar features and local visibility
//! determination within a sliding window of frames.
//!
//! Scene points are LiDAR feature points that project onto textured image
//! regions of their reference frame; per grid cell, only the strongest
//! texture response survives. A point is visible in a candidate target
//! frame when the view direction is close enough to the optical axis and
//! the surface normal, and the warped patch still correlates with the
//! reference patch.

use std::collections::BTreeMap;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{project, Image, Intrinsics, Rgb};
use crate::lidar_ba::PlaneFeature;
use crate::photometric_ba::{homography, warp_patch, CameraState};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScenePointConfig {
    /// Minimum |n·d| between feature normal and view direction at the
    /// reference frame.
    pub alpha0: f64,
    /// Minimum |d·z_C| between view direction and target optical axis.
    pub alpha1: f64,
    /// Minimum |d·n| between view direction and point normal at the target.
    pub alpha2: f64,
    /// Minimum patch NCC between reference and target.
    pub alpha3: f64,
    /// Grid cell size in pixels.
    pub cell: usize,
    /// Sliding window half-width in keyframes for local visibility.
    pub window_size: usize,
    pub dog_sigma1: f64,
    pub dog_sigma2: f64,
    /// Minimum DoG score for a cell to yield a scene point.
    pub min_score: f64,
    /// Only LiDAR features within this distance of the camera are
    /// considered when generating local scene points, meters.
    pub feature_radius: f64,
}

impl Default for ScenePointConfig {
    fn default() -> Self {
        Self {
            alpha0: 0.2,
            alpha1: 0.3,
            alpha2: 0.2,
            alpha3: 0.8,
            cell: 32,
            window_size: 10,
            dog_sigma1: 1.0,
            dog_sigma2: 1.6,
            min_score: 0.01,
            feature_radius: 10.0,
        }
    }
}

/// A LiDAR-derived 3D point with unit surface normal, fixed during the
/// visual BA. `ref_frame` is the camera frame whose image selected it.
#[derive(Clone, Copy, Debug)]
pub struct ScenePoint {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub ref_frame: usize,
    pub dog_score: f64,
    pub is_global: bool,
}

/// Square pixel patch anchored on the reference image: integer-grid
/// coordinates around the rounded projection, with the reference colors
/// cached at construction.
#[derive(Clone, Debug)]
pub struct Patch {
    pub center: Vector2<f64>,
    pub offsets: Vec<Vector2<f64>>,
    pub colors: Vec<Rgb>,
}

impl Patch {
    /// Build an NxN patch centered on `u` rounded to the pixel grid.
    /// Returns `None` unless every patch pixel lies inside the image.
    pub fn build(image: &Image, u: &Vector2<f64>, n: usize) -> Option<Patch> {
        let cx = u.x.round();
        let cy = u.y.round();
        let lo = -((n as i64 - 1) / 2);
        let hi = lo + n as i64 - 1;
        if cx + (lo as f64) < 0.0
            || cy + (lo as f64) < 0.0
            || cx + hi as f64 > (image.width() - 1) as f64
            || cy + hi as f64 > (image.height() - 1) as f64
        {
            return None;
        }
        let mut offsets = Vec::with_capacity(n * n);
        let mut colors = Vec::with_capacity(n * n);
        for dy in lo..=hi {
            for dx in lo..=hi {
                offsets.push(Vector2::new(dx as f64, dy as f64));
                colors.push(image.get((cx + dx as f64) as usize, (cy + dy as f64) as usize));
            }
        }
        Some(Patch {
            center: Vector2::new(cx, cy),
            offsets,
            colors,
        })
    }

    /// Absolute pixel coordinates of the patch.
    pub fn coords(&self) -> Vec<Vector2<f64>> {
        self.offsets.iter().map(|o| self.center + o).collect()
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// Target frames that passed the visibility checks for one scene point.
#[derive(Clone, Debug)]
pub struct VisibilityRecord {
    pub point: ScenePoint,
    pub targets: Vec<usize>,
}

/// Difference-of-Gaussians texture score at `u` (nearest pixel), computed
/// on grayscale. Returns 0 when the kernel would leave the image.
pub fn dog_score(img: &Image, u: &Vector2<f64>, sigma1: f64, sigma2: f64) -> f64 {
    let radius = (3.0 * sigma1.max(sigma2)).ceil() as i64;
    let x0 = u.x.round() as i64;
    let y0 = u.y.round() as i64;
    if x0 < radius
        || y0 < radius
        || x0 + radius >= img.width() as i64
        || y0 + radius >= img.height() as i64
    {
        return 0.0;
    }
    let g1 = gaussian_response(img, x0, y0, sigma1, radius);
    let g2 = gaussian_response(img, x0, y0, sigma2, radius);
    (g1 - g2).abs()
}

fn gaussian_response(img: &Image, x0: i64, y0: i64, sigma: f64, radius: i64) -> f64 {
    let mut sum = 0.0;
    let mut weight_sum = 0.0;
    let inv_2s2 = 1.0 / (2.0 * sigma * sigma);
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let w = (-((dx * dx + dy * dy) as f64) * inv_2s2).exp();
            sum += w * img.gray((x0 + dx) as usize, (y0 + dy) as usize);
            weight_sum += w;
        }
    }
    sum / weight_sum
}

/// Generate local scene points for one frame: LiDAR plane features within
/// `feature_radius` of the camera, facing the camera (|n·d| > alpha0),
/// projecting in-view, scored by DoG; the best-scoring feature per grid
/// cell is kept if its score clears `min_score`.
pub fn generate_local_scene_points(
    frame_idx: usize,
    image: &Image,
    k: &Intrinsics,
    pose: &crate::geometry::Pose,
    features: &[PlaneFeature],
    cfg: &ScenePointConfig,
) -> Vec<ScenePoint> {
    let t_c = pose.translation();
    let mut cells: BTreeMap<(usize, usize), ScenePoint> = BTreeMap::new();
    for f in features {
        let rel = f.position - t_c;
        let dist = rel.norm();
        if dist < 1e-9 || dist > cfg.feature_radius {
            continue;
        }
        if (f.normal.dot(&rel) / dist).abs() <= cfg.alpha0 {
            continue;
        }
        let Some(u) = project(k, pose, &f.position) else {
            continue;
        };
        let score = dog_score(image, &u, cfg.dog_sigma1, cfg.dog_sigma2);
        if score <= cfg.min_score {
            continue;
        }
        let cell = (u.x as usize / cfg.cell, u.y as usize / cfg.cell);
        let candidate = ScenePoint {
            position: f.position,
            normal: f.normal,
            ref_frame: frame_idx,
            dog_score: score,
            is_global: false,
        };
        match cells.get(&cell) {
            Some(best) if best.dog_score >= score => {}
            _ => {
                cells.insert(cell, candidate);
            }
        }
    }
    cells.into_values().collect()
}

/// Normalized cross-correlation of two equal-length color lists, computed
/// on grayscale, clamped to [-1, 1]. Patches without variance carry no
/// alignment signal and score 0.
pub fn ncc(a: &[Rgb], b: &[Rgb]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let gray = |c: &Rgb| (c.x + c.y + c.z) / 3.0;
    let ga: Vec<f64> = a.iter().map(gray).collect();
    let gb: Vec<f64> = b.iter().map(gray).collect();
    let mean_a = ga.iter().sum::<f64>() / n as f64;
    let mean_b = gb.iter().sum::<f64>() / n as f64;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for i in 0..n {
        let da = ga[i] - mean_a;
        let db = gb[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a < 1e-16 || var_b < 1e-16 {
        return 0.0;
    }
    (cov / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0)
}

/// The per-candidate visibility filter shared by local and global
/// determination: view-direction checks, in-view projection, full patch
/// warp containment, and patch NCC.
#[allow(clippy::too_many_arguments)]
pub fn passes_visibility_checks(
    sp: &ScenePoint,
    ref_patch: &Patch,
    ref_state: &CameraState,
    target_idx: usize,
    states: &[CameraState],
    images: &[&Image],
    k: &Intrinsics,
    cfg: &ScenePointConfig,
) -> bool {
    let target = &states[target_idx];
    let t_t = target.pose.translation();
    let rel = sp.position - t_t;
    let dist = rel.norm();
    if dist < 1e-9 {
        return false;
    }
    let d = rel / dist;
    let z_c = target.pose.rotation_matrix().column(2).into_owned();
    if d.dot(&z_c).abs() <= cfg.alpha1 {
        return false;
    }
    if d.dot(&sp.normal).abs() <= cfg.alpha2 {
        return false;
    }
    // The point itself must project in front of and inside the target.
    if project(k, &target.pose, &sp.position).is_none() {
        return false;
    }
    let Some(h) = homography(&ref_state.pose, &target.pose, sp, k) else {
        return false;
    };
    let coords = ref_patch.coords();
    let Some(warped) = warp_patch(&h, &coords, k) else {
        return false;
    };
    let target_img = images[target_idx];
    let mut target_colors = Vec::with_capacity(warped.len());
    for w in &warped {
        match target_img.sample_bilinear(w) {
            Some(c) => target_colors.push(c),
            None => return false,
        }
    }
    ncc(&ref_patch.colors, &target_colors) > cfg.alpha3
}

/// Frame indices within `window_size` of `ref_frame`, excluding it.
pub fn window_around(ref_frame: usize, n_frames: usize, window_size: usize) -> Vec<usize> {
    let lo = ref_frame.saturating_sub(window_size);
    let hi = (ref_frame + window_size).min(n_frames.saturating_sub(1));
    (lo..=hi).filter(|&j| j != ref_frame).collect()
}

/// Check each window frame against the visibility criteria. The returned
/// record never contains the reference frame. An empty record is valid.
pub fn determine_local_visibility(
    sp: &ScenePoint,
    window: &[usize],
    states: &[CameraState],
    images: &[&Image],
    k: &Intrinsics,
    patch_size: usize,
    cfg: &ScenePointConfig,
) -> VisibilityRecord {
    let mut targets = Vec::new();
    let ref_state = &states[sp.ref_frame];
    let ref_img = images[sp.ref_frame];
    if let Some(u_r) = project(k, &ref_state.pose, &sp.position) {
        if let Some(ref_patch) = Patch::build(ref_img, &u_r, patch_size) {
            for &j in window {
                if j == sp.ref_frame {
                    continue;
                }
                if passes_visibility_checks(sp, &ref_patch, ref_state, j, states, images, k, cfg) {
                    targets.push(j);
                }
            }
        }
    }
    VisibilityRecord {
        point: *sp,
        targets,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use approx::assert_abs_diff_eq;
    use nalgebra::UnitQuaternion;

    #[test]
    fn dog_of_constant_image_is_zero() {
        let img = Image::constant(32, 32, Vector3::repeat(0.4));
        for x in [8.0, 15.0, 20.0] {
            assert_abs_diff_eq!(
                dog_score(&img, &Vector2::new(x, 16.0), 1.0, 1.6),
                0.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn dog_peaks_at_isolated_bright_pixel() {
        let mut img = Image::new(33, 33);
        img.set(16, 16, Vector3::repeat(1.0));
        let center = dog_score(&img, &Vector2::new(16.0, 16.0), 1.0, 1.6);
        assert!(center > 0.0);
        let mut max = 0.0_f64;
        for y in 6..27 {
            for x in 6..27 {
                max = max.max(dog_score(
                    &img,
                    &Vector2::new(x as f64, y as f64),
                    1.0,
                    1.6,
                ));
            }
        }
        assert_abs_diff_eq!(center, max, epsilon = 1e-15);
    }

    // Oracle: direct convolution comparison between edge and off-edge
    // responses on a step image.
    #[test]
    fn dog_responds_more_at_step_edge() {
        let img = Image::from_fn(48, 16, |x, _| {
            Vector3::repeat(if x < 24 { 0.2 } else { 0.8 })
        });
        let at_edge = dog_score(&img, &Vector2::new(23.0, 8.0), 1.0, 1.6);
        let off_edge = dog_score(&img, &Vector2::new(18.0, 8.0), 1.0, 1.6);
        assert!(
            at_edge > off_edge,
            "edge {at_edge} should exceed off-edge {off_edge}"
        );
    }

    #[test]
    fn dog_near_border_scores_zero() {
        let mut img = Image::new(16, 16);
        img.set(2, 2, Vector3::repeat(1.0));
        assert_eq!(dog_score(&img, &Vector2::new(2.0, 2.0), 1.0, 1.6), 0.0);
    }

    #[test]
    fn ncc_of_self_is_one() {
        let a: Vec<Rgb> = (0..16).map(|i| Vector3::repeat(i as f64 / 16.0)).collect();
        assert_abs_diff_eq!(ncc(&a, &a), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ncc_of_inverted_is_minus_one() {
        let a: Vec<Rgb> = (0..16).map(|i| Vector3::repeat(i as f64 / 16.0)).collect();
        let b: Vec<Rgb> = a.iter().map(|c| Vector3::repeat(0.9) - c).collect();
        assert_abs_diff_eq!(ncc(&a, &b), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn ncc_is_affine_invariant() {
        let a: Vec<Rgb> = (0..16)
            .map(|i| Vector3::repeat((i as f64 * 0.77).sin().abs() * 0.4))
            .collect();
        let b: Vec<Rgb> = a.iter().map(|c| c * 2.0 + Vector3::repeat(0.1)).collect();
        assert_abs_diff_eq!(ncc(&a, &b), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ncc_zero_variance_is_zero() {
        let a = vec![Vector3::repeat(0.5); 16];
        let b: Vec<Rgb> = (0..16).map(|i| Vector3::repeat(i as f64 / 16.0)).collect();
        assert_eq!(ncc(&a, &b), 0.0);
    }

    fn textured_image(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| {
            let v = 0.5 + 0.3 * ((x as f64) * 0.9).sin() * ((y as f64) * 0.7).cos();
            Vector3::repeat(v)
        })
    }

    fn feature_at(p: Vector3<f64>, n: Vector3<f64>) -> PlaneFeature {
        PlaneFeature {
            position: p,
            normal: n,
            thickness: 0.0,
            voxel_key: (0, 0, 0),
        }
    }

    #[test]
    fn grazing_feature_is_excluded_and_frontal_kept() {
        let k = Intrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64);
        let img = textured_image(64, 64);
        let pose = Pose::identity();
        let cfg = ScenePointConfig {
            min_score: 1e-6,
            ..Default::default()
        };
        // Normal perpendicular to the view direction: |n·d| = 0 < alpha0.
        let grazing = feature_at(Vector3::new(0.0, 0.0, 2.0), Vector3::new(1.0, 0.0, 0.0));
        // Head-on wall: |n·d| = 1.
        let frontal = feature_at(Vector3::new(0.0, 0.0, 2.0), Vector3::new(0.0, 0.0, -1.0));
        let sps = generate_local_scene_points(0, &img, &k, &pose, &[grazing], &cfg);
        assert!(sps.is_empty());
        let sps = generate_local_scene_points(0, &img, &k, &pose, &[frontal], &cfg);
        assert_eq!(sps.len(), 1);
        assert_eq!(sps[0].ref_frame, 0);
    }

    // Oracle: enumerate-and-argmax over the cell.
    #[test]
    fn best_scoring_feature_wins_the_cell() {
        let k = Intrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64);
        // Strong impulse at (34, 32), weak at (38, 32): same 32 px cell.
        let mut img = Image::constant(64, 64, Vector3::repeat(0.3));
        img.set(34, 32, Vector3::repeat(1.0));
        img.set(38, 32, Vector3::repeat(0.45));
        let pose = Pose::identity();
        let n = Vector3::new(0.0, 0.0, -1.0);
        let f_strong = feature_at(Vector3::new((34.0 - 32.0) / 100.0, 0.0, 1.0), n);
        let f_weak = feature_at(Vector3::new((38.0 - 32.0) / 100.0, 0.0, 1.0), n);
        let cfg = ScenePointConfig {
            min_score: 1e-6,
            ..Default::default()
        };
        let sps = generate_local_scene_points(0, &img, &k, &pose, &[f_weak, f_strong], &cfg);
        assert_eq!(sps.len(), 1);
        let s_strong = dog_score(&img, &Vector2::new(34.0, 32.0), 1.0, 1.6);
        let s_weak = dog_score(&img, &Vector2::new(38.0, 32.0), 1.0, 1.6);
        assert!(s_strong > s_weak);
        assert_abs_diff_eq!(sps[0].dog_score, s_strong, epsilon = 1e-15);
    }

    #[test]
    fn textureless_cell_yields_nothing() {
        let k = Intrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64);
        let img = Image::constant(64, 64, Vector3::repeat(0.5));
        let f = feature_at(Vector3::new(0.0, 0.0, 2.0), Vector3::new(0.0, 0.0, -1.0));
        let cfg = ScenePointConfig::default();
        let sps = generate_local_scene_points(0, &img, &k, &Pose::identity(), &[f], &cfg);
        assert!(sps.is_empty());
    }

    #[test]
    fn window_excludes_reference_and_clips() {
        assert_eq!(window_around(0, 5, 2), vec![1, 2]);
        assert_eq!(window_around(2, 5, 2), vec![0, 1, 3, 4]);
        assert_eq!(window_around(4, 5, 10), vec![0, 1, 2, 3]);
    }

    #[test]
    fn dead_on_candidate_passes_and_sideways_fails() {
        let k = Intrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64);
        let img = textured_image(64, 64);
        let images: Vec<&Image> = vec![&img, &img];
        // Both frames at the origin looking down +z at a frontal wall
        // point: identical content, d == z_C, d == -n.
        let states = vec![
            CameraState::new(Pose::identity(), 1.0),
            CameraState::new(Pose::identity(), 1.0),
        ];
        let sp = ScenePoint {
            position: Vector3::new(0.0, 0.0, 2.0),
            normal: Vector3::new(0.0, 0.0, -1.0),
            ref_frame: 0,
            dog_score: 1.0,
            is_global: false,
        };
        let cfg = ScenePointConfig::default();
        let rec = determine_local_visibility(&sp, &[1], &states, &images, &k, 8, &cfg);
        assert_eq!(rec.targets, vec![1]);

        // Candidate exactly sideways: the point lies on the camera's
        // x-axis, so d·z_C = 0.
        let side_pose = Pose::new(
            UnitQuaternion::from_scaled_axis(Vector3::new(
                0.0,
                -std::f64::consts::FRAC_PI_2,
                0.0,
            )),
            Vector3::new(2.0, 0.0, 2.0),
        );
        let states2 = vec![states[0], CameraState::new(side_pose, 1.0)];
        let rec = determine_local_visibility(&sp, &[1], &states2, &images, &k, 8, &cfg);
        assert!(rec.targets.is_empty());
    }

    // Oracle: direct NCC computation confirms brightness-affine tolerance.
    #[test]
    fn brightness_change_keeps_candidate() {
        let k = Intrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64);
        let img = textured_image(64, 64);
        let brighter = Image::from_fn(64, 64, |x, y| img.get(x, y) * 1.3);
        let images: Vec<&Image> = vec![&img, &brighter];
        let states = vec![
            CameraState::new(Pose::identity(), 1.0),
            CameraState::new(Pose::identity(), 1.0),
        ];
        let sp = ScenePoint {
            position: Vector3::new(0.0, 0.0, 2.0),
            normal: Vector3::new(0.0, 0.0, -1.0),
            ref_frame: 0,
            dog_score: 1.0,
            is_global: false,
        };
        let cfg = ScenePointConfig::default();
        let u = project(&k, &states[0].pose, &sp.position).unwrap();
        let patch = Patch::build(&img, &u, 8).unwrap();
        let warped_colors: Vec<Rgb> = patch
            .coords()
            .iter()
            .map(|c| brighter.sample_bilinear(c).unwrap())
            .collect();
        assert!(ncc(&patch.colors, &warped_colors) > 0.99);
        let rec = determine_local_visibility(&sp, &[1], &states, &images, &k, 8, &cfg);
        assert_eq!(rec.targets, vec![1]);
    }
}
