use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{Image, Intrinsics, Z_MIN};
use crate::photometric_ba::CameraState;

use super::RadiancePoint;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RenderConfig {
    /// Splat half-extent in pixels around the projected center.
    pub splat_radius: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { splat_radius: 1.0 }
    }
}

/// Output of the z-buffer splat renderer. Pixels outside the coverage
/// mask hold no meaningful color; uncovered depth is 0.
#[derive(Clone, Debug)]
pub struct RenderResult {
    pub image: Image,
    pub depth: Vec<f64>,
    pub mask: Vec<bool>,
}

impl RenderResult {
    pub fn depth_at(&self, x: usize, y: usize) -> f64 {
        self.depth[y * self.image.width() + x]
    }

    pub fn covered(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.image.width() + x]
    }
}

/// Project every radiance point into the camera, splat it over the pixels
/// within `splat_radius`, and keep the nearest depth per pixel. Pixel
/// color is `exposure * radiance` clamped to [0, 1].
pub fn render(
    cloud: &[RadiancePoint],
    state: &CameraState,
    k: &Intrinsics,
    cfg: &RenderConfig,
) -> RenderResult {
    let (w, h) = (k.width, k.height);
    let mut depth = vec![0.0_f64; w * h];
    let mut color = vec![Vector3::zeros(); w * h];
    let mut mask = vec![false; w * h];
    let r = cfg.splat_radius;
    for p in cloud {
        let cam = state.pose.inverse_transform_point(&p.position);
        if cam.z <= Z_MIN {
            continue;
        }
        let u = k.pixel_from_camera(&cam);
        // Splat footprint clipped to the image.
        let x0 = (u.x - r).ceil().max(0.0) as usize;
        let x1 = (u.x + r).floor().min((w - 1) as f64) as usize;
        let y0 = (u.y - r).ceil().max(0.0) as usize;
        let y1 = (u.y + r).floor().min((h - 1) as f64) as usize;
        if x0 > x1 || y0 > y1 || u.x + r < 0.0 || u.y + r < 0.0 {
            continue;
        }
        for y in y0..=y1 {
            for x in x0..=x1 {
                let idx = y * w + x;
                if !mask[idx] || cam.z < depth[idx] {
                    mask[idx] = true;
                    depth[idx] = cam.z;
                    color[idx] = p.radiance;
                }
            }
        }
    }
    let exposure = state.exposure;
    let image = Image::from_fn(w, h, |x, y| {
        let c = color[y * w + x] * exposure;
        Vector3::new(c.x.clamp(0.0, 1.0), c.y.clamp(0.0, 1.0), c.z.clamp(0.0, 1.0))
    });
    RenderResult { image, depth, mask }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use approx::assert_abs_diff_eq;

    fn k64() -> Intrinsics {
        Intrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64)
    }

    #[test]
    fn single_point_splat_and_depth() {
        let cloud = vec![RadiancePoint {
            position: Vector3::new(0.0, 0.0, 2.0),
            radiance: Vector3::new(0.3, 0.4, 0.5),
        }];
        let state = CameraState::new(Pose::identity(), 1.0);
        let out = render(&cloud, &state, &k64(), &RenderConfig::default());
        assert!(out.covered(32, 32));
        assert_abs_diff_eq!(out.depth_at(32, 32), 2.0, epsilon = 1e-12);
        // Mask confined to the splat neighborhood.
        let covered: usize = out.mask.iter().filter(|&&m| m).count();
        assert!(covered <= 9);
        assert!(!out.covered(10, 10));
        assert_eq!(out.depth_at(10, 10), 0.0);
        assert_abs_diff_eq!(out.image.get(32, 32).x, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn nearer_point_wins_z_buffer() {
        let cloud = vec![
            RadiancePoint {
                position: Vector3::new(0.0, 0.0, 3.0),
                radiance: Vector3::repeat(0.9),
            },
            RadiancePoint {
                position: Vector3::new(0.0, 0.0, 1.0),
                radiance: Vector3::repeat(0.1),
            },
        ];
        let state = CameraState::new(Pose::identity(), 1.0);
        let out = render(&cloud, &state, &k64(), &RenderConfig::default());
        assert_abs_diff_eq!(out.image.get(32, 32).x, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(out.depth_at(32, 32), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exposure_scales_rendered_color() {
        let cloud = vec![RadiancePoint {
            position: Vector3::new(0.0, 0.0, 2.0),
            radiance: Vector3::repeat(0.2),
        }];
        let state = CameraState::new(Pose::identity(), 1.5);
        let out = render(&cloud, &state, &k64(), &RenderConfig::default());
        assert_abs_diff_eq!(out.image.get(32, 32).x, 0.3, epsilon = 1e-12);
    }

    // Oracle: the scene generator's analytic renderer.
    #[test]
    fn dense_wall_cloud_matches_ground_truth_render() {
        use crate::photometric_ba::CameraState;
        use crate::synthetic::{presets, render_ground_truth, simulate_lidar};
        use crate::colorize_eval::colorize;
        let (scene, k) = presets::smooth_wall(2, 23);
        let scans: Vec<_> = (0..2).map(|f| simulate_lidar(&scene, f, 0.0)).collect();
        let gt: Vec<Image> = (0..2).map(|f| render_ground_truth(&scene, f, &k)).collect();
        let images: Vec<&Image> = gt.iter().collect();
        let states: Vec<CameraState> = scene
            .trajectory
            .iter()
            .zip(&scene.exposures)
            .map(|(p, &e)| CameraState::new(*p, e))
            .collect();
        let cloud = colorize(
            &scans,
            &scene.trajectory,
            &states,
            &[0.0, 0.1],
            &images,
            &k,
        );
        let out = render(&cloud, &states[0], &k, &RenderConfig::default());
        let mut checked = 0;
        for y in 0..k.height {
            for x in 0..k.width {
                if out.covered(x, y) {
                    let diff = (out.image.get(x, y) - gt[0].get(x, y)).norm();
                    assert!(
                        diff <= 2.0 / 255.0,
                        "pixel ({x},{y}) differs by {diff}"
                    );
                    checked += 1;
                }
            }
        }
        assert!(checked > 1000, "only {checked} covered pixels");
    }
}
