//! Evaluation toolchain: colorize LiDAR points into an exposure-normalized
//! radiance cloud, render it back through a z-buffer splatter, and score
//! rendered-vs-raw images with masked PSNR/SSIM.

pub mod io;
mod metrics;
mod render;

pub use metrics::{psnr, ssim, PSNR_CAP_DB};
pub use render::{render, RenderConfig, RenderResult};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{project, Image, Intrinsics, Pose};
use crate::lidar_ba::{nearest_lidar_index, LidarScan};
use crate::photometric_ba::CameraState;

/// A world-frame point carrying exposure-normalized RGB radiance.
#[derive(Clone, Copy, Debug)]
pub struct RadiancePoint {
    pub position: Vector3<f64>,
    pub radiance: Vector3<f64>,
}

/// Colorize LiDAR scans into a radiance cloud: each point is projected
/// into the camera frame nearest in time to its scan, sampled bilinearly,
/// and divided by that frame's relative exposure. Out-of-view points are
/// dropped.
pub fn colorize(
    scans: &[LidarScan],
    lidar_poses: &[Pose],
    states: &[CameraState],
    camera_timestamps: &[f64],
    images: &[&Image],
    k: &Intrinsics,
) -> Vec<RadiancePoint> {
    let mut cloud = Vec::new();
    for (scan, lidar_pose) in scans.iter().zip(lidar_poses) {
        let cam_idx = nearest_lidar_index(scan.timestamp, camera_timestamps);
        let state = &states[cam_idx];
        let image = images[cam_idx];
        let inv_eps = 1.0 / state.exposure;
        for p in &scan.points {
            let world = lidar_pose.transform_point(p);
            let Some(u) = project(k, &state.pose, &world) else {
                continue;
            };
            let Some(color) = image.sample_bilinear(&u) else {
                continue;
            };
            cloud.push(RadiancePoint {
                position: world,
                radiance: color * inv_eps,
            });
        }
    }
    cloud
}

/// Per-frame quality row of an evaluation report.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FrameScore {
    pub frame: usize,
    pub psnr_db: f64,
    pub ssim: f64,
    pub coverage: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames: Vec<FrameScore>,
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
    pub mean_coverage: f64,
}

impl EvalReport {
    /// Key-value text form with one row per frame.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("frame_id psnr_db ssim coverage_fraction\n");
        for f in &self.frames {
            out.push_str(&format!(
                "{} {:.6} {:.6} {:.6}\n",
                f.frame, f.psnr_db, f.ssim, f.coverage
            ));
        }
        out.push_str(&format!("mean_psnr_db {:.6}\n", self.mean_psnr_db));
        out.push_str(&format!("mean_ssim {:.6}\n", self.mean_ssim));
        out.push_str(&format!("mean_coverage {:.6}\n", self.mean_coverage));
        out
    }
}

/// Render the radiance cloud at every camera state and compare with the
/// raw image over covered pixels.
pub fn evaluate_run(
    states: &[CameraState],
    cloud: &[RadiancePoint],
    images: &[&Image],
    k: &Intrinsics,
    cfg: &RenderConfig,
) -> EvalReport {
    let mut frames = Vec::with_capacity(states.len());
    for (i, state) in states.iter().enumerate() {
        let rendered = render(cloud, state, k, cfg);
        let covered = rendered.mask.iter().filter(|&&m| m).count();
        let coverage = covered as f64 / rendered.mask.len() as f64;
        let (p, s) = if covered == 0 {
            (0.0, 0.0)
        } else {
            (
                psnr(&rendered.image, images[i], Some(&rendered.mask)).unwrap_or(0.0),
                ssim(&rendered.image, images[i], Some(&rendered.mask)).unwrap_or(0.0),
            )
        };
        frames.push(FrameScore {
            frame: i,
            psnr_db: p,
            ssim: s,
            coverage,
        });
    }
    let n = frames.len().max(1) as f64;
    EvalReport {
        mean_psnr_db: frames.iter().map(|f| f.psnr_db).sum::<f64>() / n,
        mean_ssim: frames.iter().map(|f| f.ssim).sum::<f64>() / n,
        mean_coverage: frames.iter().map(|f| f.coverage).sum::<f64>() / n,
        frames,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn on_axis_point_takes_principal_pixel_color() {
        let k = Intrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64);
        let img = Image::from_fn(64, 64, |x, y| {
            Vector3::new(x as f64 / 64.0, y as f64 / 64.0, 0.5)
        });
        let scan = LidarScan {
            points: vec![Vector3::new(0.0, 0.0, 2.0)],
            timestamp: 0.0,
            init_pose: Pose::identity(),
        };
        let states = vec![CameraState::new(Pose::identity(), 1.0)];
        let images: Vec<&Image> = vec![&img];
        let cloud = colorize(&[scan], &[Pose::identity()], &states, &[0.0], &images, &k);
        assert_eq!(cloud.len(), 1);
        assert_abs_diff_eq!(cloud[0].radiance, img.get(32, 32), epsilon = 1e-12);
    }

    #[test]
    fn exposure_divides_radiance() {
        let k = Intrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64);
        let img = Image::constant(64, 64, Vector3::repeat(0.5));
        let scan = LidarScan {
            points: vec![Vector3::new(0.0, 0.0, 2.0)],
            timestamp: 0.0,
            init_pose: Pose::identity(),
        };
        let states = vec![CameraState::new(Pose::identity(), 2.0)];
        let images: Vec<&Image> = vec![&img];
        let cloud = colorize(&[scan], &[Pose::identity()], &states, &[0.0], &images, &k);
        assert_abs_diff_eq!(cloud[0].radiance.x, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn out_of_view_points_are_dropped() {
        let k = Intrinsics::new(100.0, 100.0, 32.0, 32.0, 64, 64);
        let img = Image::constant(64, 64, Vector3::repeat(0.5));
        let scan = LidarScan {
            points: vec![Vector3::new(0.0, 0.0, -2.0), Vector3::new(50.0, 0.0, 1.0)],
            timestamp: 0.0,
            init_pose: Pose::identity(),
        };
        let states = vec![CameraState::new(Pose::identity(), 1.0)];
        let images: Vec<&Image> = vec![&img];
        let cloud = colorize(&[scan], &[Pose::identity()], &states, &[0.0], &images, &k);
        assert!(cloud.is_empty());
    }

    // Oracle: the scene generator knows the true surface radiance.
    #[test]
    fn colorized_cloud_matches_ground_truth_albedo() {
        use crate::synthetic::{presets, render_ground_truth, simulate_lidar};
        let (scene, k) = presets::smooth_wall(3, 17);
        let scans: Vec<LidarScan> = (0..3).map(|f| simulate_lidar(&scene, f, 0.0)).collect();
        let gt_images: Vec<Image> = (0..3)
            .map(|f| render_ground_truth(&scene, f, &k))
            .collect();
        let images: Vec<&Image> = gt_images.iter().collect();
        let states: Vec<CameraState> = scene
            .trajectory
            .iter()
            .zip(&scene.exposures)
            .map(|(p, &e)| CameraState::new(*p, e))
            .collect();
        let timestamps: Vec<f64> = (0..3).map(|f| f as f64 * 0.1).collect();
        let poses = scene.trajectory.clone();
        let cloud = colorize(&scans, &poses, &states, &timestamps, &images, &k);
        assert!(!cloud.is_empty());
        let plane = &scene.planes[0];
        let n = plane.normal();
        for rp in cloud.iter().step_by(37) {
            // Point must lie on the wall.
            let off = n.dot(&(rp.position - plane.corner_v()));
            assert!(off.abs() < 1e-9);
            // Radiance equals the analytic texture value there.
            let w = rp.position - plane.corner_v();
            let a = w.dot(&plane.edge_u_v()) / plane.edge_u_v().norm_squared();
            let b = w.dot(&plane.edge_v_v()) / plane.edge_v_v().norm_squared();
            let expected = plane.albedo(a, b);
            assert!(
                (rp.radiance - expected).norm() < 1.0 / 255.0,
                "radiance {:?} vs albedo {:?}",
                rp.radiance,
                expected
            );
        }
    }
}
