//! Deterministic synthetic scene generator: textured rectangles, simulated
//! LiDAR scans, analytically rendered camera images with known exposures,
//! and seeded pose/exposure perturbations. All outputs are pure functions
//! of the scene spec and seed.

pub mod presets;
mod texture;

pub use texture::Texture;

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Image, Intrinsics, Pose, Z_MIN};
use crate::lidar_ba::LidarScan;
use crate::photometric_ba::CameraState;

/// A finite textured rectangle: `corner + a*edge_u + b*edge_v` for
/// `a, b` in `[0, 1]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlaneSpec {
    pub corner: [f64; 3],
    pub edge_u: [f64; 3],
    pub edge_v: [f64; 3],
    pub texture: Texture,
}

/// Parametric ray hit on a rectangle.
#[derive(Clone, Copy, Debug)]
pub struct RectHit {
    /// Ray parameter; the hit point is `origin + t * dir`.
    pub t: f64,
    pub a: f64,
    pub b: f64,
}

impl PlaneSpec {
    pub fn corner_v(&self) -> Vector3<f64> {
        Vector3::from(self.corner)
    }

    pub fn edge_u_v(&self) -> Vector3<f64> {
        Vector3::from(self.edge_u)
    }

    pub fn edge_v_v(&self) -> Vector3<f64> {
        Vector3::from(self.edge_v)
    }

    /// Unit normal `edge_u × edge_v / |...|`.
    pub fn normal(&self) -> Vector3<f64> {
        self.edge_u_v().cross(&self.edge_v_v()).normalize()
    }

    /// Nearest forward intersection of the ray with this rectangle.
    pub fn intersect_ray(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<RectHit> {
        let n = self.normal();
        let denom = n.dot(dir);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = n.dot(&(self.corner_v() - origin)) / denom;
        if t <= 1e-9 {
            return None;
        }
        let w = origin + dir * t - self.corner_v();
        // Solve the 2x2 Gram system for the (possibly non-orthogonal)
        // edge basis.
        let (eu, ev) = (self.edge_u_v(), self.edge_v_v());
        let (uu, uv, vv) = (eu.dot(&eu), eu.dot(&ev), ev.dot(&ev));
        let det = uu * vv - uv * uv;
        if det.abs() < 1e-15 {
            return None;
        }
        let (wu, wv) = (w.dot(&eu), w.dot(&ev));
        let a = (vv * wu - uv * wv) / det;
        let b = (uu * wv - uv * wu) / det;
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
            return None;
        }
        Some(RectHit { t, a, b })
    }

    /// Texture color at rectangle coordinates, in meters along the edges.
    pub fn albedo(&self, a: f64, b: f64) -> Vector3<f64> {
        let s = a * self.edge_u_v().norm();
        let t = b * self.edge_v_v().norm();
        self.texture.albedo(s, t)
    }
}

/// LiDAR ray grid: evenly spaced azimuth/elevation directions.
/// A full-circle azimuth FoV (`>= 2π`) wraps without duplicating the seam.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LidarPattern {
    pub azimuth_count: usize,
    pub elevation_count: usize,
    /// Total azimuth field of view, radians.
    pub azimuth_fov: f64,
    /// Total elevation field of view, radians.
    pub elevation_fov: f64,
}

impl LidarPattern {
    /// Unit direction in the sensor frame (z forward, x right, y down).
    pub fn direction(&self, az_idx: usize, el_idx: usize) -> Vector3<f64> {
        let az = if self.azimuth_fov >= std::f64::consts::TAU - 1e-9 {
            -std::f64::consts::PI
                + std::f64::consts::TAU * az_idx as f64 / self.azimuth_count as f64
        } else if self.azimuth_count > 1 {
            -self.azimuth_fov / 2.0
                + self.azimuth_fov * az_idx as f64 / (self.azimuth_count - 1) as f64
        } else {
            0.0
        };
        let el = if self.elevation_count > 1 {
            -self.elevation_fov / 2.0
                + self.elevation_fov * el_idx as f64 / (self.elevation_count - 1) as f64
        } else {
            0.0
        };
        Vector3::new(el.cos() * az.sin(), el.sin(), el.cos() * az.cos())
    }
}

/// Ground-truth scene: rectangles, per-frame sensor poses and exposures,
/// and the LiDAR ray pattern. Camera and LiDAR share the trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneSpec {
    pub planes: Vec<PlaneSpec>,
    pub trajectory: Vec<Pose>,
    pub exposures: Vec<f64>,
    pub lidar: LidarPattern,
    pub seed: u64,
}

impl SceneSpec {
    pub fn num_frames(&self) -> usize {
        self.trajectory.len()
    }

    /// Nearest forward rectangle hit along a world-frame ray.
    pub fn nearest_hit(
        &self,
        origin: &Vector3<f64>,
        dir: &Vector3<f64>,
    ) -> Option<(usize, RectHit)> {
        let mut best: Option<(usize, RectHit)> = None;
        for (i, plane) in self.planes.iter().enumerate() {
            if let Some(hit) = plane.intersect_ray(origin, dir) {
                if best.map_or(true, |(_, b)| hit.t < b.t) {
                    best = Some((i, hit));
                }
            }
        }
        best
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scene spec serialization")
    }

    pub fn from_toml(s: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(s)
    }
}

fn frame_rng(seed: u64, frame: usize, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        seed ^ stream.wrapping_mul(0xA076_1D64_78BD_642F)
            ^ (frame as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    )
}

/// Simulate one LiDAR scan: exact nearest ray-rectangle intersections over
/// the ray grid plus seeded isotropic Gaussian range noise. Points are in
/// the sensor frame; rays that miss every rectangle yield no point.
pub fn simulate_lidar(scene: &SceneSpec, frame: usize, noise_sigma: f64) -> LidarScan {
    let pose = &scene.trajectory[frame];
    let origin = pose.translation();
    let mut rng = frame_rng(scene.seed, frame, 1);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut points = Vec::new();
    for az in 0..scene.lidar.azimuth_count {
        for el in 0..scene.lidar.elevation_count {
            let dir_sensor = scene.lidar.direction(az, el);
            let dir_world = pose.rotation() * dir_sensor;
            // Noise is drawn per ray so the stream is independent of hits.
            let noise = if noise_sigma > 0.0 {
                noise_sigma * normal.sample(&mut rng)
            } else {
                0.0
            };
            if let Some((_, hit)) = scene.nearest_hit(&origin, &dir_world) {
                points.push(dir_sensor * (hit.t + noise));
            }
        }
    }
    LidarScan {
        points,
        timestamp: frame as f64 * 0.1,
        init_pose: *pose,
    }
}

/// Analytic ground-truth render: per-pixel nearest ray-rectangle
/// intersection, texture lookup, multiplied by the frame's true exposure
/// and clamped to `[0, 1]`. Pixels whose ray misses everything are black.
pub fn render_ground_truth(scene: &SceneSpec, frame: usize, k: &Intrinsics) -> Image {
    let pose = &scene.trajectory[frame];
    let origin = pose.translation();
    let exposure = scene.exposures[frame];
    let rows: Vec<Vec<[f64; 3]>> = (0..k.height)
        .into_par_iter()
        .map(|y| {
            let mut row = Vec::with_capacity(k.width);
            for x in 0..k.width {
                let ray_cam = k.ray_from_pixel(&Vector2::new(x as f64, y as f64));
                let dir = pose.rotation() * ray_cam;
                let c = match scene.nearest_hit(&origin, &dir) {
                    Some((idx, hit)) => {
                        let albedo = scene.planes[idx].albedo(hit.a, hit.b);
                        albedo * exposure
                    }
                    None => Vector3::zeros(),
                };
                row.push([c.x.clamp(0.0, 1.0), c.y.clamp(0.0, 1.0), c.z.clamp(0.0, 1.0)]);
            }
            row
        })
        .collect();
    Image::from_fn(k.width, k.height, |x, y| Vector3::from(rows[y][x]))
}

/// Seeded Gaussian perturbation of the ground-truth states: per-frame
/// translation offset, axis-angle rotation offset (right-multiplied), and
/// log-exposure offset. Deterministic for a given seed.
pub fn perturb(
    scene: &SceneSpec,
    pose_sigma_trans: f64,
    pose_sigma_rot: f64,
    exposure_sigma: f64,
    seed: u64,
) -> Vec<CameraState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let draw3 = |rng: &mut ChaCha8Rng| {
        Vector3::new(
            normal.sample(rng),
            normal.sample(rng),
            normal.sample(rng),
        )
    };
    scene
        .trajectory
        .iter()
        .zip(&scene.exposures)
        .map(|(pose, &exposure)| {
            let dt = draw3(&mut rng) * pose_sigma_trans;
            let dr = draw3(&mut rng) * pose_sigma_rot;
            let de: f64 = normal.sample(&mut rng) * exposure_sigma;
            let rot = pose.rotation() * nalgebra::UnitQuaternion::from_scaled_axis(dr);
            CameraState {
                pose: Pose::new(rot, pose.translation() + dt),
                exposure: (exposure.ln() + de).exp(),
            }
        })
        .collect()
}

/// Exact visibility test: true iff the segment from the camera center of
/// `frame` to `p` hits no nearer rectangle and `p` projects in-view.
pub fn visibility_oracle(scene: &SceneSpec, k: &Intrinsics, p: &Vector3<f64>, frame: usize) -> bool {
    let pose = &scene.trajectory[frame];
    let cam = pose.inverse_transform_point(p);
    if cam.z <= Z_MIN {
        return false;
    }
    let u = k.pixel_from_camera(&cam);
    if !k.contains(&u) {
        return false;
    }
    let origin = pose.translation();
    let diff = p - origin;
    let dist = diff.norm();
    if dist < 1e-9 {
        return false;
    }
    let dir = diff / dist;
    match scene.nearest_hit(&origin, &dir) {
        // The nearest hit must be (numerically) the queried point itself.
        Some((_, hit)) => hit.t >= dist - 1e-6,
        None => true,
    }
}
