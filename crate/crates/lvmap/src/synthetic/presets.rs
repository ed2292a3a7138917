//! Ready-made synthetic scenes. Each builder returns the scene and the
//! camera intrinsics it was designed for; all are deterministic in the
//! given seed.

use nalgebra::{UnitQuaternion, Vector3};

use super::{LidarPattern, PlaneSpec, SceneSpec, Texture};
use crate::geometry::{Intrinsics, Pose};

/// Camera pose looking from `eye` toward `target` with image y pointing
/// against `up` (x right, y down, z forward).
pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Pose {
    let z = (target - eye).normalize();
    let mut x = z.cross(&up);
    if x.norm() < 1e-9 {
        // Degenerate up; pick any perpendicular.
        x = z.cross(&Vector3::new(1.0, 0.0, 0.0));
        if x.norm() < 1e-9 {
            x = z.cross(&Vector3::new(0.0, 1.0, 0.0));
        }
    }
    let x = x.normalize();
    let y = z.cross(&x);
    let rot = nalgebra::Matrix3::from_columns(&[x, y, z]);
    Pose::from_matrix_parts(&rot, eye)
}

fn rect(corner: [f64; 3], edge_u: [f64; 3], edge_v: [f64; 3], texture: Texture) -> PlaneSpec {
    PlaneSpec {
        corner,
        edge_u,
        edge_v,
        texture,
    }
}

fn noise(cell: f64, seed: u64, base: [f64; 3], amplitude: f64) -> Texture {
    Texture::ValueNoise {
        cell,
        seed,
        base,
        amplitude,
    }
}

/// Three mutually orthogonal untextured walls around a short trajectory.
/// Exercises the LiDAR stage: every translation axis is pinned by one wall.
pub fn three_wall_room(n_frames: usize, seed: u64) -> (SceneSpec, Intrinsics) {
    let gray = Texture::Constant {
        color: [0.5, 0.5, 0.5],
    };
    let planes = vec![
        rect([5.0, -5.0, -3.0], [0.0, 10.0, 0.0], [0.0, 0.0, 6.0], gray.clone()),
        rect([-5.0, 5.0, -3.0], [10.0, 0.0, 0.0], [0.0, 0.0, 6.0], gray.clone()),
        rect([-5.0, -5.0, 3.0], [10.0, 0.0, 0.0], [0.0, 10.0, 0.0], gray),
    ];
    let mut trajectory = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let f = i as f64;
        let eye = Vector3::new(-1.0 + 0.25 * f, 0.4 * (0.7 * f).sin(), 0.3 * (0.5 * f).cos());
        let yaw = 0.15 * (0.4 * f).sin();
        let pitch = 0.08 * (0.3 * f).cos();
        let rot = UnitQuaternion::from_scaled_axis(Vector3::new(pitch, yaw, 0.0));
        trajectory.push(Pose::new(rot, eye));
    }
    let scene = SceneSpec {
        planes,
        trajectory,
        exposures: vec![1.0; n_frames],
        lidar: LidarPattern {
            azimuth_count: 220,
            elevation_count: 36,
            azimuth_fov: std::f64::consts::TAU,
            elevation_fov: 1.6,
        },
        seed,
    };
    let k = Intrinsics::new(100.0, 100.0, 48.0, 36.0, 96, 72);
    (scene, k)
}

/// Two richly textured perpendicular walls viewed by a sweeping camera
/// with varying exposure. The workhorse scene for visual BA recovery.
pub fn textured_corner(n_frames: usize, seed: u64) -> (SceneSpec, Intrinsics) {
    let planes = vec![
        // Frontal wall at z = 3.
        rect(
            [-4.0, -3.0, 3.0],
            [8.0, 0.0, 0.0],
            [0.0, 6.0, 0.0],
            noise(0.2, seed ^ 0xA1, [0.45, 0.5, 0.5], 0.2),
        ),
        // Side wall at x = 4.
        rect(
            [4.0, -3.0, -1.0],
            [0.0, 0.0, 8.0],
            [0.0, 6.0, 0.0],
            noise(0.25, seed ^ 0xB2, [0.5, 0.45, 0.5], 0.2),
        ),
    ];
    let mut trajectory = Vec::with_capacity(n_frames);
    let mut exposures = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let f = i as f64;
        let t = f / (n_frames.max(2) - 1) as f64;
        let eye = Vector3::new(-1.2 + 2.4 * t, 0.35 * (0.9 * f).sin(), 0.25 * (0.6 * f).cos());
        let yaw = 0.12 + 0.1 * (0.5 * f).sin();
        let pitch = 0.05 * (0.4 * f).cos();
        let rot = UnitQuaternion::from_scaled_axis(Vector3::new(pitch, yaw, 0.0));
        trajectory.push(Pose::new(rot, eye));
        exposures.push(1.0 + 0.25 * (std::f64::consts::TAU * t + 0.5).sin());
    }
    let scene = SceneSpec {
        planes,
        trajectory,
        exposures,
        lidar: LidarPattern {
            azimuth_count: 140,
            elevation_count: 90,
            azimuth_fov: 1.9,
            elevation_fov: 1.4,
        },
        seed,
    };
    let k = Intrinsics::new(130.0, 130.0, 80.0, 60.0, 160, 120);
    (scene, k)
}

/// Two convex rooms separated by a wall with physical thickness; cameras
/// and scans split between the rooms. Ground truth for occlusion-safety
/// tests: nothing in room A is visible from room B.
pub fn two_room(frames_per_room: usize, seed: u64) -> (SceneSpec, Intrinsics) {
    let tex = |i: u64| noise(0.3, seed ^ (0xC0 + i), [0.5, 0.5, 0.45], 0.2);
    let planes = vec![
        // Outer shell spanning both rooms.
        rect([0.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 3.0], tex(1)),
        rect([8.0, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 3.0], tex(2)),
        rect([0.0, 0.0, 0.0], [8.0, 0.0, 0.0], [0.0, 0.0, 3.0], tex(3)),
        rect([0.0, 4.0, 0.0], [8.0, 0.0, 0.0], [0.0, 0.0, 3.0], tex(4)),
        rect([0.0, 0.0, 0.0], [8.0, 0.0, 0.0], [0.0, 4.0, 0.0], tex(5)),
        rect([0.0, 0.0, 3.0], [8.0, 0.0, 0.0], [0.0, 4.0, 0.0], tex(6)),
        // Divider with 0.2 m thickness: one face per room.
        rect([3.9, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 3.0], tex(7)),
        rect([4.1, 0.0, 0.0], [0.0, 4.0, 0.0], [0.0, 0.0, 3.0], tex(8)),
    ];
    let up = Vector3::new(0.0, 0.0, 1.0);
    let mut trajectory = Vec::new();
    for room in 0..2 {
        let cx = if room == 0 { 1.9 } else { 6.1 };
        for i in 0..frames_per_room {
            let f = i as f64;
            let angle = std::f64::consts::TAU * f / frames_per_room as f64;
            let eye = Vector3::new(
                cx + 0.3 * (0.8 * f).cos(),
                2.0 + 0.4 * (0.9 * f).sin(),
                1.4 + 0.15 * (0.7 * f).sin(),
            );
            let dir = Vector3::new(angle.cos(), angle.sin(), 0.05 * (f * 0.3).sin());
            trajectory.push(look_at(eye, eye + dir, up));
        }
    }
    let n = trajectory.len();
    let scene = SceneSpec {
        planes,
        trajectory,
        exposures: vec![1.0; n],
        lidar: LidarPattern {
            azimuth_count: 200,
            elevation_count: 40,
            azimuth_fov: std::f64::consts::TAU,
            elevation_fov: 1.7,
        },
        seed,
    };
    let k = Intrinsics::new(100.0, 100.0, 48.0, 36.0, 96, 72);
    (scene, k)
}

/// Number of frames in each pass of [`revisit_loop`].
pub const REVISIT_PASS_LEN: usize = 8;

/// Three-pass loop: close-up sweep of wall A, a detour to wall B, then a
/// distant revisit of wall A. The revisit viewpoints are farther from the
/// wall than the local feature radius used in the ablation configuration,
/// so only global scene points can constrain them. Exposures vary
/// throughout.
pub fn revisit_loop(seed: u64) -> (SceneSpec, Intrinsics) {
    let planes = vec![
        // Wall A at z = 11.
        rect(
            [-8.0, -4.0, 11.0],
            [16.0, 0.0, 0.0],
            [0.0, 8.0, 0.0],
            noise(0.3, seed ^ 0xD1, [0.5, 0.5, 0.45], 0.2),
        ),
        // Wall B at x = -6.
        rect(
            [-6.0, -4.0, 1.0],
            [0.0, 0.0, 10.0],
            [0.0, 8.0, 0.0],
            noise(0.3, seed ^ 0xE2, [0.45, 0.5, 0.5], 0.2),
        ),
    ];
    let n = 3 * REVISIT_PASS_LEN;
    let mut trajectory = Vec::with_capacity(n);
    let mut exposures = Vec::with_capacity(n);
    let up = Vector3::new(0.0, -1.0, 0.0);
    for i in 0..n {
        let f = (i % REVISIT_PASS_LEN) as f64;
        let t = f / (REVISIT_PASS_LEN - 1) as f64;
        let pose = match i / REVISIT_PASS_LEN {
            // Pass 1: wall A from 3 m.
            0 => {
                let eye = Vector3::new(-2.0 + 4.0 * t, 0.3 * (f * 0.8).sin(), 8.0);
                look_at(eye, Vector3::new(eye.x * 0.8, eye.y * 0.5, 11.0), up)
            }
            // Pass 2: wall B from ~3 m.
            1 => {
                let eye = Vector3::new(-3.0, 0.3 * (f * 0.7).cos(), 9.0 - 5.0 * t);
                look_at(eye, Vector3::new(-6.0, eye.y * 0.5, eye.z - 0.5), up)
            }
            // Pass 3: wall A again from 8 m.
            _ => {
                let eye = Vector3::new(-2.0 + 4.0 * t, 0.25 * (f * 0.9).sin(), 3.0);
                look_at(eye, Vector3::new(eye.x * 0.8, eye.y * 0.5, 11.0), up)
            }
        };
        trajectory.push(pose);
        exposures.push(1.0 + 0.22 * (std::f64::consts::TAU * i as f64 / 12.0).sin());
    }
    let scene = SceneSpec {
        planes,
        trajectory,
        exposures,
        lidar: LidarPattern {
            azimuth_count: 150,
            elevation_count: 80,
            azimuth_fov: 1.9,
            elevation_fov: 1.5,
        },
        seed,
    };
    let k = Intrinsics::new(130.0, 130.0, 80.0, 60.0, 160, 120);
    (scene, k)
}

/// A single smooth-ramp wall scanned densely (more LiDAR returns than
/// image pixels). Used for colorize/render round-trip checks where the
/// splat renderer must reproduce the raw image almost exactly.
pub fn smooth_wall(n_frames: usize, seed: u64) -> (SceneSpec, Intrinsics) {
    let planes = vec![rect(
        [-3.0, -2.5, 2.5],
        [6.0, 0.0, 0.0],
        [0.0, 5.0, 0.0],
        Texture::Ramp {
            base: [0.3, 0.35, 0.4],
            grad_u: [0.05, 0.04, 0.03],
            grad_v: [0.02, 0.03, 0.04],
        },
    )];
    let mut trajectory = Vec::with_capacity(n_frames);
    let mut exposures = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let f = i as f64;
        trajectory.push(Pose::new(
            UnitQuaternion::from_scaled_axis(Vector3::new(0.0, 0.02 * f, 0.0)),
            Vector3::new(0.15 * f - 0.2, 0.1 * (f * 0.9).sin(), 0.05 * f),
        ));
        exposures.push(1.0 + 0.15 * (f * 1.3).sin());
    }
    let scene = SceneSpec {
        planes,
        trajectory,
        exposures,
        lidar: LidarPattern {
            azimuth_count: 170,
            elevation_count: 130,
            azimuth_fov: 1.05,
            elevation_fov: 0.8,
        },
        seed,
    };
    let k = Intrinsics::new(100.0, 100.0, 48.0, 36.0, 96, 72);
    (scene, k)
}

/// Look up a preset by name (used by the CLI `synth` verb).
pub fn by_name(name: &str, n_frames: usize, seed: u64) -> Option<(SceneSpec, Intrinsics)> {
    match name {
        "three-wall-room" => Some(three_wall_room(n_frames, seed)),
        "textured-corner" => Some(textured_corner(n_frames, seed)),
        "two-room" => Some(two_room(n_frames.max(2) / 2, seed)),
        "revisit-loop" => Some(revisit_loop(seed)),
        "smooth-wall" => Some(smooth_wall(n_frames, seed)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::simulate_lidar;

    #[test]
    fn look_at_points_camera_at_target() {
        let eye = Vector3::new(1.0, 2.0, 3.0);
        let target = Vector3::new(-2.0, 0.5, 7.0);
        let pose = look_at(eye, target, Vector3::new(0.0, -1.0, 0.0));
        let cam = pose.inverse_transform_point(&target);
        assert!(cam.x.abs() < 1e-12 && cam.y.abs() < 1e-12);
        assert!(cam.z > 0.0);
    }

    #[test]
    fn presets_produce_lidar_returns_everywhere() {
        for (name, (scene, _)) in [
            ("three-wall-room", three_wall_room(6, 1)),
            ("textured-corner", textured_corner(6, 2)),
            ("two-room", two_room(4, 3)),
            ("revisit-loop", revisit_loop(4)),
            ("smooth-wall", smooth_wall(4, 5)),
        ] {
            for frame in 0..scene.num_frames() {
                let scan = simulate_lidar(&scene, frame, 0.0);
                assert!(
                    scan.points.len() > 500,
                    "{name}: frame {frame} has only {} returns",
                    scan.points.len()
                );
            }
        }
    }

    #[test]
    fn exposures_stay_clamp_safe() {
        let (scene, _) = textured_corner(20, 9);
        for (i, eps) in scene.exposures.iter().enumerate() {
            assert!(*eps > 0.0);
            // Max albedo is 0.7; keep eps * albedo comfortably below 1.
            assert!(eps * 0.7 < 0.95, "frame {i} exposure {eps} too bright");
        }
    }
}
