use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::Pose;

/// Minimum camera-frame depth for a projection to be considered valid.
pub const Z_MIN: f64 = 1e-3;

/// Pinhole camera intrinsics. No distortion model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Self {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        debug_assert!(k.is_valid(), "invalid intrinsics: {k:?}");
        k
    }

    pub fn is_valid(&self) -> bool {
        self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Pixel from camera-frame point; no depth or bounds check.
    pub fn pixel_from_camera(&self, p: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        )
    }

    /// Unit-depth ray direction (camera frame) through pixel `u`.
    pub fn ray_from_pixel(&self, u: &Vector2<f64>) -> Vector3<f64> {
        Vector3::new((u.x - self.cx) / self.fx, (u.y - self.cy) / self.fy, 1.0)
    }

    /// Bounds check against the bilinear-samplable rectangle
    /// `[0, width-1] x [0, height-1]` (pixel-center convention).
    pub fn contains(&self, u: &Vector2<f64>) -> bool {
        u.x >= 0.0
            && u.x <= (self.width - 1) as f64
            && u.y >= 0.0
            && u.y <= (self.height - 1) as f64
    }

    /// Intrinsics of the next pyramid level: dimensions floored, focal
    /// lengths and principal point halved.
    pub fn halved(&self) -> Self {
        Self {
            fx: self.fx * 0.5,
            fy: self.fy * 0.5,
            cx: self.cx * 0.5,
            cy: self.cy * 0.5,
            width: self.width / 2,
            height: self.height / 2,
        }
    }
}

/// Pinhole projection of world point `p` through world-from-camera pose `T`:
/// `û = K Rᵀ (p - t)`, dehomogenized. Returns `None` if the point is behind
/// the camera (`z <= Z_MIN`) or projects outside the image rectangle.
pub fn project(k: &Intrinsics, pose: &Pose, p: &Vector3<f64>) -> Option<Vector2<f64>> {
    project_with_depth(k, pose, p).map(|(u, _)| u)
}

/// Same as [`project`] but also returns the camera-frame depth.
pub fn project_with_depth(
    k: &Intrinsics,
    pose: &Pose,
    p: &Vector3<f64>,
) -> Option<(Vector2<f64>, f64)> {
    let cam = pose.inverse_transform_point(p);
    if cam.z <= Z_MIN {
        return None;
    }
    let u = k.pixel_from_camera(&cam);
    if k.contains(&u) {
        Some((u, cam.z))
    } else {
        None
    }
}
