use nalgebra::{Matrix3, Vector2, Vector3};

use crate::geometry::{Intrinsics, Pose};
use crate::scene_points::ScenePoint;

/// Minimum |n·(p - t_r)| for the plane-induced homography to exist.
pub const DEPTH_EPS: f64 = 1e-6;

/// Plane-induced homography from the reference to the target view:
/// `H = K R_tᵀ [nᵀ(p - t_r) E + (t_r - t_t) nᵀ] R_r K⁻¹`.
///
/// The matrix is sign-normalized so that the homogeneous scale of a warped
/// point equals the target-frame depth times a positive factor; `None`
/// when the plane passes through the reference camera center.
pub fn homography(
    t_r: &Pose,
    t_t: &Pose,
    pi: &ScenePoint,
    k: &Intrinsics,
) -> Option<Matrix3<f64>> {
    let n = pi.normal;
    let depth = n.dot(&(pi.position - t_r.translation()));
    if depth.abs() < DEPTH_EPS {
        return None;
    }
    let inner = Matrix3::identity() * depth
        + (t_r.translation() - t_t.translation()) * n.transpose();
    let h = k.matrix()
        * t_t.rotation_matrix().transpose()
        * inner
        * t_r.rotation_matrix()
        * k.inverse_matrix();
    Some(if depth < 0.0 { -h } else { h })
}

/// Warp patch coordinates with a homography and dehomogenize. Degenerate
/// (`None`) if any warped point lands at non-positive homogeneous scale or
/// outside the target image bounds.
pub fn warp_patch(
    h: &Matrix3<f64>,
    coords: &[Vector2<f64>],
    k: &Intrinsics,
) -> Option<Vec<Vector2<f64>>> {
    let mut out = Vec::with_capacity(coords.len());
    for c in coords {
        let v = h * Vector3::new(c.x, c.y, 1.0);
        if v.z <= 1e-12 {
            return None;
        }
        let u = Vector2::new(v.x / v.z, v.y / v.z);
        if !k.contains(&u) {
            return None;
        }
        out.push(u);
    }
    Some(out)
}
