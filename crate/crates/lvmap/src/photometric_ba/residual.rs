use nalgebra::{DVector, Matrix2x3, Matrix3, SMatrix, Vector2, Vector3};

use crate::geometry::{skew, Image, Intrinsics, Z_MIN};

use super::homography::DEPTH_EPS;
use super::problem::CostItem;
use super::CameraState;

/// Per-frame parameter block layout: translation increment (3), rotation
/// increment (3), log-exposure increment (1).
pub const FRAME_PARAMS: usize = 7;

pub type PixelJacobian = SMatrix<f64, 3, 7>;

/// Raw (unweighted, un-robustified) residual of one cost item at the
/// given states, one RGB triple per patch pixel.
#[derive(Clone, Debug)]
pub struct ResidualEval {
    pub residuals: Vec<Vector3<f64>>,
    /// Inverse-covariance scale of Eq-style Mahalanobis weighting:
    /// `eps_r^2 + eps_t^2`, constant within one linearization.
    pub sigma_weight: f64,
}

impl ResidualEval {
    /// Stacked residual vector of length 3·N².
    pub fn stacked(&self) -> DVector<f64> {
        let mut v = DVector::zeros(3 * self.residuals.len());
        for (i, r) in self.residuals.iter().enumerate() {
            v[3 * i] = r.x;
            v[3 * i + 1] = r.y;
            v[3 * i + 2] = r.z;
        }
        v
    }
}

/// Residual plus analytic Jacobians with respect to the reference and
/// target frame parameters.
#[derive(Clone, Debug)]
pub struct JacobianEval {
    pub residuals: Vec<Vector3<f64>>,
    pub j_ref: Vec<PixelJacobian>,
    pub j_tgt: Vec<PixelJacobian>,
    pub sigma_weight: f64,
}

struct WarpIntermediates {
    /// Ray direction in the reference camera frame (unit depth).
    g: Vector3<f64>,
    /// World ray direction `R_r g`.
    a: Vector3<f64>,
    /// Plane denominator `n·a`.
    denom: f64,
    /// Ray parameter (reference-frame depth of the plane intersection).
    s: f64,
    /// Target camera coordinates of the intersection.
    y: Vector3<f64>,
    /// Target pixel.
    u_t: Vector2<f64>,
}

/// Warp one reference pixel through the scene plane into the target view,
/// keeping the intermediates the Jacobian needs. `None` on any geometric
/// degeneracy (plane through the reference center, grazing ray, point
/// behind either camera, out of target bounds).
fn warp_pixel(
    state_r: &CameraState,
    state_t: &CameraState,
    item: &CostItem,
    k: &Intrinsics,
    u_r: &Vector2<f64>,
    plane_depth: f64,
) -> Option<WarpIntermediates> {
    let g = k.ray_from_pixel(u_r);
    let a = state_r.pose.rotation_matrix() * g;
    let denom = item.point.normal.dot(&a);
    if denom.abs() < 1e-9 {
        return None;
    }
    let s = plane_depth / denom;
    if s <= Z_MIN {
        return None;
    }
    let x = state_r.pose.translation() + a * s;
    let y = state_t.pose.inverse_transform_point(&x);
    if y.z <= Z_MIN {
        return None;
    }
    let u_t = k.pixel_from_camera(&y);
    if !k.contains(&u_t) {
        return None;
    }
    Some(WarpIntermediates {
        g,
        a,
        denom,
        s,
        y,
        u_t,
    })
}

/// Evaluate the raw photometric residual of one cost item:
/// `eps_t⁻¹ I_t(u_t) − eps_r⁻¹ I_r(u_r)` per patch pixel, with the cached
/// reference colors standing in for `I_r`. Returns `None` when the item is
/// degenerate at these states (skipped this iteration).
pub fn photometric_residual(
    state_r: &CameraState,
    state_t: &CameraState,
    item: &CostItem,
    images: &[&Image],
    k: &Intrinsics,
) -> Option<ResidualEval> {
    let plane_depth = item
        .point
        .normal
        .dot(&(item.point.position - state_r.pose.translation()));
    if plane_depth.abs() < DEPTH_EPS {
        return None;
    }
    let target_img = images[item.target_frame];
    let inv_eps_r = 1.0 / state_r.exposure;
    let inv_eps_t = 1.0 / state_t.exposure;
    let coords = item.patch.coords();
    let mut residuals = Vec::with_capacity(coords.len());
    for (u_r, c_r) in coords.iter().zip(&item.patch.colors) {
        let warp = warp_pixel(state_r, state_t, item, k, u_r, plane_depth)?;
        let c_t = target_img.sample_bilinear(&warp.u_t)?;
        residuals.push(c_t * inv_eps_t - c_r * inv_eps_r);
    }
    Some(ResidualEval {
        residuals,
        sigma_weight: state_r.exposure * state_r.exposure
            + state_t.exposure * state_t.exposure,
    })
}

/// Residual and analytic Jacobians of one cost item with respect to both
/// frames' parameters (translation, rotation, log exposure). The cached
/// reference colors are constants, so the reference pose enters only
/// through the warp.
pub fn residual_jacobians(
    state_r: &CameraState,
    state_t: &CameraState,
    item: &CostItem,
    images: &[&Image],
    k: &Intrinsics,
) -> Option<JacobianEval> {
    let n = item.point.normal;
    let plane_depth = n.dot(&(item.point.position - state_r.pose.translation()));
    if plane_depth.abs() < DEPTH_EPS {
        return None;
    }
    let target_img = images[item.target_frame];
    let inv_eps_r = 1.0 / state_r.exposure;
    let inv_eps_t = 1.0 / state_t.exposure;
    let rot_r = state_r.pose.rotation_matrix();
    let rot_t_inv = state_t.pose.rotation_matrix().transpose();

    let coords = item.patch.coords();
    let mut residuals = Vec::with_capacity(coords.len());
    let mut j_ref = Vec::with_capacity(coords.len());
    let mut j_tgt = Vec::with_capacity(coords.len());

    for (u_r, c_r) in coords.iter().zip(&item.patch.colors) {
        let w = warp_pixel(state_r, state_t, item, k, u_r, plane_depth)?;
        let (c_t, grad_u, grad_v) = target_img.sample_bilinear_with_gradient(&w.u_t)?;
        residuals.push(c_t * inv_eps_t - c_r * inv_eps_r);

        // d(residual)/d(u_t): bilinear image gradient scaled by 1/eps_t.
        let mut g_img = SMatrix::<f64, 3, 2>::zeros();
        g_img.set_column(0, &(grad_u * inv_eps_t));
        g_img.set_column(1, &(grad_v * inv_eps_t));

        // d(u_t)/d(y): pinhole projection differential.
        let inv_z = 1.0 / w.y.z;
        let proj = Matrix2x3::new(
            k.fx * inv_z,
            0.0,
            -k.fx * w.y.x * inv_z * inv_z,
            0.0,
            k.fy * inv_z,
            -k.fy * w.y.y * inv_z * inv_z,
        );
        let dr_dy = g_img * proj; // 3x3

        // Target frame: y = R_tᵀ(x - t_t) with right-multiplied increment:
        // dy/d(rho_t) = -I, dy/d(phi_t) = [y]x.
        let mut jt = PixelJacobian::zeros();
        jt.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-dr_dy));
        jt.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&(dr_dy * skew(&w.y)));
        jt.set_column(6, &(-(c_t * inv_eps_t)));
        j_tgt.push(jt);

        // Reference frame: x = t_r + s a with s = n·(p - t_r)/(n·a):
        // dx/dxi_r = (I - a nᵀ/D) R_r [I | -s [g]x], then y = R_tᵀ x.
        let m_mat: Matrix3<f64> =
            (Matrix3::identity() - w.a * n.transpose() / w.denom) * rot_r;
        let dr_dx = dr_dy * rot_t_inv;
        let mut jr = PixelJacobian::zeros();
        jr.fixed_view_mut::<3, 3>(0, 0).copy_from(&(dr_dx * m_mat));
        jr.fixed_view_mut::<3, 3>(0, 3)
            .copy_from(&(dr_dx * m_mat * (-w.s * skew(&w.g))));
        jr.set_column(6, &(c_r * inv_eps_r));
        j_ref.push(jr);
    }

    Some(JacobianEval {
        residuals,
        j_ref,
        j_tgt,
        sigma_weight: state_r.exposure * state_r.exposure
            + state_t.exposure * state_t.exposure,
    })
}
