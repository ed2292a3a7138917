use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

/// Rigid transform in SE(3), world-from-sensor.
///
/// Rotation is stored as a unit quaternion to avoid orthonormality drift
/// under repeated composition; it is re-normalized after every update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

/// Serialized form: translation plus quaternion in (x, y, z, w) order.
#[derive(Serialize, Deserialize)]
struct PoseRepr {
    t: [f64; 3],
    q_xyzw: [f64; 4],
}

impl From<PoseRepr> for Pose {
    fn from(r: PoseRepr) -> Self {
        Pose::from_quaternion_xyzw(
            r.q_xyzw[0],
            r.q_xyzw[1],
            r.q_xyzw[2],
            r.q_xyzw[3],
            Vector3::new(r.t[0], r.t[1], r.t[2]),
        )
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        let q = p.rotation.quaternion();
        PoseRepr {
            t: [p.translation.x, p.translation.y, p.translation.z],
            q_xyzw: [q.i, q.j, q.k, q.w],
        }
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Build from a rotation matrix, re-orthonormalizing through the
    /// quaternion conversion.
    pub fn from_matrix_parts(rotation: &Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let q = UnitQuaternion::from_matrix(rotation);
        Self {
            rotation: q,
            translation,
        }
    }

    pub fn from_quaternion_xyzw(x: f64, y: f64, z: f64, w: f64, translation: Vector3<f64>) -> Self {
        let q = UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z));
        Self {
            rotation: q,
            translation,
        }
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        self.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    /// Composition: the result applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv_rot = self.rotation.inverse();
        Pose {
            rotation: inv_rot,
            translation: -(inv_rot * self.translation),
        }
    }

    /// `R * p + t`: sensor frame to world frame.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `Rᵀ * (p - t)`: world frame to sensor frame.
    pub fn inverse_transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse() * (p - self.translation)
    }

    /// Right-multiplied exponential-map update: `T * Exp(xi)` with
    /// `xi = (rho, phi)` (translation part first).
    pub fn retract(&self, xi: &Vector6<f64>) -> Pose {
        self.compose(&se3_exp(xi))
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Rotation angle (radians) of `self⁻¹ * other`.
    pub fn rotation_angle_to(&self, other: &Pose) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }

    /// Translation distance to `other`.
    pub fn translation_distance_to(&self, other: &Pose) -> f64 {
        (self.translation - other.translation).norm()
    }
}

/// Skew-symmetric matrix such that `skew(a) * b = a × b`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// SE(3) exponential map. `xi = (rho, phi)`; the translation part is
/// `V(phi) * rho` with the usual left Jacobian `V`.
pub fn se3_exp(xi: &Vector6<f64>) -> Pose {
    let rho = Vector3::new(xi[0], xi[1], xi[2]);
    let phi = Vector3::new(xi[3], xi[4], xi[5]);
    let theta = phi.norm();

    let rotation = UnitQuaternion::from_scaled_axis(phi);

    let v = if theta < 1e-10 {
        Matrix3::identity() + 0.5 * skew(&phi)
    } else {
        let k = skew(&phi);
        let theta2 = theta * theta;
        Matrix3::identity()
            + ((1.0 - theta.cos()) / theta2) * k
            + ((theta - theta.sin()) / (theta2 * theta)) * (k * k)
    };

    Pose {
        rotation,
        translation: v * rho,
    }
}
