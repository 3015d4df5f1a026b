//! Rotation-matrix utilities.
//!
//! Attitudes are kept as plain 3x3 rotation matrices wrapped in [`Rotation`],
//! which guarantees orthonormality on construction and after every update.
//! The hat/vee pair maps between vectors and antisymmetric matrices, and
//! [`integrate_rotation`] advances an attitude by one step of body-frame
//! angular velocity through the closed-form matrix exponential.

use crate::error::CoreError;
use crate::{Mat3, Vec3};

/// Frobenius-norm tolerance for accepting a matrix as orthonormal.
pub const ORTHONORMALITY_TOL: f64 = 1e-9;

/// Below this angle (radians) the Rodrigues coefficients switch to their
/// Taylor expansions to avoid 0/0.
const SMALL_ANGLE: f64 = 1e-7;

/// Maps a vector to the antisymmetric matrix S(v) with S(v) w = v x w.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(
        0.0, -v.z, v.y, //
        v.z, 0.0, -v.x, //
        -v.y, v.x, 0.0,
    )
}

/// Inverse of [`skew`]: extracts the vector from an antisymmetric matrix.
///
/// The input is expected to be antisymmetric to within numerical noise; the
/// symmetric part is discarded by averaging opposite entries, so feeding a
/// matrix with a large symmetric part silently loses it.
pub fn vee(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rotation matrix for a rotation-vector (axis times angle) via Rodrigues'
/// formula, with a series fallback near zero angle.
pub fn exp_so3(phi: &Vec3) -> Mat3 {
    let theta = phi.norm();
    let s = skew(phi);
    let (a, b) = if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    Mat3::identity() + a * s + b * (s * s)
}

/// A validated rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Wraps a matrix after checking `||R^T R - I||_F <= 1e-9` and
    /// `det R > 0` (proper rotation, no reflection).
    pub fn from_matrix(m: Mat3) -> Result<Self, CoreError> {
        let defect = (m.transpose() * m - Mat3::identity()).norm();
        if defect > ORTHONORMALITY_TOL {
            return Err(CoreError::InvalidRotation(format!(
                "orthonormality defect {defect:.3e} exceeds {ORTHONORMALITY_TOL:.0e}"
            )));
        }
        if m.determinant() <= 0.0 {
            return Err(CoreError::InvalidRotation(format!(
                "determinant {:.3e} is not positive",
                m.determinant()
            )));
        }
        Ok(Rotation(m))
    }

    /// Rotation about a unit axis by the given angle.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Result<Self, CoreError> {
        let norm = axis.norm();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(CoreError::NonUnitVector { norm });
        }
        Ok(Rotation(exp_so3(&(axis / norm * angle))))
    }

    /// Intrinsic roll-pitch-yaw (x-y-z) construction.
    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64) -> Self {
        let m = nalgebra::Rotation3::from_euler_angles(roll, pitch, yaw);
        Rotation(*m.matrix())
    }

    /// (roll, pitch, yaw) of this rotation.
    pub fn to_rpy(&self) -> (f64, f64, f64) {
        nalgebra::Rotation3::from_matrix_unchecked(self.0).euler_angles()
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    /// R v: body vector expressed in the world frame.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// R^T v: world vector expressed in the body frame.
    pub fn rotate_inv(&self, v: &Vec3) -> Vec3 {
        self.0.transpose() * v
    }

    /// Frobenius distance of R^T R from the identity; used by tests to track
    /// numerical drift.
    pub fn orthonormality_defect(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).norm()
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(orthonormalize(self.0 * rhs.0))
    }
}

/// One step of the iterative polar projection: X <- X (3 I - X^T X) / 2.
///
/// For X already within O(e) of orthonormal this contracts the defect to
/// O(e^2), which keeps attitudes at machine precision indefinitely when it is
/// applied every integration step.
fn orthonormalize(m: Mat3) -> Mat3 {
    m * (Mat3::identity() * 1.5 - 0.5 * (m.transpose() * m))
}

/// Wraps a matrix that is already a rotation up to round-off, applying one
/// polar-projection cleanup instead of failing validation. For internal use
/// by integrators whose updates are rotations by construction.
pub(crate) fn orthonormalized(m: Mat3) -> Rotation {
    Rotation(orthonormalize(m))
}

/// Advances an attitude by `dt` seconds of constant body-frame angular
/// velocity: `R <- R Exp(S(omega dt))`, followed by one polar-projection
/// cleanup so round-off never accumulates.
pub fn integrate_rotation(r: &Rotation, omega_body: &Vec3, dt: f64) -> Rotation {
    debug_assert!(dt > 0.0, "integration step must be positive");
    let step = exp_so3(&(omega_body * dt));
    Rotation(orthonormalize(r.matrix() * step))
}
