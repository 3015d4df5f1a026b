//! System description and rigid-body kinematics.
//!
//! A rigid load of mass `m_L` and inertia `J_L` hangs from `n >= 3` carriers.
//! Cable `i` connects carrier `i` to the load-frame attachment point `b_i` and
//! has nominal length `L_i`. All kinematic maps here treat cables as taut,
//! straight segments along the unit direction `q_i` pointing from the
//! attachment toward the carrier; the elastic behaviour lives in [`crate::sim`].

use crate::error::CoreError;
use crate::so3::Rotation;
use crate::{Mat3, Vec3};

/// Tolerance on `q . qdot` before a direction rate is rejected as inconsistent
/// with a unit direction.
pub const DIRECTION_RATE_TOL: f64 = 1e-8;

/// Separation below which the carrier-to-attachment direction is undefined.
pub const DEGENERATE_SEPARATION: f64 = 1e-9;

/// Immutable physical description of the load/carrier team.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemGeometry {
    attachments: Vec<Vec3>,
    cable_lengths: Vec<f64>,
    load_mass: f64,
    load_inertia: Mat3,
    load_inertia_inv: Mat3,
    carrier_masses: Vec<f64>,
    gravity: f64,
}

impl SystemGeometry {
    /// Validates and freezes the team description.
    ///
    /// Rejected configurations: fewer than three carriers, mismatched array
    /// lengths, non-positive masses/lengths/gravity, a load inertia that is
    /// not symmetric positive definite, and attachment points that are all
    /// collinear (the torque rows of the force allocation would be rank
    /// deficient for every attitude).
    pub fn new(
        attachments: Vec<Vec3>,
        cable_lengths: Vec<f64>,
        load_mass: f64,
        load_inertia: Mat3,
        carrier_masses: Vec<f64>,
        gravity: f64,
    ) -> Result<Self, CoreError> {
        let n = attachments.len();
        if n < 3 {
            return Err(CoreError::InvalidGeometry(format!(
                "need at least 3 carriers, got {n}"
            )));
        }
        if cable_lengths.len() != n || carrier_masses.len() != n {
            return Err(CoreError::InvalidGeometry(format!(
                "expected {n} cable lengths and carrier masses, got {} and {}",
                cable_lengths.len(),
                carrier_masses.len()
            )));
        }
        if let Some(bad) = cable_lengths.iter().find(|l| **l <= 0.0 || l.is_nan()) {
            return Err(CoreError::InvalidGeometry(format!(
                "cable lengths must be positive, got {bad}"
            )));
        }
        if let Some(bad) = carrier_masses.iter().find(|m| **m <= 0.0 || m.is_nan()) {
            return Err(CoreError::InvalidGeometry(format!(
                "carrier masses must be positive, got {bad}"
            )));
        }
        if load_mass <= 0.0 || load_mass.is_nan() {
            return Err(CoreError::InvalidGeometry(format!(
                "load mass must be positive, got {load_mass}"
            )));
        }
        if gravity <= 0.0 || gravity.is_nan() {
            return Err(CoreError::InvalidGeometry(format!(
                "gravity must be positive, got {gravity}"
            )));
        }
        let asym = (load_inertia - load_inertia.transpose()).norm();
        if asym > 1e-9 * load_inertia.norm().max(1.0) {
            return Err(CoreError::InvalidGeometry(format!(
                "load inertia must be symmetric (asymmetry {asym:.3e})"
            )));
        }
        let chol = nalgebra::Cholesky::new(load_inertia);
        if chol.is_none() {
            return Err(CoreError::InvalidGeometry(
                "load inertia must be positive definite".into(),
            ));
        }
        if Self::attachments_collinear(&attachments) {
            return Err(CoreError::InvalidGeometry(
                "attachment points are collinear; load torque cannot be allocated".into(),
            ));
        }
        let load_inertia_inv = load_inertia
            .try_inverse()
            .expect("positive-definite matrix is invertible");
        Ok(SystemGeometry {
            attachments,
            cable_lengths,
            load_mass,
            load_inertia,
            load_inertia_inv,
            carrier_masses,
            gravity,
        })
    }

    /// Points are collinear iff every pairwise difference from the first point
    /// is parallel; equivalently all cross products vanish.
    fn attachments_collinear(points: &[Vec3]) -> bool {
        let p0 = points[0];
        let scale: f64 = points
            .iter()
            .map(|p| (p - p0).norm())
            .fold(0.0, f64::max)
            .max(1e-12);
        let mut max_cross: f64 = 0.0;
        for i in 1..points.len() {
            for j in (i + 1)..points.len() {
                let c = (points[i] - p0).cross(&(points[j] - p0)).norm();
                max_cross = max_cross.max(c);
            }
        }
        max_cross <= 1e-12 * scale * scale
    }

    pub fn n(&self) -> usize {
        self.attachments.len()
    }

    /// Dimension of the internal-force space, `3n - 6` when the grasp map has
    /// full rank.
    pub fn nullity(&self) -> usize {
        3 * self.n() - 6
    }

    pub fn attachments(&self) -> &[Vec3] {
        &self.attachments
    }

    pub fn attachment(&self, i: usize) -> Result<&Vec3, CoreError> {
        self.attachments.get(i).ok_or(CoreError::IndexOutOfRange {
            index: i,
            n: self.n(),
        })
    }

    pub fn cable_lengths(&self) -> &[f64] {
        &self.cable_lengths
    }

    pub fn cable_length(&self, i: usize) -> Result<f64, CoreError> {
        self.cable_lengths
            .get(i)
            .copied()
            .ok_or(CoreError::IndexOutOfRange {
                index: i,
                n: self.n(),
            })
    }

    /// Replaces the nominal cable lengths (used when the planner lengthens
    /// cables to account for static stretch). Lengths must stay positive.
    pub fn with_cable_lengths(mut self, lengths: Vec<f64>) -> Result<Self, CoreError> {
        if lengths.len() != self.n() || lengths.iter().any(|l| *l <= 0.0 || l.is_nan()) {
            return Err(CoreError::InvalidGeometry(
                "replacement cable lengths must be positive, one per carrier".into(),
            ));
        }
        self.cable_lengths = lengths;
        Ok(self)
    }

    pub fn load_mass(&self) -> f64 {
        self.load_mass
    }

    pub fn load_inertia(&self) -> &Mat3 {
        &self.load_inertia
    }

    pub fn load_inertia_inv(&self) -> &Mat3 {
        &self.load_inertia_inv
    }

    pub fn carrier_masses(&self) -> &[f64] {
        &self.carrier_masses
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    /// Load weight vector in the world frame (points down).
    pub fn weight(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, -self.load_mass * self.gravity)
    }
}

/// Rigid-body state of the load. Angular velocity is expressed in the body
/// frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadState {
    pub position: Vec3,
    pub attitude: Rotation,
    pub velocity: Vec3,
    pub angular_velocity: Vec3,
}

impl LoadState {
    pub fn at_rest(position: Vec3, attitude: Rotation) -> Self {
        LoadState {
            position,
            attitude,
            velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
        }
    }

    /// World position of attachment point `i`.
    pub fn attachment_world(&self, geom: &SystemGeometry, i: usize) -> Result<Vec3, CoreError> {
        Ok(self.position + self.attitude.rotate(geom.attachment(i)?))
    }

    /// World velocity of attachment point `i`:
    /// `v_L + R S(omega) b_i`.
    pub fn attachment_velocity_world(
        &self,
        geom: &SystemGeometry,
        i: usize,
    ) -> Result<Vec3, CoreError> {
        let b = geom.attachment(i)?;
        Ok(self.velocity + self.attitude.rotate(&self.angular_velocity.cross(b)))
    }
}

/// Translational state of one carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrierState {
    pub position: Vec3,
    pub velocity: Vec3,
}

/// A taut cable: unit direction from attachment to carrier plus tension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CableState {
    direction: Vec3,
    tension: f64,
}

impl CableState {
    /// Direction must be unit within `1e-9`; tension must be non-negative.
    pub fn new(direction: Vec3, tension: f64) -> Result<Self, CoreError> {
        let norm = direction.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(CoreError::NonUnitVector { norm });
        }
        if tension < 0.0 {
            return Err(CoreError::InvalidGeometry(format!(
                "cable tension must be non-negative, got {tension}"
            )));
        }
        Ok(CableState { direction, tension })
    }

    pub fn direction(&self) -> &Vec3 {
        &self.direction
    }

    pub fn tension(&self) -> f64 {
        self.tension
    }

    /// Force the cable exerts on the load (pulls toward the carrier).
    pub fn force_on_load(&self) -> Vec3 {
        self.tension * self.direction
    }
}

/// Carrier position from the load pose and cable direction:
/// `p_R,i = p_L + R b_i + L_i q_i`.
pub fn carrier_position_from_load(
    load: &LoadState,
    direction: &Vec3,
    geom: &SystemGeometry,
    i: usize,
) -> Result<Vec3, CoreError> {
    let norm = direction.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(CoreError::NonUnitVector { norm });
    }
    Ok(load.attachment_world(geom, i)? + geom.cable_length(i)? * direction)
}

/// Carrier velocity from the load twist and cable direction rate:
/// `v_R,i = v_L + R S(omega) b_i + L_i qdot_i`.
///
/// `qdot` must be orthogonal to `q` (a unit vector can only rotate); the call
/// is rejected when `|q . qdot|` exceeds [`DIRECTION_RATE_TOL`].
pub fn carrier_velocity_from_load(
    load: &LoadState,
    direction: &Vec3,
    direction_rate: &Vec3,
    geom: &SystemGeometry,
    i: usize,
) -> Result<Vec3, CoreError> {
    let dot = direction.dot(direction_rate);
    if dot.abs() > DIRECTION_RATE_TOL * (1.0 + direction_rate.norm()) {
        return Err(CoreError::NonOrthogonalRate { dot });
    }
    Ok(load.attachment_velocity_world(geom, i)? + geom.cable_length(i)? * direction_rate)
}

/// Unit direction and separation from attachment `i` to a carrier position.
pub fn cable_direction(
    carrier_position: &Vec3,
    load: &LoadState,
    geom: &SystemGeometry,
    i: usize,
) -> Result<(Vec3, f64), CoreError> {
    let delta = carrier_position - load.attachment_world(geom, i)?;
    let separation = delta.norm();
    if separation < DEGENERATE_SEPARATION {
        return Err(CoreError::DegenerateDirection {
            carrier: i,
            separation,
        });
    }
    Ok((delta / separation, separation))
}
