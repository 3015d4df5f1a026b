//! Carrier motion targets and non-stopping margins.
//!
//! Desired cable forces define desired cable directions (`q_d,i = f_d,i /
//! ||f_d,i||`, valid only under tension), which the kinematic maps turn into
//! carrier position and velocity targets. The predicted carrier velocity
//! decomposes into the load velocity at the attachment, an external part
//! driven by the wrench and its rate, and an internal part driven by the
//! nullspace forces:
//!
//! ```text
//! v_i = v_L,i + (L_i / T_i) P_i (e_i + g_i)
//! e   = d(G^+)/dt w_d + G^+ dw_d/dt
//! g   = dN/dt lambda + N dlambda/dt
//! ```
//!
//! with `P_i = I - q_i q_i^T` the projector onto the plane normal to the
//! cable. Carriers that must keep moving need `||v_i||` above a threshold
//! `epsilon`; the margin `||v_i|| - epsilon` is what the internal-force
//! optimizer pushes positive.

use nalgebra::DVector;

use crate::allocation::{carrier_block, AllocationFrame};
use crate::error::CoreError;
use crate::model::{
    carrier_position_from_load, carrier_velocity_from_load, LoadState, SystemGeometry,
};
use crate::{Mat3, Vec3, Vec6};

/// Projector onto the plane orthogonal to a unit vector: `I - q q^T`.
pub fn projector(q: &Vec3) -> Result<Mat3, CoreError> {
    let norm = q.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(CoreError::NonUnitVector { norm });
    }
    Ok(Mat3::identity() - q * q.transpose())
}

/// Margin of a velocity against the minimum required speed.
pub fn nonstop_margin(velocity: &Vec3, epsilon: f64) -> f64 {
    velocity.norm() - epsilon
}

/// Per-carrier motion targets derived from desired cable forces.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredCarrierSample {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub directions: Vec<Vec3>,
    pub direction_rates: Vec<Vec3>,
    pub tensions: Vec<f64>,
}

impl DesiredCarrierSample {
    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// Non-stopping margins of the velocity targets.
    pub fn margins(&self, epsilon: f64) -> Vec<f64> {
        self.velocities
            .iter()
            .map(|v| nonstop_margin(v, epsilon))
            .collect()
    }
}

/// Turns stacked desired forces and force rates into carrier targets.
///
/// Fails when any desired tension falls below `tension_floor`: a near-zero
/// force has no reliable direction, so the cable could not be kept taut along
/// it.
pub fn desired_carrier_targets(
    forces: &DVector<f64>,
    force_rates: &DVector<f64>,
    load: &LoadState,
    geom: &SystemGeometry,
    tension_floor: f64,
) -> Result<DesiredCarrierSample, CoreError> {
    let n = geom.n();
    debug_assert_eq!(forces.len(), 3 * n);
    debug_assert_eq!(force_rates.len(), 3 * n);
    let mut out = DesiredCarrierSample {
        positions: Vec::with_capacity(n),
        velocities: Vec::with_capacity(n),
        directions: Vec::with_capacity(n),
        direction_rates: Vec::with_capacity(n),
        tensions: Vec::with_capacity(n),
    };
    for i in 0..n {
        let f = carrier_block(forces, i);
        let tension = f.norm();
        if tension < tension_floor {
            return Err(CoreError::TensionBelowFloor {
                carrier: i,
                tension,
                floor: tension_floor,
            });
        }
        let q = f / tension;
        // Unit-norm constraint: only the transverse part of f's rate turns
        // the direction.
        let q_rate = (projector(&q)? * carrier_block(force_rates, i)) / tension;
        out.positions
            .push(carrier_position_from_load(load, &q, geom, i)?);
        out.velocities
            .push(carrier_velocity_from_load(load, &q, &q_rate, geom, i)?);
        out.directions.push(q);
        out.direction_rates.push(q_rate);
        out.tensions.push(tension);
    }
    Ok(out)
}

/// External part of the desired force rate: `d(G^+)/dt w_d + G^+ dw_d/dt`.
pub fn external_force_rate(
    frame: &AllocationFrame,
    wrench: &Vec6,
    wrench_rate: &Vec6,
) -> DVector<f64> {
    &frame.grasp_pinv_rate * wrench + &frame.grasp_pinv * wrench_rate
}

/// Internal part of the desired force rate: `dN/dt lambda + N dlambda/dt`.
pub fn internal_force_rate(
    frame: &AllocationFrame,
    lambda: &DVector<f64>,
    lambda_rate: &DVector<f64>,
) -> DVector<f64> {
    &frame.nullspace * lambda_rate + &frame.nullspace_rate * lambda
}

/// Explicit velocity decomposition per carrier, mirroring the closed form
/// above. `external` and `internal` are the rows of `e` and `g` for this
/// carrier after projection and scaling by `L_i / T_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityDecomposition {
    pub base: Vec<Vec3>,
    pub external: Vec<Vec3>,
    pub internal: Vec<Vec3>,
    pub predicted: Vec<Vec3>,
}

/// Predicts carrier velocities from the decomposition inputs without going
/// through explicit direction rates.
///
/// `directions` and `tensions` describe the current desired cable directions
/// and magnitudes; `external_rate` and `internal_rate` are the stacked 3n
/// force-rate contributions.
pub fn predict_carrier_velocities(
    load: &LoadState,
    geom: &SystemGeometry,
    directions: &[Vec3],
    tensions: &[f64],
    external_rate: &DVector<f64>,
    internal_rate: &DVector<f64>,
    tension_floor: f64,
) -> Result<VelocityDecomposition, CoreError> {
    let n = geom.n();
    debug_assert_eq!(directions.len(), n);
    debug_assert_eq!(tensions.len(), n);
    let mut out = VelocityDecomposition {
        base: Vec::with_capacity(n),
        external: Vec::with_capacity(n),
        internal: Vec::with_capacity(n),
        predicted: Vec::with_capacity(n),
    };
    for i in 0..n {
        if tensions[i] < tension_floor {
            return Err(CoreError::TensionBelowFloor {
                carrier: i,
                tension: tensions[i],
                floor: tension_floor,
            });
        }
        let scale = geom.cable_length(i)? / tensions[i];
        let p = projector(&directions[i])?;
        let base = load.attachment_velocity_world(geom, i)?;
        let ext = scale * (p * carrier_block(external_rate, i));
        let int = scale * (p * carrier_block(internal_rate, i));
        out.predicted.push(base + ext + int);
        out.base.push(base);
        out.external.push(ext);
        out.internal.push(int);
    }
    Ok(out)
}
