//! PID wrench controller for the load.
//!
//! Given the measured load state and a reference sample, the controller
//! produces a desired wrench (world-frame force, body-frame torque):
//!
//! ```text
//! f_d   = -Kp e_p - Kv e_v - Ki \int e_p  + m_L g e3
//! tau_d = -Kr e_R - Kw e_w - Kir \int e_R + omega x (J omega)
//! ```
//!
//! with the attitude error `e_R = 1/2 (R_d^T R - R^T R_d)^vee` and the rate
//! error `e_w = omega - R^T omega_d` (the reference rate transported into the
//! body frame before differencing). Integrals use the trapezoid rule and are
//! clamped per axis so a persistent offset cannot wind up an unbounded
//! correction.

use crate::error::CoreError;
use crate::model::{LoadState, SystemGeometry};
use crate::so3::vee;
use crate::trajectory::DesiredLoadSample;
use crate::{Vec3, Vec6};

/// Diagonal, non-negative gain set. Scalars in the standard tuning apply the
/// same gain to every axis; per-axis values are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    pub position: Vec3,
    pub velocity: Vec3,
    pub integral_position: Vec3,
    pub attitude: Vec3,
    pub angular_rate: Vec3,
    pub integral_attitude: Vec3,
}

impl ControllerGains {
    /// Uniform gains on every axis.
    pub fn uniform(kp: f64, kv: f64, ki: f64, kr: f64, kw: f64, kir: f64) -> Self {
        ControllerGains {
            position: Vec3::repeat(kp),
            velocity: Vec3::repeat(kv),
            integral_position: Vec3::repeat(ki),
            attitude: Vec3::repeat(kr),
            angular_rate: Vec3::repeat(kw),
            integral_attitude: Vec3::repeat(kir),
        }
    }

    fn validate(&self) -> Result<(), CoreError> {
        let all = [
            self.position,
            self.velocity,
            self.integral_position,
            self.attitude,
            self.angular_rate,
            self.integral_attitude,
        ];
        if all.iter().any(|g| g.min() < 0.0) {
            return Err(CoreError::InvalidConfig(
                "controller gains must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Per-axis clamp on the two error integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralLimits {
    /// Position-integral clamp in m*s per axis.
    pub position: f64,
    /// Attitude-integral clamp in s per axis (the attitude error is
    /// dimensionless).
    pub attitude: f64,
}

impl Default for IntegralLimits {
    fn default() -> Self {
        IntegralLimits {
            position: 2.0,
            attitude: 1.0,
        }
    }
}

/// Error snapshot produced each control tick; the integrals are the values
/// after the tick's update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingError {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: Vec3,
    pub angular_rate: Vec3,
    pub integral_position: Vec3,
    pub integral_attitude: Vec3,
}

/// World-frame force plus body-frame torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Wrench {
    pub fn zero() -> Self {
        Wrench {
            force: Vec3::zeros(),
            torque: Vec3::zeros(),
        }
    }

    pub fn to_vector(&self) -> Vec6 {
        Vec6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.torque.x,
            self.torque.y,
            self.torque.z,
        )
    }

    pub fn from_vector(v: &Vec6) -> Self {
        Wrench {
            force: Vec3::new(v[0], v[1], v[2]),
            torque: Vec3::new(v[3], v[4], v[5]),
        }
    }
}

/// Stateful wrench controller (carries the error integrals).
#[derive(Debug, Clone)]
pub struct WrenchController {
    gains: ControllerGains,
    limits: IntegralLimits,
    integral_position: Vec3,
    integral_attitude: Vec3,
    previous: Option<(Vec3, Vec3)>,
}

fn clamp_per_axis(v: Vec3, limit: f64) -> Vec3 {
    v.map(|x| x.clamp(-limit, limit))
}

impl WrenchController {
    pub fn new(gains: ControllerGains, limits: IntegralLimits) -> Result<Self, CoreError> {
        gains.validate()?;
        let invalid = |x: f64| x <= 0.0 || x.is_nan();
        if invalid(limits.position) || invalid(limits.attitude) {
            return Err(CoreError::InvalidConfig(
                "integral clamps must be positive".into(),
            ));
        }
        Ok(WrenchController {
            gains,
            limits,
            integral_position: Vec3::zeros(),
            integral_attitude: Vec3::zeros(),
            previous: None,
        })
    }

    /// Current tracking errors, updating the internal integrals by one
    /// trapezoid step of width `dt`. The first call after construction or
    /// [`reset`](Self::reset) only primes the integrator.
    pub fn compute_errors(
        &mut self,
        load: &LoadState,
        desired: &DesiredLoadSample,
        dt: f64,
    ) -> TrackingError {
        debug_assert!(dt > 0.0, "control period must be positive");
        let e_p = load.position - desired.position;
        let e_v = load.velocity - desired.velocity;

        let q = desired.attitude.matrix().transpose() * load.attitude.matrix();
        let e_r = vee(&(0.5 * (q - q.transpose())));
        let omega_d_body = load.attitude.rotate_inv(&desired.angular_velocity);
        let e_w = load.angular_velocity - omega_d_body;

        if let Some((prev_p, prev_r)) = self.previous {
            self.integral_position = clamp_per_axis(
                self.integral_position + 0.5 * dt * (prev_p + e_p),
                self.limits.position,
            );
            self.integral_attitude = clamp_per_axis(
                self.integral_attitude + 0.5 * dt * (prev_r + e_r),
                self.limits.attitude,
            );
        }
        self.previous = Some((e_p, e_r));

        TrackingError {
            position: e_p,
            velocity: e_v,
            attitude: e_r,
            angular_rate: e_w,
            integral_position: self.integral_position,
            integral_attitude: self.integral_attitude,
        }
    }

    /// Desired wrench for the given errors, with gravity and gyroscopic
    /// feedforward.
    pub fn wrench(
        &self,
        errors: &TrackingError,
        load: &LoadState,
        geom: &SystemGeometry,
    ) -> Wrench {
        let g = &self.gains;
        let force = -g.position.component_mul(&errors.position)
            - g.velocity.component_mul(&errors.velocity)
            - g.integral_position.component_mul(&errors.integral_position)
            + Vec3::new(0.0, 0.0, geom.load_mass() * geom.gravity());
        let j_omega = geom.load_inertia() * load.angular_velocity;
        let torque = -g.attitude.component_mul(&errors.attitude)
            - g.angular_rate.component_mul(&errors.angular_rate)
            - g.integral_attitude.component_mul(&errors.integral_attitude)
            + load.angular_velocity.cross(&j_omega);
        Wrench { force, torque }
    }

    /// Clears the integrals and the trapezoid memory.
    pub fn reset(&mut self) {
        self.integral_position = Vec3::zeros();
        self.integral_attitude = Vec3::zeros();
        self.previous = None;
    }

    pub fn gains(&self) -> &ControllerGains {
        &self.gains
    }
}
