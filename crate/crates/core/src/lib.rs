//! Simulation and control stack for cooperative transport of a cable-suspended
//! rigid load by a team of aerial carriers.
//!
//! The load hangs from `n >= 3` carriers on elastic cables. A wrench-level
//! feedback controller tracks a desired load trajectory, a force allocator
//! splits the commanded wrench into per-cable force setpoints, and an online
//! optimizer shapes the internal (nullspace) forces so that every carrier keeps
//! a strictly positive velocity command — a requirement for carriers that
//! cannot hover in place.
//!
//! Module map:
//! - [`so3`]: rotation-matrix utilities (skew/vee, exponential-map integration)
//! - [`model`]: system geometry, rigid-body and carrier state, kinematic maps
//! - [`allocation`]: grasp matrix, pseudoinverse/nullspace and their rates
//! - [`wrench`]: PID wrench controller on position and attitude errors
//! - [`trajectory`]: piecewise hold/move reference generator
//! - [`feasibility`]: carrier velocity prediction and non-stopping margins
//! - [`optimizer`]: sinusoidal internal-force parameter search
//! - [`scenario`]: declarative scenario description (serde-friendly)
//! - [`sim`]: closed-loop simulator tying all of the above together

pub mod allocation;
pub mod error;
pub mod feasibility;
pub mod model;
pub mod optimizer;
pub mod scenario;
pub mod sim;
pub mod so3;
pub mod trajectory;
pub mod wrench;

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

/// 3-vector of f64, the workhorse type for positions, velocities and forces.
pub type Vec3 = Vector3<f64>;
/// 3x3 matrix of f64.
pub type Mat3 = Matrix3<f64>;
/// 6-vector of f64, used for load wrenches (force stacked over torque).
pub type Vec6 = Vector6<f64>;
/// 6x6 matrix of f64.
pub type Mat6 = Matrix6<f64>;

pub use crate::allocation::{AllocationFrame, AllocationTracker};
pub use crate::error::CoreError;
pub use crate::feasibility::{DesiredCarrierSample, VelocityDecomposition};
pub use crate::model::{CableState, CarrierState, LoadState, SystemGeometry};
pub use crate::optimizer::{
    ConstraintSnapshot, InternalForceParams, OptimizationOutcome, OptimizerWeights, SinusoidBounds,
};
pub use crate::scenario::ScenarioConfig;
pub use crate::sim::{SimRun, SimTrace, TraceRow};
pub use crate::so3::Rotation;
pub use crate::trajectory::{DesiredLoadSample, Segment, TrajectorySpec};
pub use crate::wrench::{ControllerGains, TrackingError, Wrench, WrenchController};
