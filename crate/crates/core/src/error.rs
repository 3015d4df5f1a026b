//! Error type shared by every module in the crate.

use thiserror::Error;

/// Anything that can go wrong while building or running a scenario.
///
/// Configuration problems are reported before a run starts; the remaining
/// variants abort a run in progress and carry enough context to identify the
/// offending carrier or configuration.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum CoreError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("carrier index {index} out of range for {n} carriers")]
    IndexOutOfRange { index: usize, n: usize },

    #[error(
        "cable direction rate must stay orthogonal to the unit direction \
         (q . qdot = {dot:.3e})"
    )]
    NonOrthogonalRate { dot: f64 },

    #[error(
        "carrier {carrier} coincides with its attachment point \
         (separation {separation:.3e} m); cable direction undefined"
    )]
    DegenerateDirection { carrier: usize, separation: f64 },

    #[error(
        "force allocation is singular for {n} carriers: smallest/largest \
         singular value of the grasp map = {sigma_min:.3e}/{sigma_max:.3e}"
    )]
    AllocationSingular {
        n: usize,
        sigma_min: f64,
        sigma_max: f64,
    },

    #[error("nullspace dimension changed between control steps: {previous} -> {current}")]
    NullspaceDimensionChanged { previous: usize, current: usize },

    #[error(
        "desired tension for carrier {carrier} is {tension:.4} N, below the \
         {floor:.4} N floor; cable force direction unreliable"
    )]
    TensionBelowFloor {
        carrier: usize,
        tension: f64,
        floor: f64,
    },

    #[error("expected a unit vector, got norm {norm:.6e}")]
    NonUnitVector { norm: f64 },

    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),

    #[error("trajectory must contain at least one segment")]
    EmptyTrajectory,

    #[error(
        "internal-force optimizer exhausted its fallback budget: \
         {count} infeasible steps > allowed {budget}"
    )]
    FallbackBudgetExceeded { count: u64, budget: u64 },
}
