//! Deterministic fixture builders shared by the pipeline benchmarks.

use skyhaul_core::model::SystemGeometry;
use skyhaul_core::optimizer::{uniform_phases, OptimizerWeights};
use skyhaul_core::scenario::ScenarioConfig;
use skyhaul_core::{ConstraintSnapshot, InternalForceParams, Mat3, Rotation, SinusoidBounds, Vec3};

use nalgebra::{DMatrix, DVector};
use skyhaul_core::allocation::{grasp_matrix, nullspace_basis};

/// Geometry of the reference four-carrier scenario.
pub fn reference_geometry() -> SystemGeometry {
    let config = ScenarioConfig::default();
    let n = config.carriers.count;
    SystemGeometry::new(
        config.carriers.attachment_points(),
        vec![config.cables.length; n],
        config.load.mass,
        config.load.inertia.to_matrix(),
        vec![config.carriers.mass; n],
        config.gravity,
    )
    .expect("reference geometry is valid")
}

/// Mild tilt so no benchmark runs on an exact-symmetry special case.
pub fn tilted_attitude() -> Rotation {
    Rotation::from_rpy(0.08, -0.05, 0.3)
}

/// A frozen decision instant shaped like the mid-flight ones: near-vertical
/// cables, tensions near the static share, small attachment velocities.
pub fn optimizer_instance() -> (InternalForceParams, ConstraintSnapshot, OptimizerWeights) {
    let geom = reference_geometry();
    let n = geom.n();
    let k = 3 * n - 6;
    let g = grasp_matrix(&tilted_attitude(), &geom);
    let nullspace = nullspace_basis(&g, None).expect("grasp has full row rank");
    let mut nullspace_rate = DMatrix::zeros(3 * n, k);
    for (idx, e) in nullspace_rate.iter_mut().enumerate() {
        *e = 0.01 * ((idx % 7) as f64 - 3.0);
    }
    let mut external_rate = DVector::zeros(3 * n);
    for (idx, e) in external_rate.iter_mut().enumerate() {
        *e = 0.02 * ((idx % 5) as f64 - 2.0);
    }
    let static_share = geom.load_mass() * geom.gravity() / n as f64;
    let up = Vec3::new(0.0, 0.0, 1.0);
    let snapshot = ConstraintSnapshot {
        time: 7.25,
        epsilon: 0.18,
        base_velocities: (0..n)
            .map(|i| Vec3::new(0.05, 0.02 * (i as f64 - 1.5), 0.01))
            .collect(),
        lengths: vec![geom.cable_length(0).expect("cable 0 exists"); n],
        tensions: vec![static_share; n],
        projectors: (0..n)
            .map(|_| Mat3::identity() - up * up.transpose())
            .collect(),
        external_rate,
        nullspace,
        nullspace_rate,
    };
    let params = InternalForceParams::new(
        4.0,
        2.0,
        uniform_phases(k),
        SinusoidBounds::new(0.1, 8.0, 0.0, 3.0).expect("bounds are ordered"),
    )
    .expect("parameters sit inside the bounds");
    let weights = OptimizerWeights::new(0.1, 0.1).expect("weights are non-negative");
    (params, snapshot, weights)
}

/// The reference scenario cut down to one second of flight.
pub fn short_scenario() -> ScenarioConfig {
    let mut config = ScenarioConfig::default();
    config.timing.duration = 1.0;
    config
}
