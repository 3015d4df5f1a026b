//! Shared generators for the integration suites: seeded RNG, random rigid
//! configurations, and random multi-carrier geometries.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skyhaul_core::model::SystemGeometry;
use skyhaul_core::{Mat3, Rotation, Vec3};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let norm = v.norm();
        if norm > 1e-3 {
            return v / norm;
        }
    }
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation {
    let axis = random_unit(rng);
    let angle = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    Rotation::from_axis_angle(&axis, angle).expect("axis is unit length")
}

/// Angular velocity with entries of order one, expressed in the body frame.
pub fn random_omega(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(
        rng.gen_range(-1.5..1.5),
        rng.gen_range(-1.5..1.5),
        rng.gen_range(-1.5..1.5),
    )
}

/// Random rigid load carried by `n` carriers on a jittered attachment ring.
///
/// The ring keeps the attachment set safely non-collinear for any `n >= 3`;
/// jitter in radius and height exercises non-planar, irregular geometry.
pub fn random_geometry(rng: &mut ChaCha8Rng, n: usize) -> SystemGeometry {
    let radius = rng.gen_range(0.15..0.45);
    let attachments = (0..n)
        .map(|i| {
            let angle = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let r = radius * rng.gen_range(0.85..1.15);
            Vec3::new(r * angle.cos(), r * angle.sin(), rng.gen_range(-0.05..0.05))
        })
        .collect();
    let lengths = (0..n).map(|_| rng.gen_range(0.5..1.2)).collect();
    let mass = rng.gen_range(0.5..2.0);
    let j = rng.gen_range(0.005..0.03);
    let inertia = Mat3::from_diagonal(&Vec3::new(
        j,
        j * rng.gen_range(0.8..1.6),
        j * rng.gen_range(0.8..1.6),
    ));
    let carrier_masses = (0..n).map(|_| rng.gen_range(0.005..0.05)).collect();
    SystemGeometry::new(attachments, lengths, mass, inertia, carrier_masses, 9.81)
        .expect("ring geometry is always valid")
}
