//! Force allocation: mapping between per-cable forces and the net load wrench.
//!
//! Stacking the `n` cable forces into `f` in `R^{3n}`, the wrench on the load
//! is `w = G f` with the 6 x 3n grasp map
//!
//! ```text
//!     G = [ I_3          I_3        ...  I_3         ]
//!         [ S(b_1) R^T   S(b_2) R^T ...  S(b_n) R^T  ]
//! ```
//!
//! (forces in the world frame, torque rows in the load body frame). For a
//! desired wrench `w_d` the allocator returns `f_d = G^+ w_d + N lambda`,
//! where `G^+` is the right pseudoinverse (minimum-norm particular solution)
//! and the columns of `N` span the nullspace of `G` — internal forces that
//! squeeze the load without moving it. `lambda` is chosen elsewhere.
//!
//! Because the nullspace basis returned by a factorization is only defined up
//! to an orthogonal transform, consecutive bases are aligned with an
//! orthogonal Procrustes step before finite-differencing; otherwise the
//! "rate" of the basis would be dominated by arbitrary sign and ordering
//! flips rather than the physical motion of the subspace.

use nalgebra::{DMatrix, DVector};

use crate::error::CoreError;
use crate::model::SystemGeometry;
use crate::so3::{skew, Rotation};
use crate::{Vec3, Vec6};

/// A grasp map is treated as rank deficient when the smallest singular value
/// drops below this fraction of the largest.
pub const RANK_TOL: f64 = 1e-8;

/// Grasp map `G(R)` for the current load attitude.
pub fn grasp_matrix(attitude: &Rotation, geom: &SystemGeometry) -> DMatrix<f64> {
    let n = geom.n();
    let mut g = DMatrix::zeros(6, 3 * n);
    let rt = attitude.matrix().transpose();
    for (i, b) in geom.attachments().iter().enumerate() {
        g.fixed_view_mut::<3, 3>(0, 3 * i).fill_with_identity();
        g.fixed_view_mut::<3, 3>(3, 3 * i)
            .copy_from(&(skew(b) * rt));
    }
    g
}

/// Time derivative of the grasp map under body angular velocity `omega`.
///
/// Only the torque rows move: `d/dt [S(b_i) R^T] = -S(b_i) S(omega) R^T`,
/// from `Rdot = R S(omega)`.
pub fn grasp_matrix_rate(
    attitude: &Rotation,
    omega_body: &Vec3,
    geom: &SystemGeometry,
) -> DMatrix<f64> {
    let n = geom.n();
    let mut g_dot = DMatrix::zeros(6, 3 * n);
    let rt = attitude.matrix().transpose();
    let s_omega = skew(omega_body);
    for (i, b) in geom.attachments().iter().enumerate() {
        g_dot
            .fixed_view_mut::<3, 3>(3, 3 * i)
            .copy_from(&(-skew(b) * s_omega * rt));
    }
    g_dot
}

/// Everything a single SVD of `G` yields: the right pseudoinverse, the
/// inverse Gram matrix `(G G^T)^{-1}` needed for the pseudoinverse rate, and
/// an (unaligned) orthonormal nullspace basis.
struct GraspDecomposition {
    pinv: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    nullspace_raw: DMatrix<f64>,
    sigma_min: f64,
    sigma_max: f64,
}

fn decompose(g: &DMatrix<f64>) -> Result<GraspDecomposition, CoreError> {
    let cols = g.ncols();
    debug_assert_eq!(g.nrows(), 6);
    let svd = g.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    if sigma_min <= RANK_TOL * sigma_max || sigma_min.is_nan() {
        return Err(CoreError::AllocationSingular {
            n: cols / 3,
            sigma_min,
            sigma_max,
        });
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");

    let sigma_inv = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / s));
    let pinv = v_t.transpose() * &sigma_inv * u.transpose();
    let gram_inv =
        u * DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / (s * s))) * u.transpose();

    // The kernel of G is the orthogonal complement of the row space, i.e. the
    // range of the projector P = I - V V^T. A column-pivoted QR of P puts an
    // orthonormal basis of that range in the leading columns of Q.
    let v = v_t.transpose(); // cols x 6
    let projector = DMatrix::identity(cols, cols) - &v * v_t;
    let qr = projector.col_piv_qr();
    let q = qr.q();
    let nullspace_raw = q.columns(0, cols - 6).into_owned();
    debug_assert!(
        (g * &nullspace_raw).norm() <= 1e-9 * sigma_max.max(1.0),
        "extracted basis does not annihilate the grasp map"
    );

    Ok(GraspDecomposition {
        pinv,
        gram_inv,
        nullspace_raw,
        sigma_min,
        sigma_max,
    })
}

/// Right pseudoinverse `G^+ = G^T (G G^T)^{-1}`, computed through the SVD.
///
/// Fails with [`CoreError::AllocationSingular`] when the smallest singular
/// value falls below [`RANK_TOL`] times the largest (e.g. all attachment
/// points collinear), since the torque rows can then no longer be realized.
pub fn right_pseudoinverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>, CoreError> {
    Ok(decompose(g)?.pinv)
}

/// Orthonormal basis of the nullspace of `G` (dimension `3n - 6`).
///
/// When `previous` is given, the fresh basis is rotated onto it by the
/// orthogonal Procrustes solution `Q = U V^T` of `N_raw^T N_prev = U S V^T`,
/// which makes the basis evolve continuously across control steps. A change
/// in nullspace dimension between steps is an error.
pub fn nullspace_basis(
    g: &DMatrix<f64>,
    previous: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>, CoreError> {
    let raw = decompose(g)?.nullspace_raw;
    match previous {
        Some(prev) => align_to_previous(raw, prev),
        None => Ok(raw),
    }
}

fn align_to_previous(
    raw: DMatrix<f64>,
    previous: &DMatrix<f64>,
) -> Result<DMatrix<f64>, CoreError> {
    if raw.ncols() != previous.ncols() || raw.nrows() != previous.nrows() {
        return Err(CoreError::NullspaceDimensionChanged {
            previous: previous.ncols(),
            current: raw.ncols(),
        });
    }
    let overlap = raw.transpose() * previous;
    let svd = overlap.svd(true, true);
    let rotation = svd.u.expect("u requested") * svd.v_t.expect("v_t requested");
    Ok(raw * rotation)
}

/// Analytic rate of the right pseudoinverse:
///
/// ```text
/// d/dt G^+ = Gdot^T M - G^T M (Gdot G^T + G Gdot^T) M,   M = (G G^T)^{-1}
/// ```
pub fn pseudoinverse_rate(
    g: &DMatrix<f64>,
    g_dot: &DMatrix<f64>,
) -> Result<DMatrix<f64>, CoreError> {
    let decomp = decompose(g)?;
    Ok(pseudoinverse_rate_from(g, g_dot, &decomp.gram_inv))
}

fn pseudoinverse_rate_from(
    g: &DMatrix<f64>,
    g_dot: &DMatrix<f64>,
    gram_inv: &DMatrix<f64>,
) -> DMatrix<f64> {
    let gram_rate = g_dot * g.transpose() + g * g_dot.transpose();
    g_dot.transpose() * gram_inv - g.transpose() * gram_inv * gram_rate * gram_inv
}

/// One control step's worth of allocation quantities, all evaluated at the
/// same attitude and angular velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationFrame {
    pub time: f64,
    /// Grasp map `G`, 6 x 3n.
    pub grasp: DMatrix<f64>,
    /// Right pseudoinverse `G^+`, 3n x 6.
    pub grasp_pinv: DMatrix<f64>,
    /// Analytic `dG/dt`.
    pub grasp_rate: DMatrix<f64>,
    /// Analytic `dG^+/dt`.
    pub grasp_pinv_rate: DMatrix<f64>,
    /// Procrustes-aligned nullspace basis `N`, 3n x (3n-6).
    pub nullspace: DMatrix<f64>,
    /// Finite-difference `dN/dt` against the previous aligned basis; zero on
    /// the first frame.
    pub nullspace_rate: DMatrix<f64>,
    /// True on the first frame, when no previous basis exists and
    /// `nullspace_rate` is a placeholder zero.
    pub warm_up: bool,
    /// Extreme singular values of `G`, kept for diagnostics.
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl AllocationFrame {
    pub fn n(&self) -> usize {
        self.grasp.ncols() / 3
    }

    pub fn nullity(&self) -> usize {
        self.nullspace.ncols()
    }
}

/// Builds [`AllocationFrame`]s across control steps, remembering the previous
/// nullspace basis so consecutive bases stay aligned and can be
/// finite-differenced.
#[derive(Debug, Clone, Default)]
pub struct AllocationTracker {
    previous: Option<(f64, DMatrix<f64>)>,
}

impl AllocationTracker {
    pub fn new() -> Self {
        AllocationTracker { previous: None }
    }

    /// Assembles `G`, `G^+`, `N` and their rates at the given attitude.
    ///
    /// `dt` is the spacing to the previous call and is used only for the
    /// finite-difference basis rate.
    pub fn frame(
        &mut self,
        attitude: &Rotation,
        omega_body: &Vec3,
        geom: &SystemGeometry,
        time: f64,
        dt: f64,
    ) -> Result<AllocationFrame, CoreError> {
        let g = grasp_matrix(attitude, geom);
        let decomp = decompose(&g)?;
        let (nullspace, nullspace_rate, warm_up) = match &self.previous {
            Some((_, prev)) => {
                let aligned = align_to_previous(decomp.nullspace_raw, prev)?;
                let rate = (&aligned - prev) / dt;
                (aligned, rate, false)
            }
            None => {
                let zero =
                    DMatrix::zeros(decomp.nullspace_raw.nrows(), decomp.nullspace_raw.ncols());
                (decomp.nullspace_raw, zero, true)
            }
        };
        self.previous = Some((time, nullspace.clone()));

        let grasp_rate = grasp_matrix_rate(attitude, omega_body, geom);
        let grasp_pinv_rate = pseudoinverse_rate_from(&g, &grasp_rate, &decomp.gram_inv);
        Ok(AllocationFrame {
            time,
            grasp: g,
            grasp_pinv: decomp.pinv,
            grasp_rate,
            grasp_pinv_rate,
            nullspace,
            nullspace_rate,
            warm_up,
            sigma_min: decomp.sigma_min,
            sigma_max: decomp.sigma_max,
        })
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }
}

/// Desired cable forces for a wrench plus internal forces:
/// `f_d = G^+ w_d + N lambda`.
pub fn allocate_forces(
    frame: &AllocationFrame,
    wrench: &Vec6,
    lambda: &DVector<f64>,
) -> Result<DVector<f64>, CoreError> {
    if lambda.len() != frame.nullity() {
        return Err(CoreError::InvalidConfig(format!(
            "internal-force vector has {} entries, nullspace dimension is {}",
            lambda.len(),
            frame.nullity()
        )));
    }
    Ok(&frame.grasp_pinv * wrench + &frame.nullspace * lambda)
}

/// Force on carrier `i` out of a stacked 3n-vector.
pub fn carrier_block(stacked: &DVector<f64>, i: usize) -> Vec3 {
    Vec3::new(stacked[3 * i], stacked[3 * i + 1], stacked[3 * i + 2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Mat3;
    use approx::assert_abs_diff_eq;

    fn triangle_geometry() -> SystemGeometry {
        let r = 0.3;
        let attachments = (0..3)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / 3.0;
                Vec3::new(r * a.cos(), r * a.sin(), 0.0)
            })
            .collect();
        SystemGeometry::new(
            attachments,
            vec![0.8; 3],
            1.0,
            Mat3::identity() * 0.01,
            vec![0.01; 3],
            9.81,
        )
        .unwrap()
    }

    fn square_geometry() -> SystemGeometry {
        SystemGeometry::new(
            vec![
                Vec3::new(0.25, 0.0, 0.0),
                Vec3::new(0.0, 0.25, 0.0),
                Vec3::new(-0.25, 0.0, 0.0),
                Vec3::new(0.0, -0.25, 0.0),
            ],
            vec![0.8; 4],
            1.0,
            Mat3::identity() * 0.01,
            vec![0.01; 4],
            9.81,
        )
        .unwrap()
    }

    #[test]
    fn symmetric_triangle_shares_weight_evenly() {
        let geom = triangle_geometry();
        let g = grasp_matrix(&Rotation::identity(), &geom);
        let pinv = right_pseudoinverse(&g).unwrap();
        let w = Vec6::new(0.0, 0.0, 9.81, 0.0, 0.0, 0.0);
        let f = &pinv * w;
        for i in 0..3 {
            let fi = carrier_block(&f, i);
            assert_abs_diff_eq!(fi.z, 9.81 / 3.0, epsilon = 1e-9);
            assert!(fi.xy().norm() < 1e-9, "unexpected horizontal force {fi}");
        }
    }

    #[test]
    fn pseudoinverse_is_a_right_inverse() {
        let geom = square_geometry();
        let r = Rotation::from_rpy(0.2, -0.3, 0.7);
        let g = grasp_matrix(&r, &geom);
        let pinv = right_pseudoinverse(&g).unwrap();
        let residual = (&g * &pinv - DMatrix::identity(6, 6)).norm();
        assert!(residual < 1e-9, "G G^+ - I residual {residual}");
    }

    #[test]
    fn nullspace_is_orthonormal_and_annihilated() {
        let geom = square_geometry();
        let r = Rotation::from_rpy(0.1, 0.4, -0.2);
        let g = grasp_matrix(&r, &geom);
        let n = nullspace_basis(&g, None).unwrap();
        assert_eq!(n.shape(), (12, 6));
        let orth = (n.transpose() * &n - DMatrix::identity(6, 6)).norm();
        assert!(orth < 1e-9, "N^T N - I residual {orth}");
        assert!((&g * &n).norm() < 1e-9, "G N residual {}", (&g * &n).norm());
    }

    #[test]
    fn wrench_is_invariant_to_internal_forces() {
        let geom = square_geometry();
        let mut tracker = AllocationTracker::new();
        let frame = tracker
            .frame(
                &Rotation::from_rpy(0.05, -0.1, 0.3),
                &Vec3::new(0.1, 0.2, -0.1),
                &geom,
                0.0,
                5e-3,
            )
            .unwrap();
        let w = Vec6::new(0.4, -0.2, 9.81, 0.05, -0.02, 0.01);
        let lambda = DVector::from_vec(vec![0.7, -1.2, 0.3, 2.0, -0.5, 0.9]);
        let f = allocate_forces(&frame, &w, &lambda).unwrap();
        let w_real = &frame.grasp * &f;
        for r in 0..6 {
            assert_abs_diff_eq!(w_real[r], w[r], epsilon = 1e-9);
        }
    }

    #[test]
    fn collinear_attachments_make_the_map_singular() {
        // SystemGeometry refuses collinear attachments, so assemble the grasp
        // blocks by hand: three points on the x-axis leave torque about x
        // unreachable.
        let bs = [
            Vec3::new(-0.2, 0.0, 0.0),
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.2, 0.0, 0.0),
        ];
        let mut g = DMatrix::zeros(6, 9);
        for (i, b) in bs.iter().enumerate() {
            g.fixed_view_mut::<3, 3>(0, 3 * i).fill_with_identity();
            g.fixed_view_mut::<3, 3>(3, 3 * i).copy_from(&skew(b));
        }
        assert!(matches!(
            right_pseudoinverse(&g),
            Err(CoreError::AllocationSingular { n: 3, .. })
        ));
        assert!(nullspace_basis(&g, None).is_err());
    }

    #[test]
    fn bases_align_across_a_small_rotation() {
        let geom = square_geometry();
        let dt = 5e-3;
        let omega = Vec3::new(0.0, 0.0, 0.5);
        let g0 = grasp_matrix(&Rotation::identity(), &geom);
        let n0 = nullspace_basis(&g0, None).unwrap();

        let r1 = crate::so3::integrate_rotation(&Rotation::identity(), &omega, dt);
        let g1 = grasp_matrix(&r1, &geom);
        let n1 = nullspace_basis(&g1, Some(&n0)).unwrap();
        let step = (&n1 - &n0).norm();
        assert!(step <= 10.0 * dt, "basis moved {step} over dt {dt}");

        // Alignment follows the previous basis even through a sign flip.
        let flipped = -n0.clone();
        let n1_flipped = nullspace_basis(&g1, Some(&flipped)).unwrap();
        assert!((&n1_flipped + &n1).norm() < 1e-9);
    }

    #[test]
    fn dimension_change_is_reported() {
        let geom = square_geometry();
        let g = grasp_matrix(&Rotation::identity(), &geom);
        let wrong = DMatrix::identity(12, 4);
        assert!(matches!(
            nullspace_basis(&g, Some(&wrong)),
            Err(CoreError::NullspaceDimensionChanged {
                previous: 4,
                current: 6
            })
        ));
    }

    #[test]
    fn grasp_rate_matches_finite_difference() {
        let geom = square_geometry();
        let omega = Vec3::new(0.3, -0.2, 0.4);
        let r = Rotation::from_rpy(0.2, 0.1, -0.4);
        let analytic = grasp_matrix_rate(&r, &omega, &geom);

        let h = 1e-6;
        let plus = grasp_matrix(&crate::so3::integrate_rotation(&r, &omega, h), &geom);
        let minus = grasp_matrix(&crate::so3::integrate_rotation(&r, &(-omega), h), &geom);
        let fd = (plus - minus) / (2.0 * h);
        assert!((analytic - fd).norm() < 1e-6);
    }

    #[test]
    fn tracker_reports_warm_up_only_once() {
        let geom = square_geometry();
        let mut tracker = AllocationTracker::new();
        let f0 = tracker
            .frame(&Rotation::identity(), &Vec3::zeros(), &geom, 0.0, 5e-3)
            .unwrap();
        assert!(f0.warm_up);
        assert_eq!(f0.nullspace_rate.norm(), 0.0);

        let r1 =
            crate::so3::integrate_rotation(&Rotation::identity(), &Vec3::new(0.1, 0.0, 0.2), 5e-3);
        let f1 = tracker
            .frame(&r1, &Vec3::new(0.1, 0.0, 0.2), &geom, 5e-3, 5e-3)
            .unwrap();
        assert!(!f1.warm_up);
        assert!(f1.nullspace_rate.norm() > 0.0);
    }
}
