//! Randomized algebraic properties of the force allocation.
//!
//! The pseudoinverse solution is additionally checked against an independent
//! oracle: the KKT system of the equality-constrained least-squares problem
//! `min |f|^2  s.t.  G f = w`, solved by dense LU factorization.

mod common;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use skyhaul_core::allocation::{grasp_matrix, nullspace_basis, right_pseudoinverse};

#[test]
fn nullspace_forces_never_leak_into_the_wrench() {
    let mut rng = common::rng(0x10c4_0001);
    for case in 0..1000 {
        let n = rng.gen_range(3..=6);
        let geom = common::random_geometry(&mut rng, n);
        let attitude = common::random_rotation(&mut rng);
        let g = grasp_matrix(&attitude, &geom);
        let basis = nullspace_basis(&g, None).unwrap();
        let mut lambda = DVector::zeros(3 * n - 6);
        for e in lambda.iter_mut() {
            *e = rng.gen_range(-3.0..3.0);
        }
        let leak = (&g * (&basis * &lambda)).norm();
        let bound = 1e-8 * lambda.norm().max(1e-30);
        assert!(
            leak <= bound,
            "case {case} (n = {n}): |G N lambda| = {leak:.3e} > {bound:.3e}"
        );
    }
}

#[test]
fn pseudoinverse_is_a_right_inverse() {
    let mut rng = common::rng(0x10c4_0002);
    for case in 0..1000 {
        let n = rng.gen_range(3..=6);
        let geom = common::random_geometry(&mut rng, n);
        let attitude = common::random_rotation(&mut rng);
        let g = grasp_matrix(&attitude, &geom);
        let pinv = right_pseudoinverse(&g).unwrap();
        let identity_defect = (&g * &pinv - DMatrix::<f64>::identity(6, 6))
            .iter()
            .fold(0.0f64, |a, &x| a.max(x.abs()));
        assert!(
            identity_defect <= 1e-9,
            "case {case} (n = {n}): max |G G+ - I| entry = {identity_defect:.3e}"
        );
    }
}

/// The pseudoinverse force must be the unique minimum-norm solution of
/// `G f = w`. Oracle: solve the KKT system
///
/// ```text
/// [ I   G^T ] [ f  ]   [ 0 ]
/// [ G    0  ] [ mu ] = [ w ]
/// ```
///
/// with a dense LU factorization and compare component-wise.
#[test]
fn pseudoinverse_matches_constrained_least_squares_oracle() {
    let mut rng = common::rng(0x10c4_0003);
    for case in 0..100 {
        let n = rng.gen_range(3..=6);
        let geom = common::random_geometry(&mut rng, n);
        let attitude = common::random_rotation(&mut rng);
        let g = grasp_matrix(&attitude, &geom);

        let mut w = DVector::zeros(6);
        for e in w.iter_mut() {
            *e = rng.gen_range(-10.0..10.0);
        }

        let cols = 3 * n;
        let dim = cols + 6;
        let mut kkt = DMatrix::<f64>::zeros(dim, dim);
        kkt.view_mut((0, 0), (cols, cols))
            .copy_from(&DMatrix::identity(cols, cols));
        kkt.view_mut((0, cols), (cols, 6)).copy_from(&g.transpose());
        kkt.view_mut((cols, 0), (6, cols)).copy_from(&g);
        let mut rhs = DVector::zeros(dim);
        rhs.rows_mut(cols, 6).copy_from(&w);
        let solution = kkt
            .lu()
            .solve(&rhs)
            .expect("KKT system of a full-rank grasp is nonsingular");
        let oracle = solution.rows(0, cols).into_owned();

        let f = right_pseudoinverse(&g).unwrap() * &w;
        let err = (&f - &oracle).norm();
        let bound = 1e-8 * (1.0 + f.norm());
        assert!(
            err <= bound,
            "case {case} (n = {n}): |G+ w - KKT solution| = {err:.3e} > {bound:.3e}"
        );
        // Both must reproduce the wrench exactly.
        let replay = (&g * &f - &w).norm();
        assert!(replay <= 1e-9 * (1.0 + w.norm()), "case {case}: G f != w");
    }
}

/// The basis returned for the nullspace is orthonormal and has the expected
/// dimension for every drawn configuration.
#[test]
fn nullspace_basis_is_orthonormal() {
    let mut rng = common::rng(0x10c4_0004);
    for case in 0..200 {
        let n = rng.gen_range(3..=6);
        let geom = common::random_geometry(&mut rng, n);
        let attitude = common::random_rotation(&mut rng);
        let g = grasp_matrix(&attitude, &geom);
        let basis = nullspace_basis(&g, None).unwrap();
        assert_eq!(basis.ncols(), 3 * n - 6, "case {case}: nullity");
        let gram_defect =
            (basis.transpose() * &basis - DMatrix::<f64>::identity(3 * n - 6, 3 * n - 6)).norm();
        assert!(
            gram_defect <= 1e-10,
            "case {case} (n = {n}): |N^T N - I| = {gram_defect:.3e}"
        );
    }
}
