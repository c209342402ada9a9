use nalgebra::DMatrix;
use phasespace::error::Error;
use phasespace::symplectic::*;
use proptest::prelude::*;
use std::f64::consts::PI;

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Orthogonal factor of a QR decomposition of a matrix built from `seeds`.
fn orthogonal(dim: usize, seeds: &[f64]) -> DMatrix<f64> {
    let m = DMatrix::from_fn(dim, dim, |i, j| seeds[(i * dim + j) % seeds.len()] + if i == j { 2.0 } else { 0.0 });
    m.qr().q()
}

/// `Q D Q^T` with positive pair blocks `d_i`.
fn random_form(n: usize, seeds: &[f64], ds: &[f64]) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        d[(2 * i, 2 * i + 1)] = ds[i];
        d[(2 * i + 1, 2 * i)] = -ds[i];
    }
    let q = orthogonal(2 * n, seeds);
    &q * d * q.transpose()
}

/// Element of `SL(2)` from rotation, squeeze and shear parameters.
fn symplectic_2x2(theta: f64, squeeze: f64, shear: f64) -> DMatrix<f64> {
    let s = DMatrix::from_row_slice(2, 2, &[squeeze, 0.0, 0.0, 1.0 / squeeze]);
    let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, shear, 1.0]);
    rotation(theta) * s * h
}

#[test]
fn form_examples() {
    let j = SymplecticForm::standard(1);
    assert_eq!(j.eval(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), sigma(&[1.0, 0.0], &[0.0, 1.0]));
    let four = SymplecticForm::scaled_standard(1, 4.0).unwrap();
    // (4J)^{-1} = -J/4
    assert!((four.eval(&[1.0, 0.0], &[0.0, 1.0]).unwrap() + 0.25).abs() < 1e-15);
    let sym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    assert!(matches!(SymplecticForm::new(sym), Err(Error::NotAntisymmetric { .. })));
    let zero = DMatrix::zeros(1, 1);
    assert_eq!(SymplecticForm::from_blocks(&zero, &zero).unwrap().matrix(), &standard_j(1));
    let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
    assert!(matches!(SymplecticForm::from_blocks(&bad, &DMatrix::zeros(2, 2)), Err(Error::NotAntisymmetric { .. })));
}

#[test]
fn block_form_factorization() {
    let th = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, -0.5, 0.0]);
    let nm = DMatrix::from_row_slice(2, 2, &[0.0, 0.3, -0.3, 0.0]);
    let form = SymplecticForm::from_blocks(&th, &nm).unwrap();
    let f = form.darboux().unwrap();
    let rebuilt = f.matrix() * standard_j(2) * f.matrix().transpose();
    assert!(max_abs(&(rebuilt - form.matrix())) <= 1e-10 * max_abs(form.matrix()));
    assert!((f.det_abs() - form.det_abs().sqrt()).abs() <= 1e-10);
    let two = DMatrix::identity(2, 2) * 2.0;
    let f = DarbouxFactor::from_matrix(&SymplecticForm::scaled_standard(1, 4.0).unwrap(), two).unwrap();
    assert!(f.residual() < 1e-14);
}

#[test]
fn capacity_examples() {
    let cap = |m: DMatrix<f64>| WignerEllipsoid::new(m).unwrap().capacity();
    assert!((cap(DMatrix::identity(2, 2)) - PI).abs() < 1e-12);
    assert!((cap(DMatrix::identity(2, 2) * 0.25) - 4.0 * PI).abs() < 1e-12);
    assert!((cap(DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 1.0 / 9.0])) - 6.0 * PI).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn factorization_rebuilds_random_forms(
        n in 1usize..=3,
        seeds in prop::collection::vec(-1.0f64..1.0, 36),
        ds in prop::collection::vec(0.2f64..5.0, 3),
    ) {
        let omega = random_form(n, &seeds, &ds);
        let form = SymplecticForm::new(omega.clone()).unwrap();
        let f = form.darboux().unwrap();
        let rebuilt = f.matrix() * standard_j(n) * f.matrix().transpose();
        prop_assert!(max_abs(&(rebuilt - &omega)) <= 1e-10 * max_abs(&omega));
        prop_assert!((f.det_abs() - form.det_abs().sqrt()).abs() <= 1e-10 * f.det_abs().max(1.0));
    }

    #[test]
    fn form_is_antisymmetric(
        seeds in prop::collection::vec(-1.0f64..1.0, 16),
        ds in prop::collection::vec(0.2f64..5.0, 2),
        z in prop::collection::vec(-3.0f64..3.0, 4),
        zp in prop::collection::vec(-3.0f64..3.0, 4),
    ) {
        let form = SymplecticForm::new(random_form(2, &seeds, &ds)).unwrap();
        let a = form.eval(&z, &zp).unwrap();
        let b = form.eval(&zp, &z).unwrap();
        prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(1.0));
        prop_assert!(form.eval(&z, &z).unwrap().abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn capacity_is_symplectically_invariant(
        theta in 0.0f64..6.3,
        squeeze in 0.3f64..3.0,
        shear in -2.0f64..2.0,
        a in 0.3f64..3.0,
        b in 0.3f64..3.0,
        c in -0.2f64..0.2,
    ) {
        let m = DMatrix::from_row_slice(2, 2, &[a, c, c, b]);
        let s = symplectic_2x2(theta, squeeze, shear);
        prop_assert!(symplectic_defect(&s).unwrap() < 1e-10);
        let before = WignerEllipsoid::new(m.clone()).unwrap().capacity();
        let after = WignerEllipsoid::new(s.transpose() * &m * &s).unwrap().capacity();
        prop_assert!((before - after).abs() <= 1e-9 * before);
    }
}
