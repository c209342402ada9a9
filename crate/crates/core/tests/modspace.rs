use nalgebra::DMatrix;
use num_complex::Complex64;
use phasespace::error::Error;
use phasespace::grid::{GridSpec, SampledField};
use phasespace::modspace::*;
use phasespace::ops::{heisenberg_weyl, metaplectic_apply, MetaplecticGenerator};
use phasespace::symplectic::{rotation, DarbouxFactor, SymplecticForm, WignerEllipsoid};
use phasespace::wavepacket::{hermite_field, wavepacket_f, Window};
use phasespace::weyl::{weyl_kernel, SymbolSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn line(n: usize) -> GridSpec {
    GridSpec::self_dual(1, n).unwrap()
}

fn params(g: GridSpec, s: f64, q: Exponent) -> ModNormParams {
    ModNormParams::new(s, q, Window::gaussian(g).unwrap()).unwrap()
}

/// Random combinations of Hermite functions of degree < 4, some translated.
fn testset(g: GridSpec, count: usize, seed: u64) -> Vec<SampledField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let mut u = SampledField::zeros(g);
            for k in 0..4 {
                let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                u = u.add(&hermite_field(g, &[k], 1.0).unwrap().scale(c)).unwrap();
            }
            if i % 2 == 1 {
                u = heisenberg_weyl(&[rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)], &u).unwrap();
            }
            u
        })
        .collect()
}

#[test]
fn unweighted_l2_norm_is_the_field_norm() {
    let g = line(64);
    let p = params(g, 0.0, Exponent::Finite(2.0));
    for u in testset(g, 6, 1) {
        assert!((mod_norm(&u, &p).unwrap() - u.norm()).abs() < 1e-6 * u.norm());
    }
}

#[test]
fn windows_of_different_width_give_equivalent_norms() {
    let g = line(64);
    let set = testset(g, 10, 2);
    for (s, q) in [(0.0, Exponent::Finite(2.0)), (1.0, Exponent::Finite(1.0)), (2.0, Exponent::Infinity)] {
        let p1 = params(g, s, q);
        let p2 = p1.with_window(Window::hermite_width(g, 0, 2.0).unwrap());
        let rep = window_equivalence(&set, &p1, &p2).unwrap();
        assert!(rep.constant() <= 10.0, "{s} {q:?}: {rep:?}");
    }
}

#[test]
fn norms_stay_finite_across_exponents() {
    let g = line(64);
    for u in testset(g, 4, 3) {
        for q in [Exponent::Finite(1.0), Exponent::Finite(2.0), Exponent::Finite(4.0), Exponent::Infinity] {
            let v = mod_norm(&u, &params(g, 1.0, q)).unwrap();
            assert!(v.is_finite() && v > 0.0);
        }
    }
}

#[test]
fn weight_inequality_holds_on_the_grid() {
    let g = GridSpec::self_dual(2, 32).unwrap();
    let shear = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.7, 1.0]);
    for f in [DMatrix::identity(2, 2) * 2.0, rotation(0.4), shear] {
        for s in [0.5, 1.0, 2.0] {
            let c = weight_constant(s, &f);
            for k in 0..g.len() {
                let z = g.point(k);
                let fz = &f * nalgebra::DVector::from_column_slice(&z);
                assert!(weight(s, fz.as_slice()) <= c * weight(s, &z) * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn metaplectic_images_keep_finite_norms() {
    let g = line(64);
    let p = params(g, 1.0, Exponent::Finite(2.0));
    let gens = [
        MetaplecticGenerator::fractional_fourier(0.6),
        MetaplecticGenerator::dilation(1.3).unwrap(),
        MetaplecticGenerator::chirp(DMatrix::from_element(1, 1, 0.5)).unwrap(),
    ];
    for gen in gens {
        let mut worst = 1.0f64;
        for u in testset(g, 6, 4) {
            let su = metaplectic_apply(std::slice::from_ref(&gen), &u).unwrap();
            let r = mod_norm(&su, &p).unwrap() / mod_norm(&u, &p).unwrap();
            assert!(r.is_finite());
            worst = worst.max(r).max(1.0 / r);
        }
        assert!(worst < 5.0, "{gen:?}: {worst}");
    }
}

#[test]
fn translations_are_bounded_by_the_weight() {
    let g = line(64);
    let set = testset(g, 4, 5);
    for s in [0.0, 1.0, 2.0] {
        let p = params(g, s, Exponent::Finite(2.0));
        let mut fitted = 0.0f64;
        for u in &set {
            let base = mod_norm(u, &p).unwrap();
            for z in [[0.5, 0.0], [0.0, -1.0], [1.5, 1.0], [-2.0, 2.0], [3.0, 0.5]] {
                let t = mod_norm(&heisenberg_weyl(&z, u).unwrap(), &p).unwrap();
                fitted = fitted.max(t / (weight(s, &z) * base));
            }
        }
        // Peetre's inequality gives C = 2^{s/2}
        assert!(fitted <= 2f64.powf(s / 2.0) * (1.0 + 1e-6), "{s}: {fitted}");
        if s == 0.0 {
            assert!((fitted - 1.0).abs() < 1e-6);
        }
    }
}

fn gaussian2(alpha: f64) -> SymbolSpec {
    SymbolSpec::closed_real(2, move |z| (-alpha * (z[0] * z[0] + z[1] * z[1])).exp())
}

#[test]
fn sjostrand_norm_of_gaussians_and_constants() {
    let a = gaussian2(0.5);
    let norms: Vec<f64> = [16, 24]
        .iter()
        .map(|&n| {
            let g = GridSpec::self_dual(2, n).unwrap();
            sjostrand_norm(&a, &Window::gaussian(g).unwrap(), 0.0).unwrap()
        })
        .collect();
    assert!((norms[0] / norms[1] - 1.0).abs() < 0.05, "{norms:?}");
    let g = GridSpec::self_dual(2, 16).unwrap();
    let phi = Window::gaussian(g).unwrap();
    let one = sjostrand_norm(&SymbolSpec::constant(2, Complex64::new(1.0, 0.0)), &phi, 0.0).unwrap();
    assert!(one.is_finite() && one > 0.0);
    // centered Gaussians peak at z = 0 where v_1 = v_0, so only an off-center
    // symbol separates the two weights
    assert!(sjostrand_norm(&a, &phi, 1.0).unwrap() >= sjostrand_norm(&a, &phi, 0.0).unwrap());
    let off = SymbolSpec::closed_real(2, |z| (-0.5 * ((z[0] - 1.5).powi(2) + z[1] * z[1])).exp());
    assert!(sjostrand_norm(&off, &phi, 1.0).unwrap() > 1.2 * sjostrand_norm(&off, &phi, 0.0).unwrap());
    let big = Window::gaussian(GridSpec::self_dual(2, 26).unwrap()).unwrap();
    assert!(matches!(sjostrand_norm(&a, &big, 0.0), Err(Error::GridCapExceeded { .. })));
}

#[test]
fn sjostrand_norm_under_linear_changes() {
    let g = GridSpec::self_dual(2, 24).unwrap();
    let a = gaussian2(0.5);
    let w = gaussian2(0.5);
    let id = sjostrand_invariance_check(&a, &DMatrix::identity(2, 2), &w, g, 0.0).unwrap();
    assert!((id.ratio() - 1.0).abs() < 1e-8);
    let two = sjostrand_invariance_check(&a, &(DMatrix::identity(2, 2) * 2.0), &w, g, 0.0).unwrap();
    assert!(two.finite_together() && two.ratio().is_finite() && two.ratio() > 0.0);
    let rot = sjostrand_invariance_check(&a, &rotation(0.5), &w, g, 0.0).unwrap();
    assert!((rot.ratio() - 1.0).abs() < 0.05, "{}", rot.ratio());
    assert!(matches!(sjostrand_invariance_check(&a, &DMatrix::zeros(2, 2), &w, g, 0.0), Err(Error::Singular)));
}

#[test]
fn range_membership_cases() {
    let g = line(64);
    let pg = g.with_dim(2).unwrap();
    let phi = Window::gaussian(g).unwrap();
    let p = params(g, 0.0, Exponent::Finite(2.0));
    let id = DarbouxFactor::identity(1);
    let u = hermite_field(g, &[0], 1.3).unwrap();
    let rep = range_membership(&wavepacket_f(&id, &phi, &u).unwrap(), &id, &phi, &p).unwrap();
    assert!(rep.member && rep.residual < 1e-6);

    let wig = SampledField::from_fn(pg, |z| Complex64::new((-(z[0] * z[0] + z[1] * z[1])).exp() / PI, 0.0));
    let rep = range_membership(&wig, &id, &phi, &p).unwrap();
    assert!(rep.member && rep.residual < 1e-6, "{}", rep.residual);

    let tight = SampledField::from_fn(pg, |z| Complex64::new((-2.0 * (z[0] * z[0] + z[1] * z[1])).exp(), 0.0));
    let rep = range_membership(&tight, &id, &phi, &p).unwrap();
    assert!(!rep.member);
    let cert = concentration_certificate(&tight, &WignerEllipsoid::new(DMatrix::identity(2, 2) * 2.0).unwrap()).unwrap();
    assert_eq!(cert.verdict, Verdict::Violates);

    // a scaled form: f = 2I
    let form = SymplecticForm::scaled_standard(1, 4.0).unwrap();
    let f = form.darboux().unwrap();
    let rep = range_membership(&wavepacket_f(&f, &phi, &u).unwrap(), &f, &phi, &p).unwrap();
    assert!(rep.member && rep.residual < 1e-6, "{}", rep.residual);
}

#[test]
fn phase_operators_preserve_the_range() {
    let g = line(32);
    let form = SymplecticForm::standard(1);
    let id = DarbouxFactor::identity(1);
    let phi = Window::gaussian(g).unwrap();
    let p = params(g, 0.0, Exponent::Finite(2.0));
    let set: Vec<SampledField> = (0..3).map(|k| wavepacket_f(&id, &phi, &hermite_field(g, &[k], 1.0).unwrap()).unwrap()).collect();

    let rep = propreg_check(&SymbolSpec::constant(2, Complex64::new(1.0, 0.0)), &form, &id, &phi, &p, &set).unwrap();
    assert!(rep.membership_preserved);
    assert!(rep.ratios.iter().all(|r| (r - 1.0).abs() < 1e-8));

    let a = gaussian2(0.3);
    let rep = propreg_check(&a, &form, &id, &phi, &p, &set).unwrap();
    assert!(rep.membership_preserved, "{:?}", rep.output_residuals);
    let bound = weyl_kernel(&a, &g).unwrap().spectral_norm();
    assert!(rep.max_ratio() <= 1.1 * bound, "{} vs {bound}", rep.max_ratio());

    let outside = SampledField::from_fn(g.with_dim(2).unwrap(), |z| Complex64::new((-2.0 * (z[0] * z[0] + z[1] * z[1])).exp(), 0.0));
    assert!(matches!(propreg_check(&a, &form, &id, &phi, &p, &[outside]), Err(Error::NotInRange { .. })));
}

#[test]
fn capacity_certificate() {
    let g = line(64).with_dim(2).unwrap();
    let gauss = |c: f64| SampledField::from_fn(g, move |z| Complex64::new((-c * (z[0] * z[0] + z[1] * z[1])).exp() / PI, 0.0));
    let ident = WignerEllipsoid::new(DMatrix::identity(2, 2)).unwrap();
    let rep = concentration_certificate(&gauss(1.0), &ident).unwrap();
    assert!((rep.capacity - PI).abs() < 1e-12);
    assert_eq!(rep.verdict, Verdict::Consistent);
    assert!((rep.envelope - 1.0 / PI).abs() < 1e-12);

    let two = WignerEllipsoid::new(DMatrix::identity(2, 2) * 2.0).unwrap();
    let rep = concentration_certificate(&gauss(2.0), &two).unwrap();
    assert!((rep.capacity - PI / 2.0).abs() < 1e-12);
    assert_eq!(rep.verdict, Verdict::Violates);

    let half = WignerEllipsoid::new(DMatrix::identity(2, 2) * 0.5).unwrap();
    let rep = concentration_certificate(&gauss(1.0), &half).unwrap();
    assert!((rep.capacity - 2.0 * PI).abs() < 1e-12);
    assert_eq!(rep.verdict, Verdict::Consistent);

    assert!(matches!(concentration_certificate(&gauss(0.25), &ident), Err(Error::BoundNotSatisfied { .. })));
}
