use nalgebra::DMatrix;
use num_complex::Complex64;
use phasespace::grid::{substitute, GridSpec, SampledField};
use phasespace::ops::{fit_phase, grossmann_royer, heisenberg_weyl, metaplectic_apply, metaplectic_projection, MetaplecticGenerator};
use phasespace::symplectic::{rotation, sigma, DarbouxFactor, SymplecticForm};
use phasespace::wavepacket::*;
use phasespace::weyl::{phase_weyl_apply_quadrature, weyl_kernel, SymbolSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn line(n: usize) -> GridSpec {
    GridSpec::self_dual(1, n).unwrap()
}

fn hermite(g: GridSpec, k: usize) -> SampledField {
    hermite_field(g, &[k], 1.0).unwrap()
}

fn smooth_random(g: GridSpec, rng: &mut ChaCha8Rng) -> SampledField {
    let coef: Vec<Complex64> = (0..4).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let mut out = SampledField::zeros(g);
    for (k, c) in coef.iter().enumerate() {
        out = out.add(&hermite(g, k).scale(*c)).unwrap();
    }
    out
}

/// Largest deviation over points with every coordinate inside `radius`.
fn central_max(a: &SampledField, b: &SampledField, radius: f64) -> f64 {
    let mut err = 0.0f64;
    for k in 0..a.values().len() {
        if a.grid().point(k).iter().all(|x| x.abs() <= radius) {
            err = err.max((a.values()[k] - b.values()[k]).norm());
        }
    }
    err
}

#[test]
fn gaussian_wigner_function() {
    let g = line(64);
    let phi0 = hermite(g, 0);
    let w = cross_wigner(&phi0, &phi0).unwrap();
    let expect = SampledField::from_fn(*w.grid(), |z| Complex64::new((-(z[0] * z[0] + z[1] * z[1])).exp() / PI, 0.0));
    assert!(w.sub(&expect).unwrap().max_abs() < 1e-6);
    let wp = wavepacket(&Window::gaussian(g).unwrap(), &phi0).unwrap();
    assert!(wp.rel_distance(&expect.scale_real((2.0 * PI).sqrt())).unwrap() < 1e-6);
}

#[test]
fn marginal_recovers_density() {
    let g = line(64);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = smooth_random(g, &mut rng);
    let w = cross_wigner(&u, &u).unwrap();
    let n = g.points();
    for j in 0..n {
        let m: Complex64 = (0..n).map(|k| w.values()[j * n + k]).sum::<Complex64>() * g.spacing();
        assert!((m - u.values()[j].norm_sqr()).norm() < 1e-6);
    }
}

#[test]
fn moyal_identity_for_hermite_pairs() {
    let g = line(64);
    let h: Vec<SampledField> = (0..4).map(|k| hermite(g, k)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let r = smooth_random(g, &mut rng);
    let pairs = [(0, 1, 0, 1), (2, 3, 2, 3), (1, 1, 3, 3), (0, 2, 0, 2)];
    for (i, j, k, l) in pairs {
        let lhs = cross_wigner(&h[i], &h[j]).unwrap().inner(&cross_wigner(&h[k], &h[l]).unwrap()).unwrap();
        let rhs = h[i].inner(&h[k]).unwrap() * h[j].inner(&h[l]).unwrap().conj() / (2.0 * PI);
        assert!((lhs - rhs).norm() < 1e-6);
    }
    let lhs = cross_wigner(&r, &h[1]).unwrap().inner(&cross_wigner(&h[2], &r).unwrap()).unwrap();
    let rhs = r.inner(&h[2]).unwrap() * h[1].inner(&r).unwrap().conj() / (2.0 * PI);
    assert!((lhs - rhs).norm() < 1e-6 * r.norm() * r.norm());
}

#[test]
fn wavepacket_is_an_isometry_and_matches_reflection_form() {
    let g = line(64);
    let phi = Window::hermite(g, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = smooth_random(g, &mut rng);
    let big = wavepacket(&phi, &u).unwrap();
    assert!((big.norm() - u.norm()).abs() < 1e-6 * u.norm());
    // (2/pi)^{1/2} (T_GR(z) u | phi) at lattice points
    let pg = *big.grid();
    let mut err = 0.0f64;
    for k in 0..pg.len() {
        let z = pg.point(k);
        if z[0].abs() > 3.0 || z[1].abs() > 3.0 {
            continue;
        }
        let gr = grossmann_royer(&z, &u).unwrap();
        let v = gr.inner(phi.field()).unwrap() * (2.0 / PI).sqrt();
        err = err.max((v - big.values()[k]).norm());
    }
    assert!(err < 1e-8, "{err}");
}

#[test]
fn adjoint_inverse_and_projector() {
    let g = line(64);
    let phi = Window::gaussian(g).unwrap();
    let pg = g.with_dim(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u = smooth_random(g, &mut rng);
    let big_v = SampledField::from_fn(pg, |z| Complex64::new((-(z[0] - 1.0).powi(2) - z[1] * z[1] / 2.0).exp(), 0.3 * z[1] * (-z[0] * z[0] - z[1] * z[1]).exp()));

    let lhs = wavepacket(&phi, &u).unwrap().inner(&big_v).unwrap();
    let rhs = u.inner(&wavepacket_adjoint(&phi, &big_v).unwrap()).unwrap();
    assert!((lhs - rhs).norm() < 1e-6);

    for k in 0..3 {
        let hk = hermite(g, k);
        let back = wavepacket_inverse(&phi, &wavepacket(&phi, &hk).unwrap()).unwrap();
        assert!(back.rel_distance(&hk).unwrap() < 1e-6);
    }
    let star = wavepacket_adjoint(&phi, &wavepacket(&phi, &u).unwrap()).unwrap();
    assert!(star.rel_distance(&u).unwrap() < 1e-6);

    // complement of the range
    let perp = big_v.sub(&projector(&phi, &big_v).unwrap()).unwrap();
    assert!(wavepacket_adjoint(&phi, &perp).unwrap().norm() < 1e-6 * big_v.norm());

    let gauss = SampledField::from_fn(pg, |z| Complex64::new((-(z[0] * z[0] + z[1] * z[1]) / 8.0).exp(), 0.0));
    assert!(matches!(wavepacket_inverse(&phi, &gauss), Err(phasespace::Error::NotInRange { .. })));

    let wu = wavepacket(&phi, &u).unwrap();
    assert!(projector(&phi, &wu).unwrap().rel_distance(&wu).unwrap() < 1e-6);
    let p1 = projector(&phi, &big_v).unwrap();
    assert!(projector(&phi, &p1).unwrap().rel_distance(&p1).unwrap() < 1e-6);
    let big_w = SampledField::from_fn(pg, |z| Complex64::new(z[0] * (-(z[0] * z[0] + (z[1] + 0.5).powi(2)) / 2.0).exp(), 0.0));
    let a = p1.inner(&big_w).unwrap();
    let b = big_v.inner(&projector(&phi, &big_w).unwrap()).unwrap();
    assert!((a - b).norm() < 1e-6);
}

#[test]
fn twisted_wavepacket_is_isometric() {
    let g = line(64);
    let phi = Window::gaussian(g).unwrap();
    let u = hermite(g, 2);
    let id = DarbouxFactor::identity(1);
    assert_eq!(wavepacket_f(&id, &phi, &u).unwrap(), wavepacket(&phi, &u).unwrap());
    for form in [SymplecticForm::scaled_standard(1, 4.0).unwrap(), SymplecticForm::scaled_standard(1, 2.0).unwrap()] {
        let f = form.darboux().unwrap();
        let big = wavepacket_f(&f, &phi, &u).unwrap();
        assert!((big.norm() - u.norm()).abs() < 1e-6, "{}", big.norm());
    }
}

#[test]
fn hermite_basis_is_orthonormal() {
    let g = line(64);
    for form in [SymplecticForm::standard(1), SymplecticForm::scaled_standard(1, 4.0).unwrap()] {
        let f = form.darboux().unwrap();
        let basis = basis_generate(&f, g, &[0, 1, 2], &[0, 1, 2]).unwrap();
        assert_eq!(basis.len(), 9);
        for (a, ea) in basis.iter().enumerate() {
            for (b, eb) in basis.iter().enumerate() {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ea.field.inner(&eb.field).unwrap() - expect).norm() < 1e-6);
            }
        }
    }
    for form in [SymplecticForm::standard(1), SymplecticForm::scaled_standard(1, 2.0).unwrap()] {
        let f = form.darboux().unwrap();
        let mixed = basis_generate_mixed(&f, g, &[0, 1, 2], &[0, 1, 2], 0.8).unwrap();
        for (a, ea) in mixed.iter().enumerate() {
            for (b, eb) in mixed.iter().enumerate() {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ea.field.inner(&eb.field).unwrap() - expect).norm() < 1e-6);
            }
        }
    }
    let basis = basis_generate(&DarbouxFactor::identity(1), g, &[0], &[0]).unwrap();
    let phi0 = hermite(g, 0);
    let w = cross_wigner(&phi0, &phi0).unwrap().scale_real((2.0 * PI).sqrt());
    assert!(basis[0].field.rel_distance(&w).unwrap() < 1e-10);
    assert_eq!((basis[0].window_index, basis[0].eigen_index), (0, 0));
    assert!(matches!(basis_generate(&DarbouxFactor::identity(1), g, &[6], &[0]), Err(phasespace::Error::IndexCap { .. })));
}

/// `W(u, v)` shifted by an even number of cells per phase-space axis.
fn shifted(w: &SampledField, cells: [i64; 2]) -> SampledField {
    let g = *w.grid();
    let n = g.points() as i64;
    let mut idx = vec![0usize; 2];
    let values = (0..g.len())
        .map(|k| {
            g.unflatten(k, &mut idx);
            let s = [idx[0] as i64 - cells[0], idx[1] as i64 - cells[1]];
            if s.iter().all(|&v| (0..n).contains(&v)) {
                w.values()[g.flatten(&[s[0] as usize, s[1] as usize])]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    SampledField::new(g, values).unwrap()
}

#[test]
fn translation_covariance() {
    let g = line(64);
    let h = g.spacing();
    let u = hermite(g, 1);
    let v = SampledField::from_fn(g, |x| Complex64::from_polar((-(x[0] - 0.3).powi(2) / 2.0).exp(), 0.1 * x[0]));
    let base = cross_wigner(&u, &v).unwrap();
    let pg = *base.grid();
    // one-sided
    let z0 = [4.0 * h, -2.0 * h];
    let lhs = cross_wigner(&heisenberg_weyl(&z0, &u).unwrap(), &v).unwrap();
    let moved = shifted(&base, [2, -1]);
    let rhs = SampledField::from_fn(pg, |z| Complex64::from_polar(1.0, -sigma(z, &z0))).zip_with(&moved, |a, b| a * b).unwrap();
    assert!(central_max(&lhs, &rhs, 6.0) < 1e-6);
    // two-sided
    let z1 = [-2.0 * h, 6.0 * h];
    let lhs = cross_wigner(&heisenberg_weyl(&z0, &u).unwrap(), &heisenberg_weyl(&z1, &v).unwrap()).unwrap();
    let moved = shifted(&base, [1, 2]);
    let d = [z0[0] - z1[0], z0[1] - z1[1]];
    let c = sigma(&z0, &z1) / 2.0;
    let rhs = SampledField::from_fn(pg, |z| Complex64::from_polar(1.0, -(sigma(z, &d) + c))).zip_with(&moved, |a, b| a * b).unwrap();
    assert!(central_max(&lhs, &rhs, 6.0) < 1e-6);
}

#[test]
fn rotation_covariance_and_change_of_factor() {
    let g = line(64);
    let theta = 0.35;
    let gens = [MetaplecticGenerator::fractional_fourier(theta)];
    let s = metaplectic_projection(&gens, 1).unwrap();
    let u = hermite(g, 1).add(&hermite(g, 0).scale_real(0.5)).unwrap();
    let v = SampledField::from_fn(g, |x| Complex64::new((-(x[0] + 0.4).powi(2) / 2.0).exp(), 0.0));
    let su = metaplectic_apply(&gens, &u).unwrap();
    let sv = metaplectic_apply(&gens, &v).unwrap();
    let lhs = cross_wigner(&su, &sv).unwrap();
    let s_inv = s.clone().try_inverse().unwrap();
    let rhs = substitute(&cross_wigner(&u, &v).unwrap(), &s_inv, None, 1e-6).unwrap();
    assert!(central_max(&lhs, &rhs, 6.0) < 1e-6);

    // W_{f', phi} u = W_{f, S phi}(S u) up to phase, f = I, f' = S
    let phi = Window::gaussian(g).unwrap();
    let f_prime = DarbouxFactor::from_matrix(&SymplecticForm::standard(1), s.clone()).unwrap();
    let left = wavepacket_f(&f_prime, &phi, &u).unwrap();
    let sphi = Window::new(metaplectic_apply(&gens, phi.field()).unwrap(), false).unwrap();
    let right = wavepacket_f(&DarbouxFactor::identity(1), &sphi, &su).unwrap();
    let (_, resid) = fit_phase(&left, &right).unwrap();
    assert!(resid < 1e-5, "{resid}");
    let _ = rotation(theta);
}

#[test]
fn wavepacket_intertwines_weyl_operators() {
    let g = line(64);
    let phi = Window::gaussian(g).unwrap();
    let a = SymbolSpec::closed_real(2, |z| (z[0] * z[0] + z[1] * z[1]) / 2.0 * (-(z[0] * z[0] + z[1] * z[1]) / 8.0).exp());
    let op = weyl_kernel(&a, &g).unwrap();
    let form = SymplecticForm::standard(1);
    for k in 0..3 {
        let u = hermite(g, k);
        let lhs = wavepacket(&phi, &op.apply(&u).unwrap()).unwrap();
        let rhs = phase_weyl_apply_quadrature(&a, &form, &wavepacket(&phi, &u).unwrap()).unwrap();
        let err = lhs.sub(&rhs).unwrap().norm() / u.norm();
        assert!(err < 1e-5, "k = {k}: {err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn wigner_is_hermitian_symmetric(seed in 0u64..1000) {
        let g = line(64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = smooth_random(g, &mut rng);
        let v = smooth_random(g, &mut rng);
        let a = cross_wigner(&u, &v).unwrap();
        let b = cross_wigner(&v, &u).unwrap();
        let err = a.values().iter().zip(b.values()).fold(0.0f64, |m, (x, y)| m.max((x - y.conj()).norm()));
        prop_assert!(err < 1e-7, "{err}");
        let w = cross_wigner(&u, &u).unwrap();
        prop_assert!(w.values().iter().all(|x| x.im.abs() < 1e-7));
    }

    #[test]
    fn wavepacket_round_trip(seed in 0u64..1000, k in 0usize..4) {
        let g = line(64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = smooth_random(g, &mut rng);
        let phi = Window::hermite(g, k).unwrap();
        let big = wavepacket(&phi, &u).unwrap();
        prop_assert!((big.norm() - u.norm()).abs() < 1e-6 * u.norm());
        prop_assert!(wavepacket_inverse(&phi, &big).unwrap().rel_distance(&u).unwrap() < 1e-6);
    }
}

#[test]
fn windows_are_normalized() {
    let g = line(64);
    for k in 0..=MAX_HERMITE_INDEX {
        let w = Window::hermite(g, k).unwrap();
        assert!(w.is_normalized());
        assert!((w.field().norm() - 1.0).abs() < 1e-10);
    }
    let raw = SampledField::from_fn(g, |x| Complex64::new(3.0 * (-x[0] * x[0]).exp(), 0.0));
    assert!((Window::new(raw, true).unwrap().field().norm() - 1.0).abs() < 1e-12);
    let _ = DMatrix::<f64>::identity(1, 1);
}
