//! Translations, reflections and metaplectic generators acting on sampled fields.

use crate::error::{Error, Result};
use crate::fft::{centered_dft_axis, for_each_line};
use crate::grid::{substitute, SampledField, DEFAULT_RESAMPLE_TOL};
use crate::symplectic::SymplecticForm;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

fn check_len(v: &[f64], expected: usize) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got: v.len() })
    }
}

/// Heisenberg-Weyl operator `T(z0) u(x) = e^{i(xi0.x - xi0.x0/2)} u(x - x0)`.
///
/// Off-lattice shifts use trigonometric interpolation with zero extension.
pub fn heisenberg_weyl(z0: &[f64], u: &SampledField) -> Result<SampledField> {
    let n = u.grid().dim();
    check_len(z0, 2 * n)?;
    let (x0, xi0) = z0.split_at(n);
    let neg: Vec<f64> = x0.iter().map(|x| -x).collect();
    let shifted = substitute(u, &DMatrix::identity(n, n), Some(&neg), f64::INFINITY)?;
    let half: f64 = xi0.iter().zip(x0).map(|(a, b)| a * b).sum::<f64>() / 2.0;
    let phase = SampledField::from_fn(*u.grid(), |x| {
        let t: f64 = xi0.iter().zip(x).map(|(a, b)| a * b).sum();
        Complex64::from_polar(1.0, t - half)
    });
    shifted.zip_with(&phase, |a, b| a * b)
}

/// Grossmann-Royer reflection `e^{2i xi0.(x - x0)} u(2 x0 - x)`, wrapped periodically.
///
/// `2 x0` must lie on the lattice, otherwise [`Error::OffLatticeReflection`].
pub fn grossmann_royer(z0: &[f64], u: &SampledField) -> Result<SampledField> {
    let grid = *u.grid();
    let n = grid.dim();
    check_len(z0, 2 * n)?;
    let (x0, xi0) = z0.split_at(n);
    let np = grid.points() as i64;
    let mut m = Vec::with_capacity(n);
    for &x in x0 {
        let t = 2.0 * x / grid.spacing();
        if (t - t.round()).abs() > 1e-9 {
            return Err(Error::OffLatticeReflection);
        }
        m.push(t.round() as i64);
    }
    let mut idx = vec![0usize; n];
    let mut src = vec![0usize; n];
    let values = (0..grid.len())
        .map(|flat| {
            grid.unflatten(flat, &mut idx);
            let mut t = 0.0;
            for a in 0..n {
                // index k <-> k - N/2; reflected index m - (k - N/2) + N/2
                src[a] = (m[a] - idx[a] as i64 + np).rem_euclid(np) as usize;
                t += xi0[a] * (grid.coord(idx[a]) - x0[a]);
            }
            Complex64::from_polar(1.0, 2.0 * t) * u.values()[grid.flatten(&src)]
        })
        .collect();
    SampledField::new(grid, values)
}

/// Phase-space translation `e^{-i omega(z, z0)} U(z - z0/2)`.
pub fn phase_translate_omega(z0: &[f64], big_u: &SampledField, form: &SymplecticForm) -> Result<SampledField> {
    let d = big_u.grid().dim();
    if d != form.dim() {
        return Err(Error::DimensionMismatch { expected: form.dim(), got: d });
    }
    check_len(z0, d)?;
    let neg: Vec<f64> = z0.iter().map(|x| -x / 2.0).collect();
    let shifted = substitute(big_u, &DMatrix::identity(d, d), Some(&neg), f64::INFINITY)?;
    let inv = form.inverse();
    let w: Vec<f64> = (0..d).map(|i| (0..d).map(|j| inv[(i, j)] * z0[j]).sum()).collect();
    let phase = SampledField::from_fn(*big_u.grid(), |z| {
        let t: f64 = z.iter().zip(&w).map(|(a, b)| a * b).sum();
        Complex64::from_polar(1.0, -t)
    });
    shifted.zip_with(&phase, |a, b| a * b)
}

/// `T~_sigma(z0)`, the standard-form case of [`phase_translate_omega`].
pub fn phase_translate_sigma(z0: &[f64], big_u: &SampledField) -> Result<SampledField> {
    let d = big_u.grid().dim();
    if d % 2 != 0 {
        return Err(Error::OddDimension(d));
    }
    phase_translate_omega(z0, big_u, &SymplecticForm::standard(d / 2))
}

/// Generators of the metaplectic representation used in covariance tests.
#[derive(Debug, Clone, PartialEq)]
pub enum MetaplecticGenerator {
    /// `e^{-i theta H}` with `H` the harmonic oscillator; `theta = pi/2` is the Fourier transform up to phase.
    FractionalFourier { angle: f64 },
    /// `u -> s^{-n/2} u(x / s)`.
    Dilation { scale: f64 },
    /// `u -> e^{i P x.x / 2} u`.
    Chirp { coeff: DMatrix<f64> },
}

impl MetaplecticGenerator {
    pub fn fractional_fourier(angle: f64) -> Self {
        Self::FractionalFourier { angle }
    }

    pub fn dilation(scale: f64) -> Result<Self> {
        if scale > 0.0 && scale.is_finite() {
            Ok(Self::Dilation { scale })
        } else {
            Err(Error::InvalidParameter(format!("dilation scale {scale} must be positive")))
        }
    }

    pub fn chirp(coeff: DMatrix<f64>) -> Result<Self> {
        if coeff.nrows() != coeff.ncols() {
            return Err(Error::DimensionMismatch { expected: coeff.nrows(), got: coeff.ncols() });
        }
        let defect = (&coeff - coeff.transpose()).abs().max();
        if defect > 1e-12 * coeff.abs().max().max(1.0) {
            return Err(Error::InvalidParameter("chirp matrix must be symmetric".into()));
        }
        Ok(Self::Chirp { coeff })
    }

    /// The symplectic matrix `S` with `S^-1 A S <-> a o S` for this generator.
    pub fn projection(&self, n: usize) -> Result<DMatrix<f64>> {
        let mut s = DMatrix::identity(2 * n, 2 * n);
        match self {
            Self::FractionalFourier { angle } => {
                let (sn, c) = angle.sin_cos();
                for i in 0..n {
                    s[(i, i)] = c;
                    s[(i, n + i)] = sn;
                    s[(n + i, i)] = -sn;
                    s[(n + i, n + i)] = c;
                }
            }
            Self::Dilation { scale } => {
                for i in 0..n {
                    s[(i, i)] = *scale;
                    s[(n + i, n + i)] = 1.0 / scale;
                }
            }
            Self::Chirp { coeff } => {
                if coeff.nrows() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: coeff.nrows() });
                }
                s.view_mut((n, 0), (n, n)).copy_from(coeff);
            }
        }
        Ok(s)
    }
}

/// Symplectic projection of `gens` applied in order, `S_k ... S_1`.
pub fn metaplectic_projection(gens: &[MetaplecticGenerator], n: usize) -> Result<DMatrix<f64>> {
    let mut s = DMatrix::identity(2 * n, 2 * n);
    for g in gens {
        s = g.projection(n)? * s;
    }
    Ok(s)
}

/// Applies the generators in order (the first acts first).
pub fn metaplectic_apply(gens: &[MetaplecticGenerator], u: &SampledField) -> Result<SampledField> {
    let mut cur = u.clone();
    for g in gens {
        cur = match g {
            MetaplecticGenerator::FractionalFourier { angle } => fractional_fourier(&cur, *angle)?,
            MetaplecticGenerator::Dilation { scale } => {
                let n = cur.grid().dim();
                let m = DMatrix::identity(n, n) / *scale;
                substitute(&cur, &m, None, DEFAULT_RESAMPLE_TOL)?.scale_real(scale.powf(-(n as f64) / 2.0))
            }
            MetaplecticGenerator::Chirp { coeff } => {
                let n = cur.grid().dim();
                if coeff.nrows() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: coeff.nrows() });
                }
                let grid = *cur.grid();
                let mut out = cur.clone();
                let mut idx = vec![0usize; n];
                for (flat, v) in out.values_mut().iter_mut().enumerate() {
                    grid.unflatten(flat, &mut idx);
                    let x: Vec<f64> = idx.iter().map(|&k| grid.coord(k)).collect();
                    let q: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| coeff[(i, j)] * x[i] * x[j]).sum();
                    *v *= Complex64::from_polar(1.0, q / 2.0);
                }
                out
            }
        };
    }
    Ok(cur)
}

/// Eigenvectors of `(X^2 + F^-1 X^2 F)/2` on one axis, sorted by eigenvalue.
/// The matrix commutes with the centered DFT.
fn oscillator_basis(points: usize, spacing: f64) -> DMatrix<f64> {
    let n = points;
    let mut f = vec![Complex64::new(0.0, 0.0); n * n];
    for k in 0..n {
        f[k * n + k] = Complex64::new(1.0, 0.0);
    }
    // columns of the DFT matrix: transform each unit vector (stored as rows)
    centered_dft_axis(&mut f, &[n, n], 1, false);
    let x: Vec<f64> = (0..n).map(|k| (k as f64 - n as f64 / 2.0) * spacing).collect();
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            // row j of `f` is F e_j, so F[m][j] = f[j * n + m]
            let s: Complex64 = (0..n).map(|m| f[j * n + m].conj() * x[m] * x[m] * f[k * n + m]).sum();
            h[(j, k)] = 0.5 * s.re;
        }
        h[(j, j)] += 0.5 * x[j] * x[j];
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])])
}

/// `e^{-i theta (H - 1/2)}` along every axis, via the discrete oscillator basis.
fn fractional_fourier(u: &SampledField, theta: f64) -> Result<SampledField> {
    let grid = *u.grid();
    if !grid.is_self_dual() {
        return Err(Error::InvalidGrid("fractional Fourier transform needs a self-dual grid".into()));
    }
    let n = grid.points();
    let basis = oscillator_basis(n, grid.spacing());
    let phases: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, -(k as f64) * theta)).collect();
    let mut values = u.values().to_vec();
    let shape = grid.shape();
    let mut coef = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..grid.dim() {
        for_each_line(&shape, axis, |idx| {
            for (k, c) in coef.iter_mut().enumerate() {
                let s: Complex64 = idx.iter().enumerate().map(|(j, &i)| values[i] * basis[(j, k)]).sum();
                *c = s * phases[k];
            }
            for (j, &i) in idx.iter().enumerate() {
                values[i] = (0..n).map(|k| coef[k] * basis[(j, k)]).sum();
            }
        });
    }
    SampledField::new(grid, values)
}

/// The unit phase `c` minimizing `|u - c v|`, and the residual `|u - c v| / |u|`.
pub fn fit_phase(u: &SampledField, v: &SampledField) -> Result<(Complex64, f64)> {
    let ip = u.inner(v)?;
    let c = if ip.norm() > 0.0 { ip / ip.norm() } else { Complex64::new(1.0, 0.0) };
    let r = u.sub(&v.scale(c))?.norm() / u.norm().max(f64::MIN_POSITIVE);
    Ok((c, r))
}
