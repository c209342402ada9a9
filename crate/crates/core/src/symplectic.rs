//! Linear symplectic geometry.
//!
//! A [`SymplecticForm`] stores an invertible antisymmetric `Omega` and evaluates
//! `omega(z, z') = z^T Omega^{-1} z'`. For `Omega = J = [[0, I], [-I, 0]]` this is
//! the standard form `sigma(z, z') = xi.x' - xi'.x`.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use std::f64::consts::PI;

const ANTISYMMETRY_TOL: f64 = 1e-12;
const INVERSE_TOL: f64 = 1e-10;
const FACTOR_TOL: f64 = 1e-10;

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// The standard symplectic matrix `J = [[0, I], [-I, 0]]` of size `2n`.
pub fn standard_j(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// `sigma(z, z') = z^T J^{-1} z'`, equal to `xi.x' - xi'.x` for `z = (x, xi)`.
pub fn sigma(z: &[f64], zp: &[f64]) -> f64 {
    let n = z.len() / 2;
    (0..n).map(|i| z[n + i] * zp[i] - zp[n + i] * z[i]).sum()
}

/// `max |S^T J S - J|`.
pub fn symplectic_defect(s: &DMatrix<f64>) -> Result<f64> {
    if s.nrows() != s.ncols() {
        return Err(Error::DimensionMismatch { expected: s.nrows(), got: s.ncols() });
    }
    if s.nrows() % 2 != 0 {
        return Err(Error::OddDimension(s.nrows()));
    }
    let j = standard_j(s.nrows() / 2);
    Ok(max_abs(&(s.transpose() * &j * s - j)))
}

/// Rotation by `theta` in the `(x, xi)` plane (`n = 1`), a symplectic matrix.
pub fn rotation(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Validated symplectic form.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm {
    n: usize,
    omega: DMatrix<f64>,
    omega_inv: DMatrix<f64>,
    det_abs: f64,
}

impl SymplecticForm {
    /// Validates `Omega`: square, even-sized, antisymmetric and invertible.
    pub fn new(omega: DMatrix<f64>) -> Result<Self> {
        if omega.nrows() != omega.ncols() {
            return Err(Error::DimensionMismatch { expected: omega.nrows(), got: omega.ncols() });
        }
        let dim = omega.nrows();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::OddDimension(dim));
        }
        let scale = max_abs(&omega);
        if scale == 0.0 {
            return Err(Error::Singular);
        }
        let defect = max_abs(&(&omega + omega.transpose()));
        if defect > ANTISYMMETRY_TOL * scale {
            return Err(Error::NotAntisymmetric { defect });
        }
        let omega_inv = omega.clone().try_inverse().ok_or(Error::Singular)?;
        let check = max_abs(&(&omega * &omega_inv - DMatrix::identity(dim, dim)));
        if !check.is_finite() || check > INVERSE_TOL {
            return Err(Error::Singular);
        }
        let det_abs = omega.determinant().abs();
        Ok(Self { n: dim / 2, omega, omega_inv, det_abs })
    }

    /// The standard form `J` in dimension `2n`.
    pub fn standard(n: usize) -> Self {
        Self::new(standard_j(n)).expect("J is a valid symplectic form")
    }

    /// `Omega = c J`.
    pub fn scaled_standard(n: usize, c: f64) -> Result<Self> {
        Self::new(standard_j(n) * c)
    }

    /// `Omega = [[Theta, I], [-I, N]]` for antisymmetric `n x n` blocks.
    pub fn from_blocks(theta: &DMatrix<f64>, nmat: &DMatrix<f64>) -> Result<Self> {
        let n = theta.nrows();
        for m in [theta, nmat] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: m.ncols().max(m.nrows()) });
            }
            let defect = max_abs(&(m + m.transpose()));
            if defect > ANTISYMMETRY_TOL * max_abs(m).max(1.0) {
                return Err(Error::NotAntisymmetric { defect });
            }
        }
        let mut omega = DMatrix::zeros(2 * n, 2 * n);
        omega.view_mut((0, 0), (n, n)).copy_from(theta);
        omega.view_mut((n, n), (n, n)).copy_from(nmat);
        for i in 0..n {
            omega[(i, n + i)] = 1.0;
            omega[(n + i, i)] = -1.0;
        }
        Self::new(omega)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Phase-space dimension `2n`.
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.omega_inv
    }

    pub fn det_abs(&self) -> f64 {
        self.det_abs
    }

    /// True when `Omega = c J` for some scalar `c`; returns `c`.
    pub fn standard_multiple(&self) -> Option<f64> {
        let c = self.omega[(0, self.n)];
        let diff = max_abs(&(&self.omega - standard_j(self.n) * c));
        (diff <= 1e-14 * c.abs().max(1.0)).then_some(c)
    }

    /// `omega(z, z') = z^T Omega^{-1} z'`.
    pub fn eval(&self, z: &[f64], zp: &[f64]) -> Result<f64> {
        let d = self.dim();
        for v in [z, zp] {
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.len() });
            }
        }
        let mut acc = 0.0;
        for i in 0..d {
            let row: f64 = (0..d).map(|j| self.omega_inv[(i, j)] * zp[j]).sum();
            acc += z[i] * row;
        }
        Ok(acc)
    }

    /// Canonical Darboux factor, see [`darboux_factor`].
    pub fn darboux(&self) -> Result<DarbouxFactor> {
        darboux_factor(self)
    }
}

/// Linear automorphism `f` with `Omega = f J f^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DarbouxFactor {
    f: DMatrix<f64>,
    f_inv: DMatrix<f64>,
    residual: f64,
}

impl DarbouxFactor {
    /// Wraps a user supplied factor after checking `f J f^T = Omega`.
    pub fn from_matrix(form: &SymplecticForm, f: DMatrix<f64>) -> Result<Self> {
        if f.nrows() != form.dim() || f.ncols() != form.dim() {
            return Err(Error::DimensionMismatch { expected: form.dim(), got: f.nrows() });
        }
        let j = standard_j(form.n());
        let residual = max_abs(&(&f * j * f.transpose() - form.matrix()));
        if residual > FACTOR_TOL * max_abs(form.matrix()) {
            return Err(Error::FactorizationFailed { residual });
        }
        let f_inv = f.clone().try_inverse().ok_or(Error::Singular)?;
        Ok(Self { f, f_inv, residual })
    }

    /// The identity factor for `Omega = J`.
    pub fn identity(n: usize) -> Self {
        Self { f: DMatrix::identity(2 * n, 2 * n), f_inv: DMatrix::identity(2 * n, 2 * n), residual: 0.0 }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.f_inv
    }

    /// `max |f J f^T - Omega|` at construction.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn det_abs(&self) -> f64 {
        self.f.determinant().abs()
    }

    /// The factor `f S` for `S` in `Sp(2n, sigma)`.
    pub fn compose_symplectic(&self, s: &DMatrix<f64>) -> Result<Self> {
        let defect = symplectic_defect(s)?;
        if defect > 1e-10 {
            return Err(Error::NotSymplectic { defect });
        }
        let f = &self.f * s;
        let f_inv = f.clone().try_inverse().ok_or(Error::Singular)?;
        Ok(Self { f, f_inv, residual: self.residual })
    }
}

/// Computes the canonical factor `f` with `f J f^T = Omega`.
///
/// `Omega^T Omega` is diagonalized; inside each eigenspace (eigenvalue `d^2`)
/// unit vectors `u` are picked greedily from the projected standard basis and
/// paired with `v = -Omega u / d`, so `Omega = sum_i d_i (u_i v_i^T - v_i u_i^T)`.
/// The columns of `f` are `sqrt(d_i) u_i` followed by `sqrt(d_i) v_i`, with the
/// `d_i` in descending order and the first significant entry of each `u_i`
/// positive.
pub fn darboux_factor(form: &SymplecticForm) -> Result<DarbouxFactor> {
    let omega = form.matrix();
    let dim = form.dim();
    let n = form.n();
    let gram = omega.transpose() * omega;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        let lam = eig.eigenvalues[i];
        match clusters.last_mut() {
            Some(c) if (eig.eigenvalues[c[0]] - lam).abs() <= 1e-8 * eig.eigenvalues[c[0]].abs() => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }

    let mut us: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut vs: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut ds: Vec<f64> = Vec::with_capacity(n);
    for cluster in &clusters {
        if cluster.len() % 2 != 0 {
            return Err(Error::FactorizationFailed { residual: f64::NAN });
        }
        let basis: Vec<DVector<f64>> = cluster.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
        let project = |w: &DVector<f64>| -> DVector<f64> {
            basis.iter().fold(DVector::zeros(dim), |acc, b| acc + b * b.dot(w))
        };
        let mut chosen: Vec<DVector<f64>> = Vec::new();
        for _ in 0..cluster.len() / 2 {
            let mut best: Option<(f64, DVector<f64>)> = None;
            for k in 0..dim {
                let mut w = project(&DVector::from_fn(dim, |i, _| if i == k { 1.0 } else { 0.0 }));
                for c in &chosen {
                    let p = c.dot(&w);
                    w -= c * p;
                }
                let nw = w.norm();
                if best.as_ref().is_none_or(|(bn, _)| nw > *bn + 1e-12) {
                    best = Some((nw, w));
                }
            }
            let (nw, w) = best.expect("non-empty basis");
            if nw < 1e-8 {
                return Err(Error::FactorizationFailed { residual: f64::NAN });
            }
            let mut u = w / nw;
            if let Some(first) = u.iter().find(|x| x.abs() > 1e-12) {
                if *first < 0.0 {
                    u = -u;
                }
            }
            let ou = omega * &u;
            let d = ou.norm();
            let v = -ou / d;
            chosen.push(u.clone());
            chosen.push(v.clone());
            us.push(u);
            vs.push(v);
            ds.push(d);
        }
    }

    let mut f = DMatrix::zeros(dim, dim);
    for i in 0..n {
        let s = ds[i].sqrt();
        f.set_column(i, &(&us[i] * s));
        f.set_column(n + i, &(&vs[i] * s));
    }
    DarbouxFactor::from_matrix(form, f)
}

/// Ellipsoid `{z : M z . z <= 1}` with `M` symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerEllipsoid {
    m: DMatrix<f64>,
}

impl WignerEllipsoid {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        if m.nrows() % 2 != 0 {
            return Err(Error::OddDimension(m.nrows()));
        }
        if max_abs(&(&m - m.transpose())) > 1e-12 * max_abs(&m).max(1.0) {
            return Err(Error::NotPositiveDefinite);
        }
        if m.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Moduli `lambda_j > 0` of the eigenvalues `+-i lambda_j` of `J M`, ascending.
    pub fn symplectic_spectrum(&self) -> Vec<f64> {
        let n = self.m.nrows() / 2;
        let eig = SymmetricEigen::new(self.m.clone());
        let root = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
            * eig.eigenvectors.transpose();
        let k = &root * standard_j(n) * &root;
        let kk = SymmetricEigen::new(k.transpose() * &k);
        let mut lams: Vec<f64> = kk.eigenvalues.iter().map(|x| x.max(0.0).sqrt()).collect();
        lams.sort_by(f64::total_cmp);
        lams.into_iter().step_by(2).collect()
    }

    /// Symplectic capacity `pi / lambda_max`.
    pub fn capacity(&self) -> f64 {
        let lmax = self.symplectic_spectrum().into_iter().fold(0.0, f64::max);
        PI / lmax
    }
}

/// Capacity of the ellipsoid `M z . z <= 1`.
pub fn symplectic_capacity(ell: &WignerEllipsoid) -> f64 {
    ell.capacity()
}
