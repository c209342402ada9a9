//! Hermitian eigensolves, transfer of spectra from `R^n` to phase space, and
//! empirical checks of the Shubin growth estimates.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SampledField};
use crate::symplectic::SymplecticForm;
use crate::wavepacket::{wavepacket_adjoint, wavepacket_f, Window};
use crate::weyl::{phase_weyl_matrix, weyl_kernel, OperatorMatrix, SymbolSpec};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// Eigenvalues closer than this form one cluster.
pub const CLUSTER_GAP: f64 = 1e-8;

/// Projections smaller than this fraction of `|U|` count as zero.
pub const DEGENERATE_TOL: f64 = 1e-8;

/// Ascending eigenvalues with unit-norm eigenfields and their residuals.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    pub eigenfields: Vec<SampledField>,
    pub residuals: Vec<f64>,
}

impl SpectralResult {
    /// Index ranges of eigenvalue clusters with gaps below [`CLUSTER_GAP`].
    pub fn clusters(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.eigenvalues.len() {
            if i == self.eigenvalues.len() || self.eigenvalues[i] - self.eigenvalues[i - 1] >= CLUSTER_GAP {
                out.push(start..i);
                start = i;
            }
        }
        out
    }

    /// Largest distance of a unit `reference` field from the span of the
    /// eigenfields in `range`. Compares degenerate eigenspaces by angle.
    pub fn subspace_distance(&self, range: std::ops::Range<usize>, reference: &SampledField) -> Result<f64> {
        let mut rest = reference.clone();
        for e in &self.eigenfields[range] {
            let c = rest.inner(e)?;
            rest = rest.sub(&e.scale(c))?;
        }
        Ok(rest.norm() / reference.norm())
    }
}

/// Full dense eigendecomposition of a Hermitian operator matrix.
pub fn eigensolve(a: &OperatorMatrix) -> Result<SpectralResult> {
    if !a.is_hermitian() {
        return Err(Error::NotHermitian { defect: a.hermitian_defect() });
    }
    let m = a.entries();
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let grid = *a.grid();
    let weight = grid.cell_volume().sqrt();
    let mut eigenvalues = Vec::with_capacity(order.len());
    let mut eigenfields = Vec::with_capacity(order.len());
    let mut residuals = Vec::with_capacity(order.len());
    for i in order {
        let lambda = eig.eigenvalues[i];
        let col = eig.eigenvectors.column(i);
        let field = SampledField::new(grid, col.iter().map(|v| v / weight).collect())?;
        let r = a.apply(&field)?.sub(&field.scale_real(lambda))?.norm() / field.norm();
        eigenvalues.push(lambda);
        eigenfields.push(field);
        residuals.push(r);
    }
    Ok(SpectralResult { eigenvalues, eigenfields, residuals })
}

/// Residual of one transferred eigenpair on phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferEntry {
    /// Index of the eigenfunction of `A'` being transported; its eigenvalue is carried.
    pub eigen_index: usize,
    /// Index of the eigenfunction of `A'` used as window.
    pub window_index: usize,
    pub eigenvalue: f64,
    /// `|A~ Phi - lambda Phi| / |Phi|`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct TransferReport {
    /// Leading eigenvalues of `A'` on `R^n`.
    pub eigenvalues: Vec<f64>,
    pub entries: Vec<TransferEntry>,
}

impl TransferReport {
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.residual).fold(0.0, f64::max)
    }

    /// Worst ratio of residuals across window indices for one eigen index.
    pub fn window_spread(&self, eigen_index: usize) -> f64 {
        let rs: Vec<f64> = self.entries.iter().filter(|e| e.eigen_index == eigen_index).map(|e| e.residual).collect();
        let hi = rs.iter().cloned().fold(0.0, f64::max);
        let lo = rs.iter().cloned().fold(f64::INFINITY, f64::min);
        if hi == 0.0 {
            1.0
        } else {
            hi / lo.max(f64::MIN_POSITIVE)
        }
    }
}

/// Transports the first `count` eigenpairs of `A'` (symbol `a o f`) on `grid`
/// to `A~_omega` on the phase-space grid through `Phi = W_{f, phi_w} phi_e`,
/// with windows `phi_w` taken from the same eigenfunctions.
pub fn spectrum_transfer_check(a: &SymbolSpec, form: &SymplecticForm, grid: &GridSpec, count: usize) -> Result<TransferReport> {
    let f = form.darboux()?;
    let a_prime = a.compose_linear(f.matrix())?;
    let spectrum = eigensolve(&weyl_kernel(&a_prime, grid)?)?;
    let count = count.min(spectrum.eigenvalues.len());
    let phase_grid = grid.with_dim(2 * grid.dim())?;
    let phase_op = phase_weyl_matrix(a, form, &phase_grid)?;
    let mut entries = Vec::with_capacity(count * count);
    for w in 0..count {
        let window = Window::new(spectrum.eigenfields[w].clone(), true)?;
        for e in 0..count {
            let lambda = spectrum.eigenvalues[e];
            let phi = wavepacket_f(&f, &window, &spectrum.eigenfields[e])?;
            let residual = phase_op.apply(&phi)?.sub(&phi.scale_real(lambda))?.norm() / phi.norm();
            entries.push(TransferEntry { eigen_index: e, window_index: w, eigenvalue: lambda, residual });
        }
    }
    Ok(TransferReport { eigenvalues: spectrum.eigenvalues[..count].to_vec(), entries })
}

#[derive(Debug, Clone)]
pub struct AdjointTransferReport {
    /// `u = W_phi^* U`.
    pub field: SampledField,
    /// Rayleigh quotient of `A` at `u`.
    pub eigenvalue: f64,
    /// `|A u - lambda u| / |u|`.
    pub residual: f64,
}

/// Pulls a phase-space eigenvector candidate back with `W_phi^*` and measures
/// how well it is an eigenvector of `op` (the standard-form case).
pub fn adjoint_transfer_check(big_u: &SampledField, phi: &Window, op: &OperatorMatrix) -> Result<AdjointTransferReport> {
    let u = wavepacket_adjoint(phi, big_u)?;
    let norm = u.norm();
    if norm <= DEGENERATE_TOL * big_u.norm() {
        return Err(Error::DegenerateProjection { norm });
    }
    let au = op.apply(&u)?;
    let eigenvalue = au.inner(&u)?.re / (norm * norm);
    let residual = au.sub(&u.scale_real(eigenvalue))?.norm() / norm;
    Ok(AdjointTransferReport { field: u, eigenvalue, residual })
}

/// Parameters of the two-sided growth estimate
/// `C0 |z|^m0 <= |a(z)| <= C1 |z|^m1`, `|d^alpha a| <= C_alpha |a| |z|^{-rho |alpha|}` for `|z| >= R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShubinParams {
    m0: f64,
    m1: f64,
    rho: f64,
    radius: f64,
    max_order: usize,
}

impl ShubinParams {
    pub fn new(m0: f64, m1: f64, rho: f64, radius: f64, max_order: usize) -> Result<Self> {
        if m0 > m1 {
            return Err(Error::InvalidParameter(format!("m0 = {m0} exceeds m1 = {m1}")));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidParameter(format!("rho = {rho} outside (0, 1]")));
        }
        if radius < 0.0 {
            return Err(Error::InvalidParameter(format!("negative radius {radius}")));
        }
        Ok(Self { m0, m1, rho, radius, max_order })
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }
}

/// Fitted ratios may drift across radii by this factor before a bound is
/// declared violated on the sample.
pub const GROWTH_SLACK: f64 = 10.0;

/// Lower-bound ratios below this count as zero.
pub const LOWER_FLOOR: f64 = 1e-8;

/// Sampled evidence for the growth estimates. A heuristic: finitely many
/// samples never certify membership in the class.
#[derive(Debug, Clone)]
pub struct ShubinReport {
    /// Radii actually sampled (those `>= R`).
    pub radii: Vec<f64>,
    /// `min |a| / |z|^m0` per radius.
    pub lower: Vec<f64>,
    /// `max |a| / |z|^m1` per radius.
    pub upper: Vec<f64>,
    /// `max |d^alpha a| |z|^{rho |alpha|} / |a|` over all `1 <= |alpha| <= max_order`, per radius.
    pub derivative: Vec<f64>,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub derivative_ok: bool,
}

impl ShubinReport {
    pub fn c0(&self) -> f64 {
        self.lower.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn c1(&self) -> f64 {
        self.upper.iter().cloned().fold(0.0, f64::max)
    }

    pub fn derivative_constant(&self) -> f64 {
        self.derivative.iter().cloned().fold(0.0, f64::max)
    }

    pub fn consistent(&self) -> bool {
        self.lower_ok && self.upper_ok && self.derivative_ok
    }
}

/// Radical inverse of `i` in base `b`.
fn halton(mut i: usize, b: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic unit directions: signed axes, pairwise diagonals and Halton points.
fn directions(dim: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; dim];
            v[i] = s;
            out.push(v);
        }
    }
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..dim {
        for j in i + 1..dim {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut v = vec![0.0; dim];
                v[i] = si * r;
                v[j] = sj * r;
                out.push(v);
            }
        }
    }
    let mut k = 1;
    while out.len() < 16 * dim {
        let v: Vec<f64> = (0..dim).map(|a| 2.0 * halton(k, PRIMES[a % PRIMES.len()]) - 1.0).collect();
        k += 1;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.1 {
            out.push(v.iter().map(|x| x / norm).collect());
        }
    }
    out
}

/// Multi-indices of total order `1..=max_order` in `dim` variables.
fn multi_indices(dim: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; dim];
    fn rec(pos: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == cur.len() {
            if cur.iter().sum::<usize>() > 0 {
                out.push(cur.clone());
            }
            return;
        }
        for k in 0..=left {
            cur[pos] = k;
            rec(pos + 1, left - k, cur, out);
        }
        cur[pos] = 0;
    }
    rec(0, max_order, &mut cur, &mut out);
    out
}

/// Samples the growth estimates on spheres `|z| = r` for each sampled radius `r >= R`.
pub fn shubin_diagnostic(a: &SymbolSpec, p: &ShubinParams, sample_radii: &[f64]) -> Result<ShubinReport> {
    let dim = a.dim();
    let dirs = directions(dim);
    let alphas = multi_indices(dim, p.max_order);
    let mut radii: Vec<f64> = sample_radii.iter().cloned().filter(|&r| r >= p.radius && r > 0.0).collect();
    radii.sort_by(f64::total_cmp);
    let (mut lower, mut upper, mut deriv) = (Vec::new(), Vec::new(), Vec::new());
    for &r in &radii {
        let (mut lo, mut hi, mut dv) = (f64::INFINITY, 0.0f64, 0.0f64);
        for d in &dirs {
            let z: Vec<f64> = d.iter().map(|x| x * r).collect();
            let av = a.eval(&z)?.norm();
            lo = lo.min(av / r.powf(p.m0));
            hi = hi.max(av / r.powf(p.m1));
            let step = 1e-3 * r.max(1.0);
            for alpha in &alphas {
                let order = alpha.iter().sum::<usize>() as f64;
                let dval = a.derivative(&z, alpha, step)?.norm();
                let ratio = if av > 0.0 {
                    dval * r.powf(p.rho * order) / av
                } else if dval > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                dv = dv.max(ratio);
            }
        }
        lower.push(lo);
        upper.push(hi);
        deriv.push(dv);
    }
    let first_lo = lower.first().cloned().unwrap_or(0.0);
    let first_hi = upper.first().cloned().unwrap_or(0.0);
    let first_dv = deriv.first().cloned().unwrap_or(0.0);
    let lower_ok = !radii.is_empty() && lower.iter().all(|&v| v > LOWER_FLOOR && v * GROWTH_SLACK >= first_lo);
    let upper_ok = !radii.is_empty() && upper.iter().all(|&v| v.is_finite() && v <= GROWTH_SLACK * first_hi.max(f64::MIN_POSITIVE));
    let derivative_ok = !radii.is_empty() && deriv.iter().all(|&v| v.is_finite() && v <= GROWTH_SLACK * first_dv.max(1.0));
    Ok(ShubinReport { radii, lower, upper, derivative: deriv, lower_ok, upper_ok, derivative_ok })
}

#[derive(Debug, Clone)]
pub struct ClassInvarianceReport {
    pub original: ShubinReport,
    pub transformed: ShubinReport,
}

impl ClassInvarianceReport {
    /// Both symbols pass or both fail on the sample.
    pub fn agree(&self) -> bool {
        self.original.consistent() == self.transformed.consistent()
    }
}

/// Runs [`shubin_diagnostic`] on `a` and on `a o f` with the same parameters.
pub fn symbol_class_invariance_check(a: &SymbolSpec, p: &ShubinParams, f: &DMatrix<f64>, sample_radii: &[f64]) -> Result<ClassInvarianceReport> {
    if p.m0 <= 0.0 {
        return Err(Error::InvalidParameter("class invariance needs m0 > 0".into()));
    }
    if f.clone().try_inverse().is_none() {
        return Err(Error::Singular);
    }
    Ok(ClassInvarianceReport {
        original: shubin_diagnostic(a, p, sample_radii)?,
        transformed: shubin_diagnostic(&a.compose_linear(f)?, p, sample_radii)?,
    })
}
