//! Cross-Wigner transform and the wavepacket maps `W_phi`, `W_{f,phi}`.
//!
//! The transforms live on self-dual grids. The cross-Wigner sum runs over every
//! lattice step `y`; the half-integer arguments `x +- y/2` are read from 2x
//! trigonometric upsampling, so the output `xi`-lattice coincides with the grid.

use crate::error::{Error, Result};
use crate::fft::{centered_dft, upsample2, upsample2_adjoint};
use crate::grid::{pushforward_mf_with, Direction, GridSpec, SampledField, DEFAULT_RESAMPLE_TOL};
use crate::symplectic::DarbouxFactor;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Largest Hermite index accepted by [`basis_generate`].
pub const MAX_HERMITE_INDEX: usize = 5;

/// Projector residual above which a field is declared outside the range of `W_phi`.
pub const RANGE_TOL: f64 = 1e-4;

/// Hermite function `h_k(x) = pi^{-1/4} (2^k k!)^{-1/2} H_k(x) e^{-x^2/2}`, by the
/// normalized three-term recurrence.
pub fn hermite_function(k: usize, x: f64) -> f64 {
    let g = PI.powf(-0.25) * (-x * x / 2.0).exp();
    if k == 0 {
        return g;
    }
    let (mut prev, mut cur) = (g, 2f64.sqrt() * x * g);
    for j in 2..=k {
        let jf = j as f64;
        let next = (2.0 / jf).sqrt() * x * cur - ((jf - 1.0) / jf).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Tensor Hermite function `prod_a w^{-1/2} h_{k_a}(x_a / w)` sampled on `grid`.
pub fn hermite_field(grid: GridSpec, ks: &[usize], width: f64) -> Result<SampledField> {
    if ks.len() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: ks.len() });
    }
    if !(width > 0.0) {
        return Err(Error::InvalidParameter(format!("width {width} must be positive")));
    }
    Ok(SampledField::from_fn(grid, |x| {
        let v: f64 = x.iter().zip(ks).map(|(&xa, &k)| hermite_function(k, xa / width) / width.sqrt()).product();
        Complex64::new(v, 0.0)
    }))
}

/// Analysis window. Constructors normalize on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    field: SampledField,
    norm_one: bool,
}

impl Window {
    /// Wraps `field`; with `normalize` the field is scaled to unit quadrature norm.
    pub fn new(field: SampledField, normalize: bool) -> Result<Self> {
        let norm = field.norm();
        if normalize {
            if norm == 0.0 {
                return Err(Error::InvalidParameter("window vanishes".into()));
            }
            return Ok(Self { field: field.scale_real(1.0 / norm), norm_one: true });
        }
        let norm_one = (norm - 1.0).abs() <= 1e-10;
        Ok(Self { field, norm_one })
    }

    /// Hermite window of index `k` along the first axis, ground state along the others.
    pub fn hermite(grid: GridSpec, k: usize) -> Result<Self> {
        Self::hermite_width(grid, k, 1.0)
    }

    pub fn hermite_width(grid: GridSpec, k: usize, width: f64) -> Result<Self> {
        let mut ks = vec![0; grid.dim()];
        ks[0] = k;
        Self::new(hermite_field(grid, &ks, width)?, true)
    }

    pub fn gaussian(grid: GridSpec) -> Result<Self> {
        Self::hermite(grid, 0)
    }

    pub fn field(&self) -> &SampledField {
        &self.field
    }

    pub fn grid(&self) -> &GridSpec {
        self.field.grid()
    }

    pub fn is_normalized(&self) -> bool {
        self.norm_one
    }
}

fn require_self_dual(g: &GridSpec) -> Result<()> {
    if g.is_self_dual() {
        Ok(())
    } else {
        Err(Error::InvalidGrid("wavepacket transforms need a self-dual grid".into()))
    }
}

/// Iterates over all multi-indices of `[0, n)^d` in row-major order.
fn multi_indices(d: usize, n: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = n.pow(d as u32);
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; d];
        for a in (0..d).rev() {
            idx[a] = flat % n;
            flat /= n;
        }
        idx
    })
}

/// Fine-grid flat index of `2j + s*l'` per axis, or `None` outside `[0, 2N)`.
fn fine_index(j: &[usize], l: &[usize], sign: i64, n: usize) -> Option<usize> {
    let fine = 2 * n as i64;
    let mut flat = 0usize;
    for (&ja, &la) in j.iter().zip(l) {
        let r = 2 * ja as i64 + sign * (la as i64 - n as i64 / 2);
        if r < 0 || r >= fine {
            return None;
        }
        flat = flat * 2 * n + r as usize;
    }
    Some(flat)
}

/// Cross-Wigner transform `W(u, v)(x, xi) = (2 pi)^{-n} int e^{-i xi.y} u(x + y/2) conj v(x - y/2) dy`
/// on the phase-space grid `grid.with_dim(2n)`. Arguments leaving the box read zero.
pub fn cross_wigner(u: &SampledField, v: &SampledField) -> Result<SampledField> {
    u.check_same(v)?;
    let grid = *u.grid();
    require_self_dual(&grid)?;
    let n = grid.dim();
    let np = grid.points();
    let shape = grid.shape();
    let (uf, _) = upsample2(u.values(), &shape);
    let (vf, _) = upsample2(v.values(), &shape);
    let block = grid.len();
    let scale = (2.0 * PI).powi(-(n as i32)) * grid.cell_volume() * (np as f64).powf(n as f64 / 2.0);
    let mut out = vec![Complex64::new(0.0, 0.0); block * block];
    let ls: Vec<Vec<usize>> = multi_indices(n, np).collect();
    let mut line = vec![Complex64::new(0.0, 0.0); block];
    for (jflat, j) in multi_indices(n, np).enumerate() {
        for (slot, l) in line.iter_mut().zip(&ls) {
            *slot = match (fine_index(&j, l, 1, np), fine_index(&j, l, -1, np)) {
                (Some(p), Some(q)) => uf[p] * vf[q].conj(),
                _ => Complex64::new(0.0, 0.0),
            };
        }
        centered_dft(&mut line, &shape, false);
        for (o, x) in out[jflat * block..(jflat + 1) * block].iter_mut().zip(&line) {
            *o = x * scale;
        }
    }
    SampledField::new(grid.with_dim(2 * n)?, out)
}

/// `W_phi u = (2 pi)^{n/2} W(u, phi)`.
pub fn wavepacket(phi: &Window, u: &SampledField) -> Result<SampledField> {
    let n = u.grid().dim() as f64;
    Ok(cross_wigner(u, phi.field())?.scale_real((2.0 * PI).powf(n / 2.0)))
}

/// Exact adjoint of [`wavepacket`] for the quadrature inner products; the discrete
/// form of `(2/pi)^{n/2} int U(z0) T_GR(z0) phi dz0`.
pub fn wavepacket_adjoint(phi: &Window, big_u: &SampledField) -> Result<SampledField> {
    let grid = *phi.grid();
    require_self_dual(&grid)?;
    let n = grid.dim();
    let np = grid.points();
    if big_u.grid() != &grid.with_dim(2 * n)? {
        return Err(Error::GridMismatch);
    }
    let shape = grid.shape();
    let (pf, fine_shape) = upsample2(phi.field().values(), &shape);
    let block = grid.len();
    let c = (2.0 * PI).powf(-(n as f64) / 2.0) * grid.cell_volume() * (np as f64).powf(n as f64 / 2.0);
    let mut y = vec![Complex64::new(0.0, 0.0); pf.len()];
    let ls: Vec<Vec<usize>> = multi_indices(n, np).collect();
    let mut line = vec![Complex64::new(0.0, 0.0); block];
    for (jflat, j) in multi_indices(n, np).enumerate() {
        line.copy_from_slice(&big_u.values()[jflat * block..(jflat + 1) * block]);
        centered_dft(&mut line, &shape, true);
        for (v, l) in line.iter().zip(&ls) {
            if let (Some(p), Some(q)) = (fine_index(&j, l, 1, np), fine_index(&j, l, -1, np)) {
                y[p] += v * pf[q];
            }
        }
    }
    let values = upsample2_adjoint(&y, &fine_shape).into_iter().map(|x| x * c * grid.cell_volume()).collect();
    SampledField::new(grid, values)
}

/// Orthogonal projector `P_phi = W_phi W_phi^*` onto the range of `W_phi`.
pub fn projector(phi: &Window, big_u: &SampledField) -> Result<SampledField> {
    wavepacket(phi, &wavepacket_adjoint(phi, big_u)?)
}

/// Relative distance of `U` from the range of `W_phi`.
pub fn range_residual(phi: &Window, big_u: &SampledField) -> Result<f64> {
    let norm = big_u.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok(projector(phi, big_u)?.sub(big_u)?.norm() / norm)
}

/// Recovers `u` from `U = W_phi u`; fails with [`Error::NotInRange`] when the
/// projector residual exceeds [`RANGE_TOL`].
pub fn wavepacket_inverse(phi: &Window, big_u: &SampledField) -> Result<SampledField> {
    let u = wavepacket_adjoint(phi, big_u)?;
    let norm = big_u.norm();
    if norm > 0.0 {
        let residual = wavepacket(phi, &u)?.sub(big_u)?.norm() / norm;
        if residual > RANGE_TOL {
            return Err(Error::NotInRange { residual });
        }
    }
    Ok(u)
}

/// `W_{f,phi} u = M_f^{-1} W_phi u`.
pub fn wavepacket_f(factor: &DarbouxFactor, phi: &Window, u: &SampledField) -> Result<SampledField> {
    pushforward_mf_with(&wavepacket(phi, u)?, factor, Direction::Inverse, DEFAULT_RESAMPLE_TOL)
}

/// `W_{f,phi}^* U = W_phi^* M_f U`.
pub fn wavepacket_f_adjoint(factor: &DarbouxFactor, phi: &Window, big_u: &SampledField) -> Result<SampledField> {
    wavepacket_adjoint(phi, &pushforward_mf_with(big_u, factor, Direction::Forward, DEFAULT_RESAMPLE_TOL)?)
}

/// A generated basis element with its window and eigen indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisElement {
    pub window_index: usize,
    pub eigen_index: usize,
    pub field: SampledField,
}

/// `Phi_{j,k} = W_{f,phi_j} phi_k` for every `j` in `js` (window) and `k` in `ks`.
pub fn basis_generate(
    factor: &DarbouxFactor,
    grid: GridSpec,
    js: &[usize],
    ks: &[usize],
) -> Result<Vec<BasisElement>> {
    basis_generate_mixed(factor, grid, js, ks, 1.0)
}

/// As [`basis_generate`] with the second family `psi_k` of Hermite width `width`.
pub fn basis_generate_mixed(
    factor: &DarbouxFactor,
    grid: GridSpec,
    js: &[usize],
    ks: &[usize],
    width: f64,
) -> Result<Vec<BasisElement>> {
    if let Some(&index) = js.iter().chain(ks).find(|&&i| i > MAX_HERMITE_INDEX) {
        return Err(Error::IndexCap { index, cap: MAX_HERMITE_INDEX });
    }
    let mut out = Vec::with_capacity(js.len() * ks.len());
    for &j in js {
        let phi = Window::hermite(grid, j)?;
        for &k in ks {
            let psi = Window::hermite_width(grid, k, width)?;
            out.push(BasisElement { window_index: j, eigen_index: k, field: wavepacket_f(factor, &phi, psi.field())? });
        }
    }
    Ok(out)
}
