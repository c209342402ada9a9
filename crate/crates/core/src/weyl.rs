//! Weyl quantization on self-dual grids and the phase-space operators `A~_omega`.
//!
//! A Weyl matrix on a grid with `N` points per axis and spacing `h` is
//!
//! `A_{jk} = (2N)^{-d} sum_m e^{i (x_j - x_k) zeta_m} a((x_j + x_k)/2, zeta_m)`,
//!
//! with `zeta_m` on the lattice of spacing `h/2` over `[-L, L)`. Both the midpoints
//! and the `zeta_m` are points of the 2x refined grid, and the entries include the
//! quadrature weight `h^d`, so `A u` approximates `int K(x, y) u(y) dy` directly.
//! The oversampling in `zeta` keeps the sum free of wrap-around for every
//! `|j - k| < N`, which makes the constant symbol quantize to the exact identity.

use crate::error::{Error, Result};
use crate::fft::{centered_dft, half_shift_axis_nyquist, upsample2, FftNd};
use crate::grid::{format::Array, pushforward_mf_with, substitute, sympl_fourier_sigma, Direction, GridSpec, SampledField, DEFAULT_RESAMPLE_TOL};
use crate::symplectic::{sigma, symplectic_defect, SymplecticForm};
use crate::wavepacket::hermite_field;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Largest grid (total points) for dense phase-space operators.
pub const DENSE_CAP: usize = 4096;

pub type SymbolFn = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

/// A symbol on `R^{dim}`.
#[derive(Clone)]
pub enum SymbolSpec {
    Constant { dim: usize, value: Complex64 },
    Closed { dim: usize, f: SymbolFn, real: bool },
    /// Samples on the 2x refined grid of the operator grid.
    Sampled { field: SampledField, real: bool },
}

impl fmt::Debug for SymbolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { dim, value } => write!(f, "Constant({dim}, {value})"),
            Self::Closed { dim, real, .. } => write!(f, "Closed(dim {dim}, real {real})"),
            Self::Sampled { field, real } => write!(f, "Sampled({:?}, real {real})", field.grid()),
        }
    }
}

impl SymbolSpec {
    pub fn constant(dim: usize, value: Complex64) -> Self {
        Self::Constant { dim, value }
    }

    pub fn closed(dim: usize, f: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static) -> Self {
        Self::Closed { dim, f: Arc::new(f), real: false }
    }

    pub fn closed_real(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::Closed { dim, f: Arc::new(move |z| Complex64::new(f(z), 0.0)), real: true }
    }

    /// Samples already on the refined grid of the intended operator grid.
    pub fn sampled(field: SampledField) -> Self {
        let real = field.values().iter().all(|v| v.im == 0.0);
        Self::Sampled { field, real }
    }

    /// Samples on the operator-side phase-space grid, refined by trigonometric
    /// interpolation so the symbol can be quantized.
    pub fn from_coarse(field: &SampledField) -> Result<Self> {
        let g = field.grid();
        let (values, _) = upsample2(field.values(), &g.shape());
        let real = field.values().iter().all(|v| v.im == 0.0);
        let values = if real { values.into_iter().map(|v| Complex64::new(v.re, 0.0)).collect() } else { values };
        Ok(Self::Sampled { field: SampledField::new(g.refined()?, values)?, real })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Constant { dim, .. } | Self::Closed { dim, .. } => *dim,
            Self::Sampled { field, .. } => field.grid().dim(),
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            Self::Constant { value, .. } => value.im == 0.0,
            Self::Closed { real, .. } | Self::Sampled { real, .. } => *real,
        }
    }

    /// Point evaluation; sampled symbols answer only on their own lattice.
    pub fn eval(&self, z: &[f64]) -> Result<Complex64> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        match self {
            Self::Constant { value, .. } => Ok(*value),
            Self::Closed { f, .. } => Ok(f(z)),
            Self::Sampled { field, .. } => {
                let k = field.grid().lattice_index(z).ok_or(Error::MidpointUnavailable)?;
                Ok(field.values()[k])
            }
        }
    }

    /// Values on `grid` (closed forms are evaluated; sampled symbols must live on
    /// `grid` or on its refinement).
    pub fn sample(&self, grid: GridSpec) -> Result<SampledField> {
        if grid.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: grid.dim() });
        }
        match self {
            Self::Constant { value, .. } => Ok(SampledField::from_fn(grid, |_| *value)),
            Self::Closed { f, .. } => Ok(SampledField::from_fn(grid, |z| f(z))),
            Self::Sampled { field, .. } => {
                let fg = field.grid();
                if fg == &grid {
                    return Ok(field.clone());
                }
                if fg != &grid.refined()? {
                    return Err(Error::MidpointUnavailable);
                }
                let mut idx = vec![0usize; grid.dim()];
                let mut fine = vec![0usize; grid.dim()];
                let values = (0..grid.len())
                    .map(|flat| {
                        grid.unflatten(flat, &mut idx);
                        for (f, &i) in fine.iter_mut().zip(&idx) {
                            *f = 2 * i;
                        }
                        field.values()[fg.flatten(&fine)]
                    })
                    .collect();
                SampledField::new(grid, values)
            }
        }
    }

    /// `z -> a(M z)`.
    pub fn compose_linear(&self, m: &DMatrix<f64>) -> Result<Self> {
        let d = self.dim();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: m.nrows() });
        }
        match self {
            Self::Constant { .. } => Ok(self.clone()),
            Self::Closed { f, real, .. } => {
                let f = f.clone();
                let m = m.clone();
                Ok(Self::Closed {
                    dim: d,
                    f: Arc::new(move |z| {
                        let w: Vec<f64> = (0..d).map(|i| (0..d).map(|j| m[(i, j)] * z[j]).sum()).collect();
                        f(&w)
                    }),
                    real: *real,
                })
            }
            Self::Sampled { .. } => Err(Error::MidpointUnavailable),
        }
    }

    /// `d^alpha a(z)` by nested central differences of width `step`; exact up to
    /// round-off for polynomials of degree at most 2 per axis.
    pub fn derivative(&self, z: &[f64], alpha: &[usize], step: f64) -> Result<Complex64> {
        if alpha.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: alpha.len() });
        }
        match alpha.iter().position(|&k| k > 0) {
            None => self.eval(z),
            Some(axis) => {
                let mut lower = alpha.to_vec();
                lower[axis] -= 1;
                let mut zp = z.to_vec();
                let mut zm = z.to_vec();
                zp[axis] += step;
                zm[axis] -= step;
                Ok((self.derivative(&zp, &lower, step)? - self.derivative(&zm, &lower, step)?) / (2.0 * step))
            }
        }
    }

    /// Pointwise sum of two symbols of the same kind.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let real = self.is_real() && other.is_real();
        match (self, other) {
            (Self::Sampled { field: a, .. }, Self::Sampled { field: b, .. }) => Ok(Self::Sampled { field: a.add(b)?, real }),
            (Self::Sampled { .. }, _) | (_, Self::Sampled { .. }) => Err(Error::MidpointUnavailable),
            (Self::Constant { dim, value: a }, Self::Constant { value: b, .. }) => Ok(Self::Constant { dim: *dim, value: a + b }),
            _ => {
                let (a, b) = (self.clone(), other.clone());
                let f: SymbolFn = Arc::new(move |z| a.eval(z).unwrap_or_default() + b.eval(z).unwrap_or_default());
                Ok(Self::Closed { dim: self.dim(), f, real })
            }
        }
    }
}

/// Dense operator on the functions of a grid; entries include the quadrature weight.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    grid: GridSpec,
    entries: DMatrix<Complex64>,
    hermitian: bool,
}

impl OperatorMatrix {
    pub fn new(grid: GridSpec, entries: DMatrix<Complex64>, hermitian: bool) -> Result<Self> {
        if entries.nrows() != grid.len() || entries.ncols() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: entries.nrows() });
        }
        Ok(Self { grid, entries, hermitian })
    }

    pub fn identity(grid: GridSpec) -> Self {
        Self { grid, entries: DMatrix::identity(grid.len(), grid.len()), hermitian: true }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    /// Set when the generating symbol is real.
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// `max |A - A^*| / max |A|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.entries.nrows();
        let mut defect = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let a = self.entries[(i, j)];
                scale = scale.max(a.norm());
                defect = defect.max((a - self.entries[(j, i)].conj()).norm());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            defect / scale
        }
    }

    pub fn apply(&self, u: &SampledField) -> Result<SampledField> {
        if u.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let v = DVector::from_column_slice(u.values());
        let out = &self.entries * v;
        SampledField::new(self.grid, out.as_slice().to_vec())
    }

    /// Operator product `self * other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid: self.grid, entries: &self.entries * &other.entries, hermitian: false })
    }

    pub fn adjoint(&self) -> Self {
        Self { grid: self.grid, entries: self.entries.adjoint(), hermitian: self.hermitian }
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        self.entries.clone().singular_values().max()
    }

    /// Rank-2 array in row-major order.
    pub fn to_array(&self) -> Array {
        Array::from_matrix(&self.entries)
    }
}

fn require_self_dual(g: &GridSpec) -> Result<()> {
    if g.is_self_dual() {
        Ok(())
    } else {
        Err(Error::InvalidGrid("Weyl quantization needs a self-dual grid".into()))
    }
}

/// Core quantizer. `sym(idx)` returns the symbol at the refined-grid multi-index
/// `idx = (s_1..s_d, m_1..m_d)`, position `(idx - N) h / 2`.
fn quantize(grid: &GridSpec, mut sym: impl FnMut(&[usize]) -> Complex64) -> DMatrix<Complex64> {
    let d = grid.dim();
    let n = grid.points();
    let fine = 2 * n;
    let size = grid.len();
    let fine_shape = vec![fine; d];
    let block: usize = fine.pow(d as u32);
    let norm = 1.0 / block as f64;
    let mut fft = FftNd::new(&fine_shape, true);
    let mut vals = vec![Complex64::new(0.0, 0.0); block];
    let mut entries = DMatrix::<Complex64>::zeros(size, size);
    let mut idx = vec![0usize; 2 * d];
    let centers = (fine - 1).pow(d as u32);
    let mut s = vec![0usize; d];
    let mut m = vec![0usize; d];
    for c in 0..centers {
        let mut rest = c;
        for a in (0..d).rev() {
            s[a] = rest % (fine - 1);
            rest /= fine - 1;
        }
        idx[..d].copy_from_slice(&s);
        for q in 0..block {
            let mut rest = q;
            for a in (0..d).rev() {
                m[a] = rest % fine;
                rest /= fine;
            }
            // frequency lattice index m sits at FFT slot (m + N) mod 2N
            for a in 0..d {
                idx[d + a] = (m[a] + n) % fine;
            }
            vals[q] = sym(&idx);
        }
        fft.process(&mut vals);
        // all (j, k) with j + k = s per axis
        let lo: Vec<usize> = s.iter().map(|&sa| sa.saturating_sub(n - 1)).collect();
        let counts: Vec<usize> = s.iter().zip(&lo).map(|(&sa, &l)| sa.min(n - 1) - l + 1).collect();
        let pairs: usize = counts.iter().product();
        for t in 0..pairs {
            let mut rest = t;
            let mut row = 0usize;
            let mut col = 0usize;
            let mut g = 0usize;
            let mut stride = 1usize;
            let mut row_stride = 1usize;
            for a in (0..d).rev() {
                let ja = lo[a] + rest % counts[a];
                rest /= counts[a];
                let ka = s[a] - ja;
                row += ja * row_stride;
                col += ka * row_stride;
                row_stride *= n;
                g += (ja + fine - ka) % fine * stride;
                stride *= fine;
            }
            entries[(row, col)] = vals[g] * norm;
        }
    }
    entries
}

fn refined_position(grid: &GridSpec, idx: usize) -> f64 {
    (idx as f64 - grid.points() as f64) * grid.spacing() / 2.0
}

/// Weyl matrix of `a` on the `n`-dimensional `grid`.
pub fn weyl_kernel(a: &SymbolSpec, grid: &GridSpec) -> Result<OperatorMatrix> {
    require_self_dual(grid)?;
    let d = grid.dim();
    if a.dim() != 2 * d {
        return Err(Error::DimensionMismatch { expected: 2 * d, got: a.dim() });
    }
    if grid.len() > DENSE_CAP {
        return Err(Error::GridCapExceeded { points: grid.len(), cap: DENSE_CAP });
    }
    let hermitian = a.is_real();
    let entries = match a {
        SymbolSpec::Constant { value, .. } => DMatrix::identity(grid.len(), grid.len()) * *value,
        SymbolSpec::Closed { f, .. } => {
            let mut z = vec![0.0; 2 * d];
            quantize(grid, |idx| {
                for (zi, &i) in z.iter_mut().zip(idx) {
                    *zi = refined_position(grid, i);
                }
                f(&z)
            })
        }
        SymbolSpec::Sampled { field, .. } => {
            if field.grid() != &grid.refined()?.with_dim(2 * d)? {
                return Err(Error::MidpointUnavailable);
            }
            let fg = *field.grid();
            quantize(grid, |idx| field.values()[fg.flatten(idx)])
        }
    };
    OperatorMatrix::new(*grid, entries, hermitian)
}

/// Symbol samples `a(x_j, xi_m) = int e^{-i xi.y} K(x + y/2, x - y/2) dy` on the
/// phase-space grid of the operator. Half-integer kernel arguments come from
/// trigonometric half shifts; arguments outside the box read zero.
pub fn symbol_samples_from_kernel(k: &OperatorMatrix) -> Result<SampledField> {
    let grid = *k.grid();
    require_self_dual(&grid)?;
    let d = grid.dim();
    let n = grid.points();
    let size = grid.len();
    let kshape = vec![n; 2 * d];
    // row-major (J, K) copy of the entries
    let mut base = vec![Complex64::new(0.0, 0.0); size * size];
    for r in 0..size {
        for c in 0..size {
            base[r * size + c] = k.entries()[(r, c)];
        }
    }
    let variants: Vec<Vec<Complex64>> = (0..1usize << d)
        .map(|mask| {
            let mut v = base.clone();
            for a in 0..d {
                if mask & (1 << a) != 0 {
                    // opposite Nyquist readings keep functions of J - K exact
                    half_shift_axis_nyquist(&mut v, &kshape, a, -1.0);
                    half_shift_axis_nyquist(&mut v, &kshape, d + a, 1.0);
                }
            }
            v
        })
        .collect();
    let shape = grid.shape();
    let scale = (n as f64).powf(d as f64 / 2.0);
    let mut out = vec![Complex64::new(0.0, 0.0); size * size];
    let mut j = vec![0usize; d];
    let mut l = vec![0usize; d];
    let mut line = vec![Complex64::new(0.0, 0.0); size];
    for jflat in 0..size {
        grid.unflatten(jflat, &mut j);
        for (lflat, slot) in line.iter_mut().enumerate() {
            grid.unflatten(lflat, &mut l);
            let mut mask = 0usize;
            let mut p = 0usize;
            let mut q = 0usize;
            let mut inside = true;
            for a in 0..d {
                let lp = l[a] as i64 - n as i64 / 2;
                let (pa, qa) = if lp.rem_euclid(2) == 0 {
                    (j[a] as i64 + lp / 2, j[a] as i64 - lp / 2)
                } else {
                    mask |= 1 << a;
                    (j[a] as i64 + (lp - 1) / 2, j[a] as i64 - (lp + 1) / 2)
                };
                if pa < 0 || qa < 0 || pa >= n as i64 || qa >= n as i64 {
                    inside = false;
                    break;
                }
                p = p * n + pa as usize;
                q = q * n + qa as usize;
            }
            *slot = if inside { variants[mask][p * size + q] } else { Complex64::new(0.0, 0.0) };
        }
        centered_dft(&mut line, &shape, false);
        for (o, v) in out[jflat * size..(jflat + 1) * size].iter_mut().zip(&line) {
            *o = v * scale;
        }
    }
    SampledField::new(grid.with_dim(2 * d)?, out)
}

/// Weyl symbol of an operator matrix, as a quantizable sampled symbol.
pub fn symbol_from_kernel(k: &OperatorMatrix) -> Result<SymbolSpec> {
    SymbolSpec::from_coarse(&symbol_samples_from_kernel(k)?)
}

/// `a~_omega(z, zeta) = a(z - Omega zeta / 2)` on `R^{4n}`.
pub fn lift_symbol(a: &SymbolSpec, form: &SymplecticForm) -> Result<SymbolSpec> {
    let d = form.dim();
    if a.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: a.dim() });
    }
    match a {
        SymbolSpec::Constant { value, .. } => Ok(SymbolSpec::Constant { dim: 2 * d, value: *value }),
        SymbolSpec::Sampled { .. } => Err(Error::MidpointUnavailable),
        SymbolSpec::Closed { f, real, .. } => {
            let f = f.clone();
            let omega = form.matrix().clone();
            Ok(SymbolSpec::Closed {
                dim: 2 * d,
                f: Arc::new(move |w| {
                    let (z, zeta) = w.split_at(d);
                    let p: Vec<f64> = (0..d)
                        .map(|i| z[i] - 0.5 * (0..d).map(|j| omega[(i, j)] * zeta[j]).sum::<f64>())
                        .collect();
                    f(&p)
                }),
                real: *real,
            })
        }
    }
}

/// Dense matrix of `A~_omega` on the phase-space `grid` (dimension `2n`), the
/// Weyl matrix of the lifted symbol.
pub fn phase_weyl_matrix(a: &SymbolSpec, form: &SymplecticForm, grid: &GridSpec) -> Result<OperatorMatrix> {
    if grid.dim() != form.dim() {
        return Err(Error::DimensionMismatch { expected: form.dim(), got: grid.dim() });
    }
    if grid.len() > DENSE_CAP {
        return Err(Error::GridCapExceeded { points: grid.len(), cap: DENSE_CAP });
    }
    weyl_kernel(&lift_symbol(a, form)?, grid)
}

/// `A~_omega U = (2 pi)^{-n} |det Omega|^{-1/2} int F_omega a(z0) T~_omega(z0) U dz0`
/// by direct quadrature over a lattice of `z0` wide enough to hold `F_omega a`.
pub fn phase_weyl_apply_quadrature(a: &SymbolSpec, form: &SymplecticForm, big_u: &SampledField) -> Result<SampledField> {
    let grid = *big_u.grid();
    let d = grid.dim();
    if d != form.dim() {
        return Err(Error::DimensionMismatch { expected: form.dim(), got: d });
    }
    if grid.len() > DENSE_CAP {
        return Err(Error::GridCapExceeded { points: grid.len(), cap: DENSE_CAP });
    }
    if let SymbolSpec::Constant { value, .. } = a {
        return Ok(big_u.scale(*value));
    }
    let n = grid.points();
    let h = grid.spacing();
    let half_n = form.n();
    let av = a.sample(grid)?;
    let inv = form.inverse();
    let ext = (form.matrix().clone().singular_values().max() - 1e-9).ceil().max(1.0) as usize;
    let en = ext * n;
    let z0_coord = |p: usize| (p as f64 - en as f64 / 2.0) * h;
    let coords: Vec<f64> = grid.axis();
    let det_scale = form.det_abs().powf(-0.5);
    let pref = (2.0 * PI).powi(-(half_n as i32)) * det_scale;

    // F_omega a(z0) = pref * h^d * sum_z e^{-i z0^T Omega^{-1} z} a(z)
    let z0_count = en.pow(d as u32);
    let mut fa = vec![Complex64::new(0.0, 0.0); z0_count];
    let mut p = vec![0usize; d];
    let mut zidx = vec![0usize; d];
    let mut axis_phase = vec![Complex64::new(0.0, 0.0); d * n];
    let mut peak = 0.0f64;
    for (flat0, slot) in fa.iter_mut().enumerate() {
        let mut rest = flat0;
        for a in (0..d).rev() {
            p[a] = rest % en;
            rest /= en;
        }
        let z0: Vec<f64> = p.iter().map(|&i| z0_coord(i)).collect();
        // k = Omega^{-T} z0, so that z0^T Omega^{-1} z = k . z
        let k: Vec<f64> = (0..d).map(|b| (0..d).map(|a| inv[(a, b)] * z0[a]).sum()).collect();
        // the lattice sum aliases outside the fundamental frequency cell
        if k.iter().any(|kb| kb.abs() >= grid.halfwidth() + 1e-9) {
            continue;
        }
        for (b, &kb) in k.iter().enumerate() {
            for (i, &x) in coords.iter().enumerate() {
                axis_phase[b * n + i] = Complex64::from_polar(1.0, -kb * x);
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (flat, v) in av.values().iter().enumerate() {
            if v.norm_sqr() == 0.0 {
                continue;
            }
            grid.unflatten(flat, &mut zidx);
            let mut ph = Complex64::new(1.0, 0.0);
            for b in 0..d {
                ph *= axis_phase[b * n + zidx[b]];
            }
            acc += ph * v;
        }
        *slot = acc * pref * grid.cell_volume();
        peak = peak.max(slot.norm());
    }

    // U at half-lattice points
    let (uf, fine_shape) = upsample2(big_u.values(), &grid.shape());
    let fine = fine_shape[0];
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut src = vec![0i64; d];
    for (flat0, f) in fa.iter().enumerate() {
        if f.norm() <= 1e-18 * peak {
            continue;
        }
        let mut rest = flat0;
        for a in (0..d).rev() {
            p[a] = rest % en;
            rest /= en;
        }
        let z0: Vec<f64> = p.iter().map(|&i| z0_coord(i)).collect();
        let w: Vec<f64> = (0..d).map(|i| (0..d).map(|j| inv[(i, j)] * z0[j]).sum()).collect();
        for b in 0..d {
            for (i, &x) in coords.iter().enumerate() {
                axis_phase[b * n + i] = Complex64::from_polar(1.0, -w[b] * x);
            }
        }
        for (flat, o) in out.iter_mut().enumerate() {
            grid.unflatten(flat, &mut zidx);
            let mut fine_flat = 0usize;
            let mut inside = true;
            for a in 0..d {
                // fine index of z - z0/2: 2(j - N/2) - (p - EN/2) + N
                src[a] = 2 * zidx[a] as i64 - n as i64 - (p[a] as i64 - en as i64 / 2) + n as i64;
                if src[a] < 0 || src[a] >= fine as i64 {
                    inside = false;
                    break;
                }
                fine_flat = fine_flat * fine + src[a] as usize;
            }
            if !inside {
                continue;
            }
            let mut ph = *f;
            for b in 0..d {
                ph *= axis_phase[b * n + zidx[b]];
            }
            *o += ph * uf[fine_flat];
        }
    }
    let scale = pref * grid.cell_volume();
    SampledField::new(grid, out.into_iter().map(|v| v * scale).collect())
}

/// Samples of `a # b` on the phase-space `grid`, from
/// `F_sigma c(z) = (2 pi)^{-n} int e^{i sigma(z, z')/2} F_sigma a(z - z') F_sigma b(z') dz'`.
pub fn twisted_product_samples(a: &SymbolSpec, b: &SymbolSpec, grid: &GridSpec) -> Result<SampledField> {
    require_self_dual(grid)?;
    let d = grid.dim();
    if d % 2 != 0 {
        return Err(Error::OddDimension(d));
    }
    if grid.len() > DENSE_CAP {
        return Err(Error::GridCapExceeded { points: grid.len(), cap: DENSE_CAP });
    }
    let fa = sympl_fourier_sigma(&a.sample(*grid)?)?;
    let fb = sympl_fourier_sigma(&b.sample(*grid)?)?;
    let n = grid.points();
    let size = grid.len();
    let points: Vec<Vec<f64>> = (0..size).map(|k| grid.point(k)).collect();
    let mut zi = vec![0usize; d];
    let mut zpi = vec![0usize; d];
    let mut fc = vec![Complex64::new(0.0, 0.0); size];
    for (j, slot) in fc.iter_mut().enumerate() {
        grid.unflatten(j, &mut zi);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, fbv) in fb.values().iter().enumerate() {
            grid.unflatten(k, &mut zpi);
            let mut diff = 0usize;
            let mut inside = true;
            for a in 0..d {
                let t = zi[a] as i64 - zpi[a] as i64 + n as i64 / 2;
                if t < 0 || t >= n as i64 {
                    inside = false;
                    break;
                }
                diff = diff * n + t as usize;
            }
            if !inside {
                continue;
            }
            let phase = Complex64::from_polar(1.0, 0.5 * sigma(&points[j], &points[k]));
            acc += phase * fa.values()[diff] * fbv;
        }
        *slot = acc;
    }
    let scale = (2.0 * PI).powi(-((d / 2) as i32)) * grid.cell_volume();
    let fc = SampledField::new(*grid, fc.into_iter().map(|v| v * scale).collect())?;
    sympl_fourier_sigma(&fc)
}

/// `a # b` as a quantizable sampled symbol.
pub fn twisted_product(a: &SymbolSpec, b: &SymbolSpec, grid: &GridSpec) -> Result<SymbolSpec> {
    SymbolSpec::from_coarse(&twisted_product_samples(a, b, grid)?)
}

/// Difference step for [`twisted_product_expansion`].
pub const EXPANSION_STEP: f64 = 1e-2;

/// Moyal expansion `sum_{k <= order} (i/2)^k / k! a P^k b` with the Poisson
/// bidifferential operator `P = <-d_x . ->d_xi - <-d_xi . ->d_x`.
///
/// The series terminates for polynomial symbols, so with `order` at least the
/// smaller degree this is the exact twisted product; such symbols do not decay
/// and cannot be handled by the grid routines. Derivatives are finite differences.
pub fn twisted_product_expansion(a: &SymbolSpec, b: &SymbolSpec, order: usize) -> Result<SymbolSpec> {
    let d = a.dim();
    if b.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: b.dim() });
    }
    if d % 2 != 0 {
        return Err(Error::OddDimension(d));
    }
    if matches!(a, SymbolSpec::Sampled { .. }) || matches!(b, SymbolSpec::Sampled { .. }) {
        return Err(Error::MidpointUnavailable);
    }
    let n = d / 2;
    // each factor of P picks an axis j and one of the two cross terms
    let mut terms: Vec<(Complex64, Vec<usize>, Vec<usize>)> = Vec::new();
    let mut fact = 1.0;
    for k in 0..=order {
        if k > 0 {
            fact *= k as f64;
        }
        let coeff = Complex64::new(0.0, 0.5).powu(k as u32) / fact;
        for choice in 0..(2 * n).pow(k as u32) {
            let mut rest = choice;
            let mut da = vec![0usize; d];
            let mut db = vec![0usize; d];
            let mut sign = 1.0;
            for _ in 0..k {
                let c = rest % (2 * n);
                rest /= 2 * n;
                let j = c % n;
                if c < n {
                    da[j] += 1;
                    db[n + j] += 1;
                } else {
                    da[n + j] += 1;
                    db[j] += 1;
                    sign = -sign;
                }
            }
            terms.push((coeff * sign, da, db));
        }
    }
    let (a, b) = (a.clone(), b.clone());
    Ok(SymbolSpec::closed(d, move |z| {
        terms
            .iter()
            .map(|(c, da, db)| {
                c * a.derivative(z, da, EXPANSION_STEP).unwrap_or_default() * b.derivative(z, db, EXPANSION_STEP).unwrap_or_default()
            })
            .sum()
    }))
}

/// Smooth test fields `prod_a h_{k_a}(z_a)` used to measure operator identities.
pub fn test_fields(grid: GridSpec) -> Result<Vec<SampledField>> {
    let d = grid.dim();
    let mut out = Vec::new();
    let total = 3usize.pow(d as u32);
    for flat in 0..total {
        let mut rest = flat;
        let mut ks = vec![0usize; d];
        for a in (0..d).rev() {
            ks[a] = rest % 3;
            rest /= 3;
        }
        if d > 2 && ks.iter().sum::<usize>() > 2 {
            continue;
        }
        out.push(hermite_field(grid, &ks, 1.0)?);
    }
    Ok(out)
}

/// Residuals of an operator identity over the test fields.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    /// Largest relative residual.
    pub residual: f64,
    pub per_field: Vec<f64>,
}

impl IdentityReport {
    fn from_pairs(pairs: Vec<(SampledField, SampledField)>) -> Result<Self> {
        let mut per_field = Vec::with_capacity(pairs.len());
        for (lhs, rhs) in &pairs {
            let scale = lhs.norm().max(rhs.norm());
            per_field.push(if scale == 0.0 { 0.0 } else { lhs.sub(rhs)?.norm() / scale });
        }
        let residual = per_field.iter().copied().fold(0.0, f64::max);
        Ok(Self { residual, per_field })
    }
}

/// Checks `A~'' = M_S A~' M_S^{-1}` where `A~'` has symbol `a o f`, `A~''` has symbol
/// `a o f S` (both quantized with the standard form) and `M_S U = U o S`.
/// The residual is measured on [`test_fields`].
pub fn conjugation_check(a: &SymbolSpec, form: &SymplecticForm, s: &DMatrix<f64>, grid: &GridSpec) -> Result<IdentityReport> {
    let defect = symplectic_defect(s)?;
    if defect > 1e-10 {
        return Err(Error::NotSymplectic { defect });
    }
    if s.nrows() != form.dim() {
        return Err(Error::DimensionMismatch { expected: form.dim(), got: s.nrows() });
    }
    let f = form.darboux()?;
    let std_form = SymplecticForm::standard(form.n());
    let a1 = a.compose_linear(f.matrix())?;
    let a2 = a.compose_linear(&(f.matrix() * s))?;
    let op1 = phase_weyl_matrix(&a1, &std_form, grid)?;
    let op2 = phase_weyl_matrix(&a2, &std_form, grid)?;
    let s_inv = s.clone().try_inverse().ok_or(Error::Singular)?;
    let mut pairs = Vec::new();
    for v in test_fields(*grid)? {
        let lhs = op2.apply(&v)?;
        let w = substitute(&v, &s_inv, None, DEFAULT_RESAMPLE_TOL)?;
        let rhs = substitute(&op1.apply(&w)?, s, None, DEFAULT_RESAMPLE_TOL)?;
        pairs.push((lhs, rhs));
    }
    IdentityReport::from_pairs(pairs)
}

/// Checks `M_f A~_omega = A~' M_f` with `a'(z) = a(f z)` and `f` the canonical
/// Darboux factor, on the test fields.
pub fn pushforward_conjugation_check(a: &SymbolSpec, form: &SymplecticForm, grid: &GridSpec) -> Result<IdentityReport> {
    let f = form.darboux()?;
    let op_omega = phase_weyl_matrix(a, form, grid)?;
    let op_std = phase_weyl_matrix(&a.compose_linear(f.matrix())?, &SymplecticForm::standard(form.n()), grid)?;
    let mut pairs = Vec::new();
    for t in test_fields(*grid)? {
        let lhs = pushforward_mf_with(&op_omega.apply(&t)?, &f, Direction::Forward, DEFAULT_RESAMPLE_TOL)?;
        let rhs = op_std.apply(&pushforward_mf_with(&t, &f, Direction::Forward, DEFAULT_RESAMPLE_TOL)?)?;
        pairs.push((lhs, rhs));
    }
    IdentityReport::from_pairs(pairs)
}
