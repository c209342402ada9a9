//! Uniform periodic grids, sampled fields and Fourier-type transforms.
//!
//! A grid has `N` points per axis on `[-L, L)` with `x_k = (k - N/2) h`,
//! `h = 2L / N`. Fields are stored row-major, axis 0 slowest. On a self-dual
//! grid (`h^2 = 2 pi / N`) the frequency lattice coincides with the space
//! lattice and the unitary Fourier transform is a centered DFT.

pub mod format;
mod resample;

pub use resample::substitute;

use crate::error::{Error, Result};
use crate::fft;
use crate::symplectic::{DarbouxFactor, SymplecticForm};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Largest number of grid points a field may have.
pub const MAX_GRID_POINTS: usize = 1 << 22;

/// Fraction of `||U||^2` in the outer 10% shell above which a field is flagged.
pub const BOUNDARY_MASS_WARNING: f64 = 1e-8;

pub const DEFAULT_RESAMPLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    points: usize,
    halfwidth: f64,
}

impl GridSpec {
    pub fn new(dim: usize, points: usize, halfwidth: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if points < 8 || points % 2 != 0 {
            return Err(Error::InvalidGrid(format!("N = {points} must be even and at least 8")));
        }
        if !(halfwidth > 0.0 && halfwidth.is_finite()) {
            return Err(Error::InvalidGrid(format!("halfwidth {halfwidth} must be positive")));
        }
        let total = (points as f64).powi(dim as i32);
        if total > MAX_GRID_POINTS as f64 {
            return Err(Error::GridCapExceeded { points: total as usize, cap: MAX_GRID_POINTS });
        }
        Ok(Self { dim, points, halfwidth })
    }

    /// Self-dual grid, `L = sqrt(pi N / 2)`.
    pub fn self_dual(dim: usize, points: usize) -> Result<Self> {
        Self::new(dim, points, (PI * points as f64 / 2.0).sqrt())
    }

    /// Grid on which `F_omega` for `Omega = c J` is an exact lattice map:
    /// `h^2 = 2 pi |c| / N`.
    pub fn adapted(dim: usize, points: usize, c: f64) -> Result<Self> {
        Self::new(dim, points, (PI * c.abs() * points as f64 / 2.0).sqrt())
    }

    /// Same spacing and point count in another dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(dim, self.points, self.halfwidth)
    }

    /// Grid with doubled sampling rate over the same box.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.dim, 2 * self.points, self.halfwidth)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.halfwidth / self.points as f64
    }

    /// Spacing `2 pi / (N h)` of the frequency lattice.
    pub fn dual_spacing(&self) -> f64 {
        2.0 * PI / (self.points as f64 * self.spacing())
    }

    pub fn is_self_dual(&self) -> bool {
        (self.spacing() / self.dual_spacing() - 1.0).abs() < 1e-12
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.points; self.dim]
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn coord(&self, k: usize) -> f64 {
        (k as f64 - (self.points / 2) as f64) * self.spacing()
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.coord(k)).collect()
    }

    /// Multi-index of a flat index.
    pub fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = flat % self.points;
            flat /= self.points;
        }
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim];
        self.unflatten(flat, &mut idx);
        idx.iter().map(|&k| self.coord(k)).collect()
    }

    /// Flat index of the lattice point nearest to `z`, if `z` lies on the lattice.
    pub fn lattice_index(&self, z: &[f64]) -> Option<usize> {
        let h = self.spacing();
        let mut flat = 0;
        for &x in z {
            let t = x / h + (self.points / 2) as f64;
            let k = t.round();
            if (t - k).abs() > 1e-9 || k < 0.0 || k >= self.points as f64 {
                return None;
            }
            flat = flat * self.points + k as usize;
        }
        Some(flat)
    }

    fn same_as(&self, other: &GridSpec) -> bool {
        self.dim == other.dim
            && self.points == other.points
            && (self.halfwidth - other.halfwidth).abs() <= 1e-12 * self.halfwidth
    }
}

/// Complex samples of a function on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl SampledField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let mut idx = vec![0usize; grid.dim()];
        let mut z = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|flat| {
                grid.unflatten(flat, &mut idx);
                for (zi, &k) in z.iter_mut().zip(&idx) {
                    *zi = grid.coord(k);
                }
                f(&z)
            })
            .collect();
        Self { grid, values }
    }

    /// Tensor product `u(x) v(y)` on the grid of dimension `dim(u) + dim(v)`.
    pub fn tensor(u: &SampledField, v: &SampledField) -> Result<Self> {
        if u.grid.points != v.grid.points || (u.grid.halfwidth - v.grid.halfwidth).abs() > 1e-12 * u.grid.halfwidth {
            return Err(Error::GridMismatch);
        }
        let grid = u.grid.with_dim(u.grid.dim + v.grid.dim)?;
        let mut values = Vec::with_capacity(grid.len());
        for a in &u.values {
            for b in &v.values {
                values.push(a * b);
            }
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Quadrature norm `(sum |U|^2 h^d)^{1/2}`.
    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `(self | other) = sum self conj(other) h^d`.
    pub fn inner(&self, other: &SampledField) -> Result<Complex64> {
        self.check_same(other)?;
        let s: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn check_same(&self, other: &SampledField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn add(&self, other: &SampledField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SampledField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn zip_with(&self, other: &SampledField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| f(*v)).collect() }
    }

    /// `||self - other|| / ||other||`.
    pub fn rel_distance(&self, other: &SampledField) -> Result<f64> {
        Ok(self.sub(other)?.norm() / other.norm())
    }

    /// Share of `||U||^2` at points with some coordinate beyond `0.9 L`.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let lim = 0.9 * self.grid.halfwidth;
        let mut idx = vec![0usize; self.grid.dim];
        let (mut outer, mut total) = (0.0, 0.0);
        for (flat, v) in self.values.iter().enumerate() {
            self.grid.unflatten(flat, &mut idx);
            let m = v.norm_sqr();
            total += m;
            if idx.iter().any(|&k| self.grid.coord(k).abs() > lim) {
                outer += m;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            outer / total
        }
    }

    /// True when the boundary mass fraction exceeds [`BOUNDARY_MASS_WARNING`].
    pub fn boundary_warning(&self) -> bool {
        self.boundary_mass_fraction() > BOUNDARY_MASS_WARNING
    }
}

/// `(U | V)` by quadrature.
pub fn inner(u: &SampledField, v: &SampledField) -> Result<Complex64> {
    u.inner(v)
}

/// Direction of a Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Kernel `e^{-i x.xi}`.
    Forward,
    /// Kernel `e^{+i x.xi}`.
    Inverse,
}

/// Unitary Fourier transform `(2 pi)^{-d/2} int e^{-+i x.xi} U(x) dx`, sampled on
/// the same grid. Exact DFT on self-dual grids, direct quadrature otherwise.
pub fn fourier(u: &SampledField, direction: Direction) -> SampledField {
    let grid = *u.grid();
    let inverse = direction == Direction::Inverse;
    if grid.is_self_dual() {
        let mut values = u.values.clone();
        fft::centered_dft(&mut values, &grid.shape(), inverse);
        return SampledField { grid, values };
    }
    let n = grid.points();
    let x = grid.axis();
    let sign = if inverse { 1.0 } else { -1.0 };
    let w = grid.spacing() / (2.0 * PI).sqrt();
    let kernel: Vec<Complex64> = (0..n * n)
        .map(|mk| Complex64::from_polar(w, sign * x[mk / n] * x[mk % n]))
        .collect();
    let mut values = u.values.clone();
    let shape = grid.shape();
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..grid.dim() {
        fft::for_each_line(&shape, axis, |idx| {
            for (m, slot) in line.iter_mut().enumerate() {
                *slot = idx.iter().enumerate().map(|(k, &i)| kernel[m * n + k] * values[i]).sum();
            }
            for (&i, v) in idx.iter().zip(&line) {
                values[i] = *v;
            }
        });
    }
    SampledField { grid, values }
}

/// Samples of the Fourier transform on the dual lattice `(m - N/2) 2 pi / (N h)`.
fn fourier_dual_lattice(u: &SampledField) -> Vec<Complex64> {
    let grid = u.grid();
    let mut values = u.values.clone();
    fft::centered_dft(&mut values, &grid.shape(), false);
    let scale = (grid.spacing() * (grid.points() as f64).sqrt() / (2.0 * PI).sqrt()).powi(grid.dim() as i32);
    for v in values.iter_mut() {
        *v *= scale;
    }
    values
}

fn check_phase_space(a: &SampledField, form: &SymplecticForm) -> Result<()> {
    if a.grid().dim() != form.dim() {
        return Err(Error::DimensionMismatch { expected: form.dim(), got: a.grid().dim() });
    }
    Ok(())
}

/// Symplectic Fourier transform `F_sigma A(z) = (2 pi)^{-n} int e^{-i sigma(z,z')} A(z') dz'`.
pub fn sympl_fourier_sigma(a: &SampledField) -> Result<SampledField> {
    let d = a.grid().dim();
    if d % 2 != 0 {
        return Err(Error::OddDimension(d));
    }
    sympl_fourier_omega(a, &SymplecticForm::standard(d / 2))
}

/// `F_omega A(z) = (2 pi)^{-n} |det Omega|^{-1/2} int e^{-i omega(z,z')} A(z') dz'`
/// with the default resampling tolerance.
pub fn sympl_fourier_omega(a: &SampledField, form: &SymplecticForm) -> Result<SampledField> {
    sympl_fourier_omega_with(a, form, DEFAULT_RESAMPLE_TOL)
}

/// [`sympl_fourier_omega`] with an explicit resampling tolerance; pass
/// `f64::INFINITY` to skip the round-trip error estimate.
///
/// Computed as `U_Omega` (substitution `z -> -Omega^{-1} z` with factor
/// `|det Omega|^{-1/2}`) after the plain transform on the dual lattice. When the
/// substitution maps the grid lattice onto the dual lattice it is an exact
/// index remap.
pub fn sympl_fourier_omega_with(a: &SampledField, form: &SymplecticForm, tolerance: f64) -> Result<SampledField> {
    check_phase_space(a, form)?;
    let grid = *a.grid();
    let spectrum = SampledField { grid, values: fourier_dual_lattice(a) };
    let b = -form.inverse() * (grid.spacing() / grid.dual_spacing());
    let mut out = resample::substitute_index(&spectrum, &b, None, tolerance)?;
    let s = form.det_abs().powf(-0.5);
    out.values.iter_mut().for_each(|v| *v *= s);
    Ok(out)
}

/// `M_f U(z) = |det f|^{1/2} U(f z)` (forward) or `M_f^{-1} U(z) = |det f|^{-1/2} U(f^{-1} z)`.
pub fn pushforward_mf(u: &SampledField, factor: &DarbouxFactor, direction: Direction) -> Result<SampledField> {
    pushforward_mf_with(u, factor, direction, DEFAULT_RESAMPLE_TOL)
}

pub fn pushforward_mf_with(
    u: &SampledField,
    factor: &DarbouxFactor,
    direction: Direction,
    tolerance: f64,
) -> Result<SampledField> {
    let (m, det) = match direction {
        Direction::Forward => (factor.matrix(), factor.det_abs()),
        Direction::Inverse => (factor.inverse(), 1.0 / factor.det_abs()),
    };
    let mut out = substitute(u, m, None, tolerance)?;
    let s = det.sqrt();
    out.values.iter_mut().for_each(|v| *v *= s);
    Ok(out)
}

/// Relative defect of the linear map `m` acting on a lattice.
pub(crate) fn integer_defect(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max((x - x.round()).abs()))
}
