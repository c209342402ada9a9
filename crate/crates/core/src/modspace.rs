//! Modulation-space norms, the Sjöstrand symbol norm, membership in the
//! wavepacket ranges and the capacity certificate for concentrated fields.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SampledField};
use crate::symplectic::{DarbouxFactor, SymplecticForm, WignerEllipsoid};
use crate::wavepacket::{cross_wigner, wavepacket, wavepacket_f, wavepacket_f_adjoint, Window, RANGE_TOL};
use crate::weyl::{phase_weyl_matrix, SymbolSpec};
use nalgebra::DMatrix;
use std::f64::consts::PI;
use std::fmt;

/// Largest points per axis for the `R^4` grid of [`sjostrand_norm`].
pub const SJOSTRAND_CAP: usize = 24;

/// Lebesgue exponent `q` in `[1, inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

/// `(s, q, phi)` for the norm `|v_s W_phi u|_{L^q}`.
#[derive(Debug, Clone)]
pub struct ModNormParams {
    s: f64,
    q: Exponent,
    window: Window,
}

impl ModNormParams {
    pub fn new(s: f64, q: Exponent, window: Window) -> Result<Self> {
        if !(s >= 0.0) {
            return Err(Error::InvalidParameter(format!("weight exponent s = {s} must be >= 0")));
        }
        if let Exponent::Finite(q) = q {
            if !(q >= 1.0) || !q.is_finite() {
                return Err(Error::InvalidParameter(format!("q = {q} must be >= 1")));
            }
        }
        Ok(Self { s, q, window })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn q(&self) -> Exponent {
        self.q
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn with_window(&self, window: Window) -> Self {
        Self { window, ..self.clone() }
    }
}

/// `v_s(z) = (1 + |z|^2)^{s/2}`.
pub fn weight(s: f64, z: &[f64]) -> f64 {
    (1.0 + z.iter().map(|x| x * x).sum::<f64>()).powf(s / 2.0)
}

/// `C_{s,f} = (1 + |f|^2)^{s/2}` with the operator 2-norm, so `v_s(f z) <= C_{s,f} v_s(z)`.
pub fn weight_constant(s: f64, f: &DMatrix<f64>) -> f64 {
    let norm = f.clone().singular_values().max();
    (1.0 + norm * norm).powf(s / 2.0)
}

/// Weighted `L^q` norm of a phase-space field.
pub fn weighted_lq(big_u: &SampledField, s: f64, q: Exponent) -> f64 {
    let g = big_u.grid();
    let it = big_u.values().iter().enumerate().map(|(k, v)| v.norm() * weight(s, &g.point(k)));
    match q {
        Exponent::Infinity => it.fold(0.0, f64::max),
        Exponent::Finite(q) => (it.map(|x| x.powf(q)).sum::<f64>() * g.cell_volume()).powf(1.0 / q),
    }
}

/// `(int |W_phi u(z)|^q v_s(z)^q dz)^{1/q}`; the grid sup for `q = inf`.
pub fn mod_norm(u: &SampledField, p: &ModNormParams) -> Result<f64> {
    Ok(weighted_lq(&wavepacket(&p.window, u)?, p.s, p.q))
}

/// Extreme ratios `mod_norm(u; p2) / mod_norm(u; p1)` over a test set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceReport {
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl EquivalenceReport {
    /// Smallest `C` with every ratio in `[1/C, C]`.
    pub fn constant(&self) -> f64 {
        self.max_ratio.max(1.0 / self.min_ratio)
    }
}

pub fn window_equivalence(testset: &[SampledField], p1: &ModNormParams, p2: &ModNormParams) -> Result<EquivalenceReport> {
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = 0.0f64;
    for u in testset {
        let r = mod_norm(u, p2)? / mod_norm(u, p1)?;
        min_ratio = min_ratio.min(r);
        max_ratio = max_ratio.max(r);
    }
    Ok(EquivalenceReport { min_ratio, max_ratio })
}

/// `int sup_z |W(a, Phi)(z, zeta) v_s(z)| d zeta` for a symbol on `R^2`, with
/// `a` sampled on the window's grid and the cross-Wigner transform taken on `R^4`.
pub fn sjostrand_norm(a: &SymbolSpec, phi: &Window, s: f64) -> Result<f64> {
    let grid = *phi.grid();
    if grid.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: grid.dim() });
    }
    if grid.points() > SJOSTRAND_CAP {
        return Err(Error::GridCapExceeded { points: grid.points(), cap: SJOSTRAND_CAP });
    }
    let w = cross_wigner(&a.sample(grid)?, phi.field())?;
    let block = grid.len();
    let mut sup = vec![0.0f64; block];
    for (zflat, chunk) in w.values().chunks(block).enumerate() {
        let vz = weight(s, &grid.point(zflat));
        for (m, v) in sup.iter_mut().zip(chunk) {
            *m = m.max(v.norm() * vz);
        }
    }
    Ok(sup.iter().sum::<f64>() * grid.cell_volume())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SjostrandInvarianceReport {
    pub norm: f64,
    /// Norm of `a o f` with the window `Phi o f`.
    pub transformed_norm: f64,
}

impl SjostrandInvarianceReport {
    /// Empirical `C` in `|a o f| <= C |a|`.
    pub fn ratio(&self) -> f64 {
        self.transformed_norm / self.norm
    }

    pub fn finite_together(&self) -> bool {
        self.norm.is_finite() == self.transformed_norm.is_finite()
    }
}

/// Compares [`sjostrand_norm`] of `a` under `Phi` with that of `a o f` under
/// `Phi o f`; the window is given in closed form so that both are sampled exactly.
pub fn sjostrand_invariance_check(a: &SymbolSpec, f: &DMatrix<f64>, window: &SymbolSpec, grid: GridSpec, s: f64) -> Result<SjostrandInvarianceReport> {
    if f.clone().try_inverse().is_none() {
        return Err(Error::Singular);
    }
    let phi = Window::new(window.sample(grid)?, true)?;
    let scale = phi.field().norm() / window.sample(grid)?.norm();
    let phi_f = Window::new(window.compose_linear(f)?.sample(grid)?.scale_real(scale), false)?;
    Ok(SjostrandInvarianceReport { norm: sjostrand_norm(a, &phi, s)?, transformed_norm: sjostrand_norm(&a.compose_linear(f)?, &phi_f, s)? })
}

#[derive(Debug, Clone)]
pub struct MembershipReport {
    /// `|W_{f,phi} W_{f,phi}^* U - U| / |U|`.
    pub residual: f64,
    /// `u = W_{f,phi}^* U = W_phi^* M_f U`.
    pub pulled_back: SampledField,
    pub pulled_back_norm: f64,
    pub member: bool,
}

/// Tests whether `U` lies in the range of `W_{f,phi}` and measures `W_{f,phi}^* U` in `M_s^q`.
pub fn range_membership(big_u: &SampledField, factor: &DarbouxFactor, phi: &Window, p: &ModNormParams) -> Result<MembershipReport> {
    let u = wavepacket_f_adjoint(factor, phi, big_u)?;
    let back = wavepacket_f(factor, phi, &u)?;
    let norm = big_u.norm();
    let residual = if norm == 0.0 { 0.0 } else { back.sub(big_u)?.norm() / norm };
    let pulled_back_norm = mod_norm(&u, p)?;
    let member = residual <= RANGE_TOL && pulled_back_norm.is_finite();
    Ok(MembershipReport { residual, pulled_back: u, pulled_back_norm, member })
}

#[derive(Debug, Clone)]
pub struct PropregReport {
    /// `|A~ U|_{L^q_{f,phi}} / |U|_{L^q_{f,phi}}` per test field.
    pub ratios: Vec<f64>,
    /// Range residual of each output.
    pub output_residuals: Vec<f64>,
    pub membership_preserved: bool,
}

impl PropregReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().cloned().fold(0.0, f64::max)
    }
}

/// Applies `A~_omega` to members of the range and re-tests membership of the outputs.
pub fn propreg_check(
    a: &SymbolSpec,
    form: &SymplecticForm,
    factor: &DarbouxFactor,
    phi: &Window,
    p: &ModNormParams,
    testset: &[SampledField],
) -> Result<PropregReport> {
    let Some(first) = testset.first() else {
        return Err(Error::InvalidParameter("empty test set".into()));
    };
    let op = phase_weyl_matrix(a, form, first.grid())?;
    let mut ratios = Vec::with_capacity(testset.len());
    let mut output_residuals = Vec::with_capacity(testset.len());
    let mut membership_preserved = true;
    for big_u in testset {
        let input = range_membership(big_u, factor, phi, p)?;
        if !input.member {
            return Err(Error::NotInRange { residual: input.residual });
        }
        let output = range_membership(&op.apply(big_u)?, factor, phi, p)?;
        membership_preserved &= output.member;
        ratios.push(output.pulled_back_norm / input.pulled_back_norm);
        output_residuals.push(output.residual);
    }
    Ok(PropregReport { ratios, output_residuals, membership_preserved })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The envelope is tighter than any wavepacket range allows.
    Violates,
    /// No obstruction detected; this is a necessary condition only.
    Consistent,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Violates => "VIOLATES",
            Verdict::Consistent => "CONSISTENT",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationReport {
    pub capacity: f64,
    /// Fitted `C` in `|U(z)| <= C e^{-M z.z}`.
    pub envelope: f64,
    pub verdict: Verdict,
}

/// Values below this fraction of `max |U|` are treated as round-off when the envelope is checked.
pub const ENVELOPE_FLOOR: f64 = 1e-12;

/// Relative slack of the on-grid envelope check.
pub const ENVELOPE_SLACK: f64 = 1e-6;

/// Capacity test for a field with a sub-Gaussian envelope `C e^{-M z.z}`.
///
/// `C` is the largest ratio `|U| / e^{-M z.z}` over the central half-box; the
/// envelope must then hold on the rest of the grid outside the outer quarter
/// shell, where periodization of the transforms is felt.
pub fn concentration_certificate(big_u: &SampledField, m: &WignerEllipsoid) -> Result<ConcentrationReport> {
    let g = big_u.grid();
    if m.matrix().nrows() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), got: m.matrix().nrows() });
    }
    let half = g.halfwidth();
    let quad = |z: &[f64]| {
        let v = nalgebra::DVector::from_column_slice(z);
        v.dot(&(m.matrix() * &v))
    };
    let floor = ENVELOPE_FLOOR * big_u.max_abs();
    let mut envelope = 0.0f64;
    for (k, v) in big_u.values().iter().enumerate() {
        let z = g.point(k);
        if z.iter().all(|x| x.abs() <= half / 2.0) {
            envelope = envelope.max(v.norm() * quad(&z).exp());
        }
    }
    let mut violations = 0;
    for (k, v) in big_u.values().iter().enumerate() {
        let z = g.point(k);
        if v.norm() > floor && z.iter().all(|x| x.abs() <= 0.75 * half) && v.norm() > envelope * (-quad(&z)).exp() * (1.0 + ENVELOPE_SLACK) {
            violations += 1;
        }
    }
    if violations > 0 {
        return Err(Error::BoundNotSatisfied { violations });
    }
    let capacity = m.capacity();
    let verdict = if capacity < PI * (1.0 - 1e-9) { Verdict::Violates } else { Verdict::Consistent };
    Ok(ConcentrationReport { capacity, envelope, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_at_origin_and_growth() {
        assert_eq!(weight(3.0, &[0.0, 0.0]), 1.0);
        assert!((weight(2.0, &[1.0, 2.0]) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn parameter_validation() {
        let w = Window::gaussian(GridSpec::self_dual(1, 8).unwrap()).unwrap();
        assert!(ModNormParams::new(-1.0, Exponent::Finite(2.0), w.clone()).is_err());
        assert!(ModNormParams::new(0.0, Exponent::Finite(0.5), w.clone()).is_err());
        assert!(ModNormParams::new(1.0, Exponent::Infinity, w).is_ok());
    }

    #[test]
    fn verdict_labels() {
        assert_eq!(Verdict::Violates.to_string(), "VIOLATES");
        assert_eq!(Verdict::Consistent.to_string(), "CONSISTENT");
    }
}
