//! Linear substitutions `g(t) = f(B t + c)` on a cubic lattice.
//!
//! Coordinates are centered index units (`t = k - N/2`). Integer maps are exact
//! remaps; anything else is split as `B = P^T L D U` and applied as a chain of
//! one-axis trigonometric interpolations. Positions outside `[-N/2, N/2]` read
//! zero; `N/2` is identified with `-N/2`.

use super::{integer_defect, SampledField};
use crate::error::{Error, Result};
use crate::fft::{dirichlet, for_each_line};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

const INTEGER_TOL: f64 = 1e-9;

/// `g(z) = u(M z + c)` on the grid of `u`, in physical coordinates.
///
/// With a finite `tolerance` an off-lattice substitution is followed by the
/// inverse substitution; if the round trip misses `u` by more than `tolerance`
/// (relative) the call fails with [`Error::ResampleInaccurate`].
pub fn substitute(u: &SampledField, m: &DMatrix<f64>, offset: Option<&[f64]>, tolerance: f64) -> Result<SampledField> {
    let d = u.grid().dim();
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: m.nrows() });
    }
    let h = u.grid().spacing();
    let c: Option<Vec<f64>> = match offset {
        Some(o) if o.len() != d => return Err(Error::DimensionMismatch { expected: d, got: o.len() }),
        Some(o) => Some(o.iter().map(|x| x / h).collect()),
        None => None,
    };
    substitute_index(u, m, c.as_deref(), tolerance)
}

/// Same as [`substitute`] with `B` and `c` in index units.
pub(crate) fn substitute_index(
    u: &SampledField,
    b: &DMatrix<f64>,
    c: Option<&[f64]>,
    tolerance: f64,
) -> Result<SampledField> {
    let d = u.grid().dim();
    let zero = vec![0.0; d];
    let c = c.unwrap_or(&zero);
    let exact = integer_defect(b) < INTEGER_TOL && c.iter().all(|x| (x - x.round()).abs() < INTEGER_TOL);
    if exact {
        return Ok(exact_remap(u, b, c));
    }
    let out = interpolate(u, b, c)?;
    if tolerance.is_finite() {
        let b_inv = b.clone().try_inverse().ok_or(Error::Singular)?;
        let back_c: Vec<f64> = (-(&b_inv * DVector::from_column_slice(c))).iter().copied().collect();
        let back = interpolate(&out, &b_inv, &back_c)?;
        let nu = u.norm();
        let estimate = if nu == 0.0 { 0.0 } else { back.sub(u)?.norm() / nu };
        if estimate > tolerance {
            return Err(Error::ResampleInaccurate { estimate, tolerance });
        }
    }
    Ok(out)
}

fn wrap_index(s: i64, n: usize) -> Option<usize> {
    let half = (n / 2) as i64;
    if s == half {
        Some(0)
    } else if s < -half || s > half {
        None
    } else {
        Some((s + half) as usize)
    }
}

fn exact_remap(u: &SampledField, b: &DMatrix<f64>, c: &[f64]) -> SampledField {
    let grid = *u.grid();
    let d = grid.dim();
    let n = grid.points();
    let half = (n / 2) as i64;
    let bi: Vec<i64> = b.iter().map(|x| x.round() as i64).collect();
    let ci: Vec<i64> = c.iter().map(|x| x.round() as i64).collect();
    let mut idx = vec![0usize; d];
    let mut src = vec![0usize; d];
    let values = (0..grid.len())
        .map(|flat| {
            grid.unflatten(flat, &mut idx);
            for (r, slot) in src.iter_mut().enumerate() {
                let mut s = ci[r];
                for (col, &k) in idx.iter().enumerate() {
                    // nalgebra storage is column-major
                    s += bi[r + col * d] * (k as i64 - half);
                }
                match wrap_index(s, n) {
                    Some(v) => *slot = v,
                    None => return Complex64::new(0.0, 0.0),
                }
            }
            u.values()[grid.flatten(&src)]
        })
        .collect();
    SampledField::new(grid, values).expect("same grid")
}

/// One stage `g(t) = f(t with t_a -> scale t_a + sum_b coef_b t_b + off)`.
struct AxisMap {
    axis: usize,
    scale: f64,
    coef: Vec<f64>,
    off: f64,
}

impl AxisMap {
    fn is_identity(&self) -> bool {
        self.scale == 1.0 && self.off == 0.0 && self.coef.iter().all(|&x| x == 0.0)
    }
}

fn apply_axis_map(values: &[Complex64], n: usize, d: usize, map: &AxisMap) -> Vec<Complex64> {
    let shape = vec![n; d];
    let half = (n / 2) as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut multi = vec![0usize; d];
    for_each_line(&shape, map.axis, |idx| {
        let mut rest = idx[0];
        for a in (0..d).rev() {
            multi[a] = rest % n;
            rest /= n;
        }
        let base: f64 = (0..d)
            .filter(|&b| b != map.axis)
            .map(|b| map.coef[b] * (multi[b] as f64 - half))
            .sum::<f64>()
            + map.off;
        for (slot, &i) in line.iter_mut().zip(idx) {
            *slot = values[i];
        }
        for (k, &i) in idx.iter().enumerate() {
            let q = map.scale * (k as f64 - half) + base;
            if q < -half - INTEGER_TOL || q > half + INTEGER_TOL {
                continue;
            }
            let qr = q.round();
            out[i] = if (q - qr).abs() < 1e-12 {
                let j = if qr as i64 == n as i64 / 2 { 0 } else { (qr + half) as usize };
                line[j]
            } else {
                line.iter().enumerate().map(|(j, v)| v * dirichlet(q - (j as f64 - half), n)).sum()
            };
        }
    });
    out
}

/// `P B = L U` with partial pivoting; returns the row permutation, unit lower `L`
/// and upper `U`.
fn lu_pivot(b: &DMatrix<f64>) -> Result<(Vec<usize>, DMatrix<f64>, DMatrix<f64>)> {
    let d = b.nrows();
    let mut u = b.clone();
    let mut l = DMatrix::identity(d, d);
    let mut perm: Vec<usize> = (0..d).collect();
    for k in 0..d {
        let p = (k..d)
            .max_by(|&i, &j| u[(i, k)].abs().total_cmp(&u[(j, k)].abs()))
            .expect("non-empty range");
        if u[(p, k)].abs() < 1e-300 {
            return Err(Error::Singular);
        }
        if p != k {
            u.swap_rows(p, k);
            perm.swap(p, k);
            for j in 0..k {
                let t = l[(p, j)];
                l[(p, j)] = l[(k, j)];
                l[(k, j)] = t;
            }
        }
        for i in k + 1..d {
            let f = u[(i, k)] / u[(k, k)];
            l[(i, k)] = f;
            for j in k..d {
                u[(i, j)] -= f * u[(k, j)];
            }
        }
    }
    Ok((perm, l, u))
}

fn interpolate(u: &SampledField, b: &DMatrix<f64>, c: &[f64]) -> Result<SampledField> {
    let grid = *u.grid();
    let d = grid.dim();
    let n = grid.points();
    let mut values = u.values().to_vec();

    // f0 = f o (y -> y + c)
    for (a, &off) in c.iter().enumerate() {
        let map = AxisMap { axis: a, scale: 1.0, coef: vec![0.0; d], off };
        if !map.is_identity() {
            values = apply_axis_map(&values, n, d, &map);
        }
    }

    // B = P^T L D U, so f o B = (((f o P^T) o L) o D) o U.
    let (perm, l, upper) = lu_pivot(b)?;
    let mut p_t = DMatrix::zeros(d, d);
    for (row, &src) in perm.iter().enumerate() {
        // (P B)_row = B_src, so (P^T y)_src = y_row
        p_t[(src, row)] = 1.0;
    }
    if perm.iter().enumerate().any(|(i, &p)| i != p) {
        let f = SampledField::new(grid, values)?;
        values = exact_remap(&f, &p_t, &vec![0.0; d]).into_values();
    }
    for a in 0..d {
        let coef: Vec<f64> = (0..d).map(|bb| if bb < a { l[(a, bb)] } else { 0.0 }).collect();
        let map = AxisMap { axis: a, scale: 1.0, coef, off: 0.0 };
        if !map.is_identity() {
            values = apply_axis_map(&values, n, d, &map);
        }
    }
    for a in 0..d {
        let map = AxisMap { axis: a, scale: upper[(a, a)], coef: vec![0.0; d], off: 0.0 };
        if !map.is_identity() {
            values = apply_axis_map(&values, n, d, &map);
        }
    }
    for a in (0..d).rev() {
        let coef: Vec<f64> = (0..d).map(|bb| if bb > a { upper[(a, bb)] / upper[(a, a)] } else { 0.0 }).collect();
        let map = AxisMap { axis: a, scale: 1.0, coef, off: 0.0 };
        if !map.is_identity() {
            values = apply_axis_map(&values, n, d, &map);
        }
    }
    SampledField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::symplectic::rotation;

    fn blob(g: GridSpec) -> SampledField {
        SampledField::from_fn(g, |z| {
            let r2: f64 = z.iter().enumerate().map(|(i, x)| (x - 0.3 * i as f64).powi(2)).sum();
            Complex64::new((-r2 / 2.0).exp(), 0.2 * z[0] * (-r2 / 2.0).exp())
        })
    }

    #[test]
    fn lu_reconstructs() {
        let b = DMatrix::from_row_slice(3, 3, &[0.1, 2.0, -1.0, 3.0, 0.5, 0.2, -0.7, 1.1, 2.2]);
        let (perm, l, u) = lu_pivot(&b).unwrap();
        let mut pb = b.clone();
        for (row, &src) in perm.iter().enumerate() {
            pb.set_row(row, &b.row(src));
        }
        assert!((pb - l * u).abs().max() < 1e-14);
    }

    #[test]
    fn rotation_matches_closed_form() {
        let g = GridSpec::self_dual(2, 64).unwrap();
        let u = blob(g);
        let r = rotation(0.3);
        let out = substitute(&u, &r, None, 1e-6).unwrap();
        let expect = SampledField::from_fn(g, |z| {
            let w = [r[(0, 0)] * z[0] + r[(0, 1)] * z[1], r[(1, 0)] * z[0] + r[(1, 1)] * z[1]];
            let r2 = w[0] * w[0] + (w[1] - 0.3).powi(2);
            Complex64::new((-r2 / 2.0).exp(), 0.2 * w[0] * (-r2 / 2.0).exp())
        });
        assert!(out.rel_distance(&expect).unwrap() < 1e-9);
    }

    #[test]
    fn general_map_with_offset_in_three_dims() {
        let g = GridSpec::self_dual(3, 32).unwrap();
        let u = blob(g);
        let b = DMatrix::from_row_slice(3, 3, &[0.2, 1.0, 0.1, 0.9, -0.1, 0.3, 0.0, 0.25, 1.1]);
        let off = [0.17, -0.4, 0.05];
        let out = substitute(&u, &b, Some(&off), f64::INFINITY).unwrap();
        let expect = SampledField::from_fn(g, |z| {
            let w: Vec<f64> = (0..3).map(|i| (0..3).map(|j| b[(i, j)] * z[j]).sum::<f64>() + off[i]).collect();
            let r2: f64 = w.iter().enumerate().map(|(i, x)| (x - 0.3 * i as f64).powi(2)).sum();
            Complex64::new((-r2 / 2.0).exp(), 0.2 * w[0] * (-r2 / 2.0).exp())
        });
        let err = out.rel_distance(&expect).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn integer_maps_are_exact_and_zero_extended() {
        let g = GridSpec::self_dual(1, 16).unwrap();
        let u = SampledField::from_fn(g, |z| Complex64::new(z[0], 1.0));
        let two = DMatrix::from_element(1, 1, 2.0);
        let out = substitute(&u, &two, None, 1e-6).unwrap();
        for k in 0..16 {
            let x = g.coord(k);
            let expect = if (2.0 * x).abs() <= g.halfwidth() + 1e-12 {
                if (2.0 * x - g.halfwidth()).abs() < 1e-12 { Complex64::new(-g.halfwidth(), 1.0) } else { Complex64::new(2.0 * x, 1.0) }
            } else {
                Complex64::new(0.0, 0.0)
            };
            assert!((out.values()[k] - expect).norm() < 1e-14, "{k}");
        }
    }

    #[test]
    fn inaccurate_resampling_is_reported() {
        let g = GridSpec::self_dual(1, 16).unwrap();
        let u = SampledField::from_fn(g, |_| Complex64::new(1.0, 0.0));
        let half = DMatrix::from_element(1, 1, 0.37);
        assert!(matches!(substitute(&u, &half, None, 1e-6), Err(Error::ResampleInaccurate { .. })));
    }
}
