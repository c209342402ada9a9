//! FFT plumbing on row-major multidimensional arrays.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;
use std::f64::consts::PI;

/// Calls `f` with the flat indices of every line along `axis`.
pub(crate) fn for_each_line(shape: &[usize], axis: usize, mut f: impl FnMut(&[usize])) {
    let len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut idx = vec![0usize; len];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * len * inner + i;
            for (k, slot) in idx.iter_mut().enumerate() {
                *slot = base + k * inner;
            }
            f(&idx);
        }
    }
}

/// Unnormalized FFT along one axis (`e^{-2 pi i jk/N}` forward, `e^{+...}` inverse).
pub(crate) fn fft_axis(data: &mut [Complex64], shape: &[usize], axis: usize, inverse: bool) {
    let n = shape[axis];
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    for_each_line(shape, axis, |idx| {
        for (b, &i) in buf.iter_mut().zip(idx) {
            *b = data[i];
        }
        plan.process_with_scratch(&mut buf, &mut scratch);
        for (b, &i) in buf.iter().zip(idx) {
            data[i] = *b;
        }
    });
}

/// Unnormalized multidimensional FFT with plans built once.
pub(crate) struct FftNd {
    shape: Vec<usize>,
    plans: Vec<Arc<dyn Fft<f64>>>,
    scratch: Vec<Complex64>,
    buf: Vec<Complex64>,
}

impl FftNd {
    pub(crate) fn new(shape: &[usize], inverse: bool) -> Self {
        let mut planner = FftPlanner::new();
        let plans: Vec<Arc<dyn Fft<f64>>> = shape
            .iter()
            .map(|&n| if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) })
            .collect();
        let scratch_len = plans.iter().map(|p| p.get_inplace_scratch_len()).max().unwrap_or(0);
        let longest = shape.iter().copied().max().unwrap_or(0);
        Self {
            shape: shape.to_vec(),
            plans,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            buf: vec![Complex64::new(0.0, 0.0); longest],
        }
    }

    pub(crate) fn process(&mut self, data: &mut [Complex64]) {
        let Self { shape, plans, scratch, buf } = self;
        for (axis, plan) in plans.iter().enumerate() {
            let n = shape[axis];
            let line = &mut buf[..n];
            for_each_line(shape, axis, |idx| {
                for (b, &i) in line.iter_mut().zip(idx) {
                    *b = data[i];
                }
                plan.process_with_scratch(line, scratch);
                for (b, &i) in line.iter().zip(idx) {
                    data[i] = *b;
                }
            });
        }
    }
}

/// Unitary centered DFT along one axis:
/// `out[m] = N^{-1/2} sum_k exp(-+ 2 pi i (m - N/2)(k - N/2) / N) in[k]`.
pub(crate) fn centered_dft_axis(data: &mut [Complex64], shape: &[usize], axis: usize, inverse: bool) {
    let n = shape[axis];
    debug_assert!(n % 2 == 0);
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    let global = sign(n / 2) / (n as f64).sqrt();
    for_each_line(shape, axis, |idx| {
        for (k, &i) in idx.iter().enumerate() {
            data[i] *= sign(k);
        }
    });
    fft_axis(data, shape, axis, inverse);
    for_each_line(shape, axis, |idx| {
        for (m, &i) in idx.iter().enumerate() {
            data[i] *= sign(m) * global;
        }
    });
}

pub(crate) fn centered_dft(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    for axis in 0..shape.len() {
        centered_dft_axis(data, shape, axis, inverse);
    }
}

/// Periodic interpolation kernel for even `n` with the Nyquist term split
/// symmetrically: `sin(pi u) / (n tan(pi u / n))`.
pub(crate) fn dirichlet(u: f64, n: usize) -> f64 {
    let nf = n as f64;
    let r = u - (u / nf).round() * nf;
    if r.abs() < 1e-13 {
        return 1.0;
    }
    let s = (PI * r).sin();
    if s.abs() < 1e-15 {
        return 0.0;
    }
    s / (nf * (PI * r / nf).tan())
}

/// Replaces every line along `axis` by its trigonometric interpolant
/// evaluated half a sample to the right.
pub(crate) fn half_shift_axis(data: &mut [Complex64], shape: &[usize], axis: usize) {
    half_shift_axis_nyquist(data, shape, axis, 0.0);
}

/// Half-step shift where the Nyquist bin is read as frequency `sign * N/2`
/// (`sign = 0` drops it, the real-symmetric choice).
pub(crate) fn half_shift_axis_nyquist(data: &mut [Complex64], shape: &[usize], axis: usize, sign: f64) {
    let n = shape[axis];
    fft_axis(data, shape, axis, false);
    let phases: Vec<Complex64> = (0..n)
        .map(|k| {
            if 2 * k == n {
                Complex64::new(0.0, sign / n as f64)
            } else {
                let kk = if 2 * k < n { k as f64 } else { k as f64 - n as f64 };
                Complex64::from_polar(1.0 / n as f64, PI * kk / n as f64)
            }
        })
        .collect();
    for_each_line(shape, axis, |idx| {
        for (k, &i) in idx.iter().enumerate() {
            data[i] *= phases[k];
        }
    });
    fft_axis(data, shape, axis, true);
}

/// Doubles the sampling rate along every axis by trigonometric interpolation.
/// Sample `r` of the output sits at input position `r / 2`.
pub(crate) fn upsample2(data: &[Complex64], shape: &[usize]) -> (Vec<Complex64>, Vec<usize>) {
    let mut cur = data.to_vec();
    let mut cur_shape = shape.to_vec();
    for axis in 0..shape.len() {
        let mut shifted = cur.clone();
        half_shift_axis(&mut shifted, &cur_shape, axis);
        let mut next_shape = cur_shape.clone();
        next_shape[axis] *= 2;
        let mut next = vec![Complex64::new(0.0, 0.0); cur.len() * 2];
        let n = cur_shape[axis];
        let inner: usize = cur_shape[axis + 1..].iter().product();
        let outer: usize = cur_shape[..axis].iter().product();
        for o in 0..outer {
            for k in 0..n {
                for i in 0..inner {
                    let src = (o * n + k) * inner + i;
                    next[(o * 2 * n + 2 * k) * inner + i] = cur[src];
                    next[(o * 2 * n + 2 * k + 1) * inner + i] = shifted[src];
                }
            }
        }
        cur = next;
        cur_shape = next_shape;
    }
    (cur, cur_shape)
}

/// Adjoint of [`upsample2`] with respect to the plain (unweighted) inner product.
pub(crate) fn upsample2_adjoint(data: &[Complex64], shape_fine: &[usize]) -> Vec<Complex64> {
    let mut cur = data.to_vec();
    let mut cur_shape = shape_fine.to_vec();
    for axis in 0..shape_fine.len() {
        let n = cur_shape[axis] / 2;
        let inner: usize = cur_shape[axis + 1..].iter().product();
        let outer: usize = cur_shape[..axis].iter().product();
        let mut coarse_shape = cur_shape.clone();
        coarse_shape[axis] = n;
        let len = outer * n * inner;
        let mut even = vec![Complex64::new(0.0, 0.0); len];
        let mut odd = vec![Complex64::new(0.0, 0.0); len];
        for o in 0..outer {
            for k in 0..n {
                for i in 0..inner {
                    let dst = (o * n + k) * inner + i;
                    even[dst] = cur[(o * 2 * n + 2 * k) * inner + i];
                    odd[dst] = cur[(o * 2 * n + 2 * k + 1) * inner + i];
                }
            }
        }
        // The half shift is a real symmetric-kernel circulant; its adjoint is the shift by -1/2.
        reverse_axis(&mut odd, &coarse_shape, axis);
        half_shift_axis(&mut odd, &coarse_shape, axis);
        reverse_axis(&mut odd, &coarse_shape, axis);
        for (e, o) in even.iter_mut().zip(&odd) {
            *e += *o;
        }
        cur = even;
        cur_shape = coarse_shape;
    }
    cur
}

/// Maps index `k` to `n - 1 - k` along `axis`.
fn reverse_axis(data: &mut [Complex64], shape: &[usize], axis: usize) {
    for_each_line(shape, axis, |idx| {
        let n = idx.len();
        for k in 0..n / 2 {
            data.swap(idx[k], idx[n - 1 - k]);
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn centered_dft_is_unitary_and_inverts() {
        let shape = [8usize, 6];
        let data: Vec<Complex64> = (0..48).map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
        let mut d = data.clone();
        centered_dft(&mut d, &shape, false);
        let n0: f64 = data.iter().map(|z| z.norm_sqr()).sum();
        let n1: f64 = d.iter().map(|z| z.norm_sqr()).sum();
        assert!((n0 - n1).abs() < 1e-12 * n0);
        centered_dft(&mut d, &shape, true);
        for (a, b) in d.iter().zip(&data) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn centered_dft_matches_direct_sum() {
        let n = 8;
        let data: Vec<Complex64> = (0..n).map(|k| c((k * k) as f64 - 3.0)).collect();
        let mut d = data.clone();
        centered_dft(&mut d, &[n], false);
        for m in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..n {
                let ph = -2.0 * PI * (m as f64 - 4.0) * (k as f64 - 4.0) / n as f64;
                s += data[k] * Complex64::from_polar(1.0, ph);
            }
            assert!((s / (n as f64).sqrt() - d[m]).norm() < 1e-12);
        }
    }

    #[test]
    fn half_shift_matches_dirichlet_kernel() {
        let n = 10;
        let data: Vec<Complex64> = (0..n).map(|k| Complex64::new((k as f64 * 0.7).cos(), k as f64 * 0.1)).collect();
        let mut d = data.clone();
        half_shift_axis(&mut d, &[n], 0);
        for m in 0..n {
            let direct: Complex64 = (0..n).map(|k| data[k] * dirichlet(m as f64 + 0.5 - k as f64, n)).sum();
            assert!((direct - d[m]).norm() < 1e-12, "{m}");
        }
    }

    #[test]
    fn upsample_adjoint_pairs() {
        let shape = [6usize, 4];
        let u: Vec<Complex64> = (0..24).map(|k| Complex64::new((k as f64).cos(), (k as f64 * 1.3).sin())).collect();
        let v: Vec<Complex64> = (0..96).map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
        let (up, fine) = upsample2(&u, &shape);
        assert_eq!(fine, vec![12, 8]);
        let lhs: Complex64 = up.iter().zip(&v).map(|(a, b)| a * b.conj()).sum();
        let adj = upsample2_adjoint(&v, &fine);
        let rhs: Complex64 = u.iter().zip(&adj).map(|(a, b)| a * b.conj()).sum();
        assert!((lhs - rhs).norm() < 1e-12);
        for (k, x) in u.iter().enumerate() {
            let (i, j) = (k / 4, k % 4);
            assert!((up[(2 * i) * 8 + 2 * j] - x).norm() < 1e-13);
        }
    }
}

