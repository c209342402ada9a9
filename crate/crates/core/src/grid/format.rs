//! `PSWC` binary arrays and CSV slices.
//!
//! Layout: `b"PSWC"`, `u16` version, `u16` rank, `rank` x `u64` axis lengths,
//! then the row-major values as little-endian `f64` pairs `(re, im)`.

use super::SampledField;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::io::{self, BufRead, Read, Write};

pub const MAGIC: &[u8; 4] = b"PSWC";
pub const VERSION: u16 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("shape {shape:?} holds {expected} values, got {got}")]
    SizeMismatch { shape: Vec<usize>, expected: usize, got: usize },
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// A shaped complex array as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub shape: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl Array {
    pub fn new(shape: Vec<usize>, values: Vec<Complex64>) -> Result<Self, FormatError> {
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(FormatError::SizeMismatch { shape, expected, got: values.len() });
        }
        Ok(Self { shape, values })
    }

    pub fn from_field(u: &SampledField) -> Self {
        Self { shape: u.grid().shape(), values: u.values().to_vec() }
    }

    /// Row-major rank-2 array from a complex matrix.
    pub fn from_matrix(m: &DMatrix<Complex64>) -> Self {
        let values = (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)])).collect();
        Self { shape: vec![m.nrows(), m.ncols()], values }
    }
}

pub fn write_array<W: Write>(mut w: W, a: &Array) -> Result<(), FormatError> {
    let expected: usize = a.shape.iter().product();
    if expected != a.values.len() {
        return Err(FormatError::SizeMismatch { shape: a.shape.clone(), expected, got: a.values.len() });
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(a.shape.len() as u16).to_le_bytes())?;
    for &n in &a.shape {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(16 * a.values.len());
    for z in &a.values {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_array<R: Read>(mut r: R) -> Result<Array, FormatError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let mut b2 = [0u8; 2];
    r.read_exact(&mut b2)?;
    let version = u16::from_le_bytes(b2);
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    r.read_exact(&mut b2)?;
    let rank = u16::from_le_bytes(b2) as usize;
    let mut shape = Vec::with_capacity(rank);
    let mut b8 = [0u8; 8];
    for _ in 0..rank {
        r.read_exact(&mut b8)?;
        shape.push(u64::from_le_bytes(b8) as usize);
    }
    let count: usize = shape.iter().product();
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    if raw.len() != 16 * count {
        return Err(FormatError::SizeMismatch { shape, expected: count, got: raw.len() / 16 });
    }
    let values = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    Ok(Array { shape, values })
}

/// CSV slice of a field through the point with indices `fixed`, varying one or
/// two axes. Columns are the free coordinates followed by `re,im`.
pub fn write_slice_csv<W: Write>(
    mut w: W,
    u: &SampledField,
    free: &[usize],
    fixed: &[usize],
) -> Result<(), FormatError> {
    let g = u.grid();
    let d = g.dim();
    let bad = |msg: &str| FormatError::Csv { line: 0, msg: msg.to_string() };
    if free.is_empty() || free.len() > 2 || free.iter().any(|&a| a >= d) {
        return Err(bad("one or two valid free axes required"));
    }
    if fixed.len() != d || fixed.iter().any(|&k| k >= g.points()) {
        return Err(bad("fixed index must name a grid point"));
    }
    let names = ["x", "y"];
    let header: Vec<&str> = names[..free.len()].iter().copied().chain(["re", "im"]).collect();
    writeln!(w, "{}", header.join(","))?;
    let mut idx = fixed.to_vec();
    let n = g.points();
    let outer = if free.len() == 2 { n } else { 1 };
    for i in 0..outer {
        for j in 0..n {
            if free.len() == 2 {
                idx[free[0]] = i;
                idx[free[1]] = j;
            } else {
                idx[free[0]] = j;
            }
            let z = u.values()[g.flatten(&idx)];
            let coords: Vec<String> = free.iter().map(|&a| format!("{:.12e}", g.coord(idx[a]))).collect();
            writeln!(w, "{},{:.17e},{:.17e}", coords.join(","), z.re, z.im)?;
        }
    }
    Ok(())
}

/// Real matrix as CSV, one row per line.
pub fn write_matrix_csv<W: Write>(mut w: W, m: &DMatrix<f64>) -> Result<(), FormatError> {
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:.17e}", m[(r, c)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_matrix_csv<R: BufRead>(r: R) -> Result<DMatrix<f64>, FormatError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| FormatError::Csv { line: line_no + 1, msg: e.to_string() })?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(FormatError::Csv { line: line_no + 1, msg: "ragged row".into() });
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.into_iter().flatten()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let g = GridSpec::self_dual(2, 8).unwrap();
        let u = SampledField::from_fn(g, |z| Complex64::new(z[0].sin() / 3.0, z[1].exp() * 1e-300));
        let a = Array::from_field(&u);
        let mut buf = Vec::new();
        write_array(&mut buf, &a).unwrap();
        assert_eq!(buf.len(), 4 + 2 + 2 + 16 + 16 * 64);
        let b = read_array(buf.as_slice()).unwrap();
        assert_eq!(a.shape, b.shape);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        assert!(matches!(read_array(&b"PSWX\x01\x00\x00\x00"[..]), Err(FormatError::BadMagic)));
        assert!(matches!(read_array(&b"PSWC\x02\x00\x00\x00"[..]), Err(FormatError::UnsupportedVersion(2))));
        let mut buf = Vec::new();
        write_array(&mut buf, &Array::new(vec![2], vec![Complex64::new(1.0, 0.0); 2]).unwrap()).unwrap();
        buf.pop();
        assert!(matches!(read_array(buf.as_slice()), Err(FormatError::SizeMismatch { .. })));
    }

    #[test]
    fn matrix_csv_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -2.5, 1e-17, 0.1, 3.0, -0.0]);
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &m).unwrap();
        let back = read_matrix_csv(buf.as_slice()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn slice_has_expected_rows() {
        let g = GridSpec::self_dual(2, 8).unwrap();
        let u = SampledField::zeros(g);
        let mut buf = Vec::new();
        write_slice_csv(&mut buf, &u, &[1], &[4, 0]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 9);
    }
}
