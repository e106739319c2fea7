//! Coordinate text format: a `rows cols nnz` header, then one 0-based
//! `row col value` line per nonzero entry in row-major order. Complex
//! matrices carry two value columns, `re im`.

use std::fmt::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub fn real_coordinate(m: &DMatrix<f64>) -> String {
    let entries: Vec<(usize, usize, f64)> = (0..m.nrows())
        .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
        .map(|(r, c)| (r, c, m[(r, c)]))
        .filter(|&(_, _, x)| x != 0.0)
        .collect();
    let mut out = format!("{} {} {}\n", m.nrows(), m.ncols(), entries.len());
    for (r, c, x) in entries {
        writeln!(out, "{r} {c} {}", x + 0.0).unwrap();
    }
    out
}

pub fn complex_coordinate(m: &DMatrix<Complex64>) -> String {
    let entries: Vec<(usize, usize, Complex64)> = (0..m.nrows())
        .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
        .map(|(r, c)| (r, c, m[(r, c)]))
        .filter(|&(_, _, z)| z.re != 0.0 || z.im != 0.0)
        .collect();
    let mut out = format!("{} {} {}\n", m.nrows(), m.ncols(), entries.len());
    for (r, c, z) in entries {
        writeln!(out, "{r} {c} {} {}", z.re + 0.0, z.im + 0.0).unwrap();
    }
    out
}

// `+ 0.0` prints negative zero as `0`.

/// Parses the real coordinate format back into a dense matrix.
pub fn parse_real_coordinate(text: &str) -> Option<DMatrix<f64>> {
    let mut lines = text.lines();
    let header: Vec<usize> = lines
        .next()?
        .split_whitespace()
        .map(|t| t.parse().ok())
        .collect::<Option<_>>()?;
    let [rows, cols, nnz] = header[..] else {
        return None;
    };
    let mut m = DMatrix::zeros(rows, cols);
    let mut seen = 0;
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [r, c, x] = parts[..] else { return None };
        let (r, c): (usize, usize) = (r.parse().ok()?, c.parse().ok()?);
        if r >= rows || c >= cols {
            return None;
        }
        m[(r, c)] = x.parse().ok()?;
        seen += 1;
    }
    (seen == nnz).then_some(m)
}
