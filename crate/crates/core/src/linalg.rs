//! Small dense helpers over `faer` shared by the operator modules.
//!
//! faer is built without its rayon backend, so every decomposition and
//! product runs sequentially and is bit-reproducible.

use std::fmt::Write as _;

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Ascending eigenvalues and matching eigenvectors of a symmetric matrix.
/// Only the lower triangle is read.
pub fn sym_eigen(m: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::EigensolveFailure(format!("{e:?}")))?;
    let vals = evd.S().column_vector().iter().copied().collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn sym_eigenvalues(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::EigensolveFailure(format!("{e:?}")))
}

/// Singular values, non-increasing.
pub fn singular_values(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    m.singular_values()
        .map_err(|e| Error::EigensolveFailure(format!("{e:?}")))
}

pub fn frobenius(m: MatRef<'_, f64>) -> f64 {
    m.norm_l2()
}

pub fn frobenius_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    (a - b).norm_l2()
}

/// ‖a − b‖ / max(‖b‖, tiny).
pub fn relative_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    frobenius_diff(a, b) / frobenius(b).max(f64::MIN_POSITIVE)
}

pub fn symmetrize(m: MatRef<'_, f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

pub fn identity(n: usize) -> Mat<f64> {
    Mat::identity(n, n)
}

pub fn diag(values: &[f64]) -> Mat<f64> {
    Mat::from_fn(values.len(), values.len(), |i, j| {
        if i == j {
            values[i]
        } else {
            0.0
        }
    })
}

/// `diag(d) · m` without materializing the diagonal matrix.
pub fn scale_rows(d: &[f64], m: MatRef<'_, f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| d[i] * m[(i, j)])
}

pub fn max_abs(m: MatRef<'_, f64>) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].abs());
        }
    }
    out
}

pub fn is_finite(m: MatRef<'_, f64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].is_finite()))
}

/// Appends the matrix row-major, one row per line, 17 significant digits.
pub fn write_rows(out: &mut String, m: MatRef<'_, f64>) {
    for i in 0..m.nrows() {
        write_row(out, (0..m.ncols()).map(|j| m[(i, j)]));
    }
}

pub fn write_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{v:.16e}");
    }
    out.push('\n');
}

/// Whitespace-token reader for the text matrix formats.
pub(crate) struct Tokens<'a> {
    lines: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    pending: std::vec::IntoIter<&'a str>,
    line: usize,
}

impl<'a> Tokens<'a> {
    pub fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> =
            Box::new(text.lines().enumerate().map(|(i, l)| (i + 1, l)));
        Tokens {
            lines: it.peekable(),
            pending: Vec::new().into_iter(),
            line: 0,
        }
    }

    /// Tokens of the next non-empty line.
    pub fn line(&mut self) -> Result<Vec<&'a str>> {
        for (ln, l) in self.lines.by_ref() {
            self.line = ln;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if !toks.is_empty() {
                return Ok(toks);
            }
        }
        Err(Error::parse(self.line, "unexpected end of file"))
    }

    pub fn next_f64(&mut self) -> Result<f64> {
        loop {
            if let Some(t) = self.pending.next() {
                return t
                    .parse()
                    .map_err(|_| Error::parse(self.line, format!("bad number {t:?}")));
            }
            self.pending = self.line()?.into_iter();
        }
    }

    pub fn matrix(&mut self, rows: usize, cols: usize) -> Result<Mat<f64>> {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self.next_f64()?;
            }
        }
        Ok(m)
    }

    pub fn vector(&mut self, len: usize) -> Result<Vec<f64>> {
        (0..len).map(|_| self.next_f64()).collect()
    }

    pub fn line_no(&self) -> usize {
        self.line
    }
}

pub(crate) fn parse_header_usize(tok: Option<&&str>, line: usize, what: &str) -> Result<usize> {
    tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::parse(line, format!("bad {what}")))
}
