//! Plain-text matrix format: a `rows cols` header line followed by `rows`
//! lines of whitespace-separated decimals. Values are written with 17
//! significant digits so that parsing restores the exact `f64`.

use std::fmt::Write as _;

use crate::densela::Matrix;
use crate::error::{Error, Result};

pub(crate) fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn format_row(values: &[f64]) -> String {
    values
        .iter()
        .map(|&v| format_value(v))
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn parse_values(line: &str, expected: usize, lineno: usize) -> Result<Vec<f64>> {
    let vals = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {lineno}: {tok:?}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if vals.len() != expected {
        return Err(Error::Parse(format!(
            "line {lineno}: expected {expected} values, found {}",
            vals.len()
        )));
    }
    Ok(vals)
}

/// Iterator over non-blank lines with their 1-based line numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

impl Matrix {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {}", self.rows(), self.cols()).unwrap();
        for i in 0..self.rows() {
            writeln!(s, "{}", format_row(self.row(i))).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Matrix> {
        let mut lines = content_lines(text);
        let (hl, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("line {hl}: bad dimension {t:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        let [rows, cols] = dims[..] else {
            return Err(Error::Parse(format!(
                "line {hl}: header must be \"rows cols\""
            )));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("expected {rows} rows")))?;
            data.extend(parse_values(line, cols, ln)?);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse(format!("line {ln}: trailing data")));
        }
        Matrix::new(rows, cols, data).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_header_and_rows() {
        let m = Matrix::from_text("2 2\n1.01 10\n.01 1\n").unwrap();
        assert_eq!(m, Matrix::from_rows(&[&[1.01, 10.0], &[0.01, 1.0]]).unwrap());
    }

    #[test]
    fn rejects_short_rows() {
        assert!(matches!(Matrix::from_text("2 2\n1 2\n3\n"), Err(Error::Parse(_))));
        assert!(matches!(Matrix::from_text("2 2\n1 2\n"), Err(Error::Parse(_))));
    }

    proptest! {
        #[test]
        fn text_roundtrip_is_exact(
            rows in 1usize..5,
            cols in 1usize..5,
            seed in proptest::collection::vec(-1e300f64..1e300, 25)
        ) {
            let m = Matrix::from_fn(rows, cols, |i, j| seed[i * 5 + j] * 1e-150);
            let back = Matrix::from_text(&m.to_text()).unwrap();
            prop_assert_eq!(back.as_slice(), m.as_slice());
        }
    }
}
