//! Plain-text dense complex matrices.
//!
//! The first line is `N` for a square matrix or `R C` otherwise. Each of the
//! following `R` lines holds `C` entries written as `re im` pairs separated by
//! whitespace. Floats use the shortest representation that round-trips.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

pub fn format_matrix(m: &CMatrix) -> String {
    let mut out = String::new();
    if m.nrows() == m.ncols() {
        writeln!(out, "{}", m.nrows()).unwrap();
    } else {
        writeln!(out, "{} {}", m.nrows(), m.ncols()).unwrap();
    }
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:?} {:?}", m[(i, j)].re, m[(i, j)].im))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Parse(format!("bad matrix header '{header}'")))
        })
        .collect::<Result<_>>()?;
    let (r, c) = match dims.as_slice() {
        [n] => (*n, *n),
        [r, c] => (*r, *c),
        _ => return Err(Error::Parse(format!("bad matrix header '{header}'"))),
    };
    let mut m = CMatrix::zeros(r, c);
    for i in 0..r {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("expected {r} rows, found {i}")))?;
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse(format!("bad number '{t}' in row {}", i + 1)))
            })
            .collect::<Result<_>>()?;
        if nums.len() != 2 * c {
            return Err(Error::Parse(format!(
                "row {} has {} numbers, expected {}",
                i + 1,
                nums.len(),
                2 * c
            )));
        }
        for j in 0..c {
            m[(i, j)] = C64::new(nums[2 * j], nums[2 * j + 1]);
        }
    }
    if lines.next().is_some() {
        return Err(Error::Parse("trailing data after matrix rows".into()));
    }
    Ok(m)
}

pub fn read_matrix(path: &Path) -> Result<CMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn write_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    fs::write(path, format_matrix(m)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = CMatrix::from_row_slice(
            2,
            3,
            &[
                C64::new(0.1, -0.0),
                C64::new(1.0 / 3.0, 2e-300),
                C64::new(-5.0, 7.25),
                C64::new(f64::MIN_POSITIVE, 1.0),
                C64::new(0.0, 0.0),
                C64::new(123456789.123, -1e-17),
            ],
        );
        let text = format_matrix(&m);
        assert!(text.starts_with("2 3\n"));
        let back = parse_matrix(&text).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn square_header() {
        let m = CMatrix::identity(2, 2);
        assert_eq!(format_matrix(&m), "2\n1.0 0.0 0.0 0.0\n0.0 0.0 1.0 0.0\n");
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_matrix("").is_err());
        assert!(parse_matrix("2\n1 0 0 0\n").is_err());
        assert!(parse_matrix("1\n1 x\n").is_err());
        assert!(parse_matrix("1\n1 0 2\n").is_err());
    }
}
