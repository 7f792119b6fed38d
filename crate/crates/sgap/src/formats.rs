//! Text formats for masks, small matrices and point clouds.
//!
//! ```text
//! sg-mask v1
//! <n> <m> <k>
//! <i> <j>            k lines, zero-based, row-major sorted
//! ```
//!
//! `sg-matrix v1` stores `<n> <m> <real|complex>` then `n` rows of `m`
//! values, complex ones written `a+bi`. `sg-points v1` stores one `x y` pair
//! per line.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use sgap_core::dense::DenseMatrix;
use sgap_core::SamplingMask;

use crate::error::{Error, FormatError, Result};

pub const MASK_HEADER: &str = "sg-mask v1";
pub const MATRIX_HEADER: &str = "sg-matrix v1";
pub const POINTS_HEADER: &str = "sg-points v1";

type Parsed<T> = std::result::Result<T, FormatError>;

/// Non-blank lines with 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn header<'a>(it: &mut impl Iterator<Item = (usize, &'a str)>, expected: &'static str) -> Parsed<()> {
    match it.next() {
        Some((_, l)) if l == expected => Ok(()),
        other => Err(FormatError::MalformedHeader {
            expected,
            found: other.map(|(_, l)| l.to_string()).unwrap_or_default(),
        }),
    }
}

fn syntax(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        message: message.into(),
    }
}

fn fields<const N: usize>(line: usize, text: &str) -> Parsed<[&str; N]> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    parts
        .try_into()
        .map_err(|p: Vec<&str>| syntax(line, format!("expected {N} fields, found {}", p.len())))
}

fn number<T: std::str::FromStr>(line: usize, s: &str) -> Parsed<T> {
    s.parse().map_err(|_| syntax(line, format!("invalid number `{s}`")))
}

pub fn parse_mask(text: &str) -> Parsed<SamplingMask> {
    let mut it = lines(text);
    header(&mut it, MASK_HEADER)?;
    let (line, dims) = it.next().ok_or_else(|| syntax(2, "missing dimension line"))?;
    let [n, m, k] = fields::<3>(line, dims)?;
    let (n, m, k): (usize, usize, usize) = (number(line, n)?, number(line, m)?, number(line, k)?);
    if n == 0 || m == 0 {
        return Err(syntax(line, format!("mask dimensions must be positive, got {n}x{m}")));
    }
    let mut coords = Vec::with_capacity(k.min(1 << 24));
    for (line, text) in it {
        let [i, j] = fields::<2>(line, text)?;
        let (i, j): (usize, usize) = (number(line, i)?, number(line, j)?);
        if i >= n || j >= m {
            return Err(FormatError::IndexOutOfRange {
                line,
                row: i,
                col: j,
                rows: n,
                cols: m,
            });
        }
        if let Some(&prev) = coords.last() {
            if prev == (i, j) {
                return Err(FormatError::DuplicateEntry { line, row: i, col: j });
            }
            if prev > (i, j) {
                return Err(FormatError::Unsorted { line });
            }
        }
        coords.push((i, j));
    }
    if coords.len() != k {
        return Err(FormatError::EntryCountMismatch {
            declared: k,
            found: coords.len(),
        });
    }
    let (mask, _) = SamplingMask::from_coords(n, m, &coords).expect("validated coordinates");
    Ok(mask)
}

pub fn format_mask(mask: &SamplingMask) -> String {
    let mut out = String::with_capacity(16 * mask.len() + 32);
    let _ = writeln!(out, "{MASK_HEADER}\n{} {} {}", mask.rows(), mask.cols(), mask.len());
    for &(i, j) in mask.entries() {
        let _ = writeln!(out, "{i} {j}");
    }
    out
}

/// Dense real or complex matrix read from `sg-matrix v1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Real(DenseMatrix<f64>),
    Complex(DenseMatrix<Complex64>),
}

impl Matrix {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Matrix::Real(a) => a.shape(),
            Matrix::Complex(a) => a.shape(),
        }
    }
}

/// `a+bi`, `a-bi`, `bi` or a plain real.
fn parse_complex(line: usize, s: &str) -> Parsed<Complex64> {
    let Some(body) = s.strip_suffix('i') else {
        return Ok(Complex64::new(number(line, s)?, 0.0));
    };
    // The split is the last sign that is not the leading one or an exponent's.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    match split {
        Some(k) => Ok(Complex64::new(number(line, &body[..k])?, number(line, &body[k..])?)),
        None => Ok(Complex64::new(0.0, number(line, body)?)),
    }
}

fn format_complex(z: Complex64) -> String {
    if z.im.is_sign_negative() {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

pub fn parse_matrix(text: &str) -> Parsed<Matrix> {
    let mut it = lines(text);
    header(&mut it, MATRIX_HEADER)?;
    let (line, dims) = it.next().ok_or_else(|| syntax(2, "missing dimension line"))?;
    let [n, m, kind] = fields::<3>(line, dims)?;
    let (n, m): (usize, usize) = (number(line, n)?, number(line, m)?);
    let complex = match kind {
        "real" => false,
        "complex" => true,
        other => {
            return Err(syntax(
                line,
                format!("scalar kind must be `real` or `complex`, found `{other}`"),
            ))
        }
    };
    let mut re = Vec::with_capacity(n * m);
    let mut cx = Vec::new();
    let mut rows = 0;
    for (line, text) in it {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() != m {
            return Err(syntax(line, format!("expected {m} values, found {}", tokens.len())));
        }
        for t in tokens {
            if complex {
                cx.push(parse_complex(line, t)?);
            } else {
                re.push(number::<f64>(line, t)?);
            }
        }
        rows += 1;
    }
    if rows != n {
        return Err(FormatError::RowCountMismatch {
            declared: n,
            found: rows,
        });
    }
    Ok(if complex {
        Matrix::Complex(DenseMatrix::from_row_major(n, m, &cx).expect("row count checked"))
    } else {
        Matrix::Real(DenseMatrix::from_row_major(n, m, &re).expect("row count checked"))
    })
}

pub fn format_matrix(matrix: &Matrix) -> String {
    let (n, m) = matrix.shape();
    let kind = if matches!(matrix, Matrix::Real(_)) {
        "real"
    } else {
        "complex"
    };
    let mut out = format!("{MATRIX_HEADER}\n{n} {m} {kind}\n");
    for i in 0..n {
        let row: Vec<String> = (0..m)
            .map(|j| match matrix {
                Matrix::Real(a) => a[(i, j)].to_string(),
                Matrix::Complex(a) => format_complex(a[(i, j)]),
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_points(text: &str) -> Parsed<Vec<(f64, f64)>> {
    let mut it = lines(text);
    header(&mut it, POINTS_HEADER)?;
    it.map(|(line, text)| {
        let [x, y] = fields::<2>(line, text)?;
        let (x, y): (f64, f64) = (number(line, x)?, number(line, y)?);
        if !x.is_finite() || !y.is_finite() {
            return Err(syntax(line, "non-finite coordinate"));
        }
        Ok((x, y))
    })
    .collect()
}

pub fn format_points(points: &[(f64, f64)]) -> String {
    let mut out = format!("{POINTS_HEADER}\n");
    for (x, y) in points {
        let _ = writeln!(out, "{x} {y}");
    }
    out
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn at_path<T>(path: &Path, r: Parsed<T>) -> Result<T> {
    r.map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_mask(path: &Path) -> Result<SamplingMask> {
    at_path(path, parse_mask(&read(path)?))
}

pub fn write_mask(path: &Path, mask: &SamplingMask) -> Result<()> {
    write_text(path, &format_mask(mask))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    at_path(path, parse_matrix(&read(path)?))
}

pub fn write_matrix(path: &Path, matrix: &Matrix) -> Result<()> {
    write_text(path, &format_matrix(matrix))
}

pub fn read_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    at_path(path, parse_points(&read(path)?))
}

pub fn write_points(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    write_text(path, &format_points(points))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_round_trip() {
        let mask = SamplingMask::identity(4).unwrap();
        let text = format_mask(&mask);
        assert_eq!(text, "sg-mask v1\n4 4 4\n0 0\n1 1\n2 2\n3 3\n");
        assert_eq!(parse_mask(&text).unwrap(), mask);
    }

    #[test]
    fn mask_errors_are_distinct() {
        assert!(matches!(
            parse_mask("sg-mask v2\n1 1 0\n"),
            Err(FormatError::MalformedHeader { .. })
        ));
        let short = "sg-mask v1\n3 3 5\n0 0\n0 1\n1 1\n2 2\n";
        let err = parse_mask(short).unwrap_err();
        assert_eq!(err, FormatError::EntryCountMismatch { declared: 5, found: 4 });
        assert!(err.to_string().starts_with("entry count mismatch"));
        assert!(matches!(
            parse_mask("sg-mask v1\n2 2 1\n2 0\n"),
            Err(FormatError::IndexOutOfRange { line: 3, .. })
        ));
        assert!(matches!(
            parse_mask("sg-mask v1\n2 2 2\n1 0\n0 0\n"),
            Err(FormatError::Unsorted { line: 4 })
        ));
        assert!(matches!(
            parse_mask("sg-mask v1\n2 2 2\n0 0\n0 0\n"),
            Err(FormatError::DuplicateEntry { .. })
        ));
        assert!(matches!(
            parse_mask("sg-mask v1\n2 2 1\n0 x\n"),
            Err(FormatError::Syntax { line: 3, .. })
        ));
        assert!(matches!(
            parse_mask("sg-mask v1\n0 2 0\n"),
            Err(FormatError::Syntax { .. })
        ));
    }

    #[test]
    fn empty_mask_is_a_valid_file() {
        let mask = parse_mask("sg-mask v1\n3 2 0\n").unwrap();
        assert!(mask.is_empty());
        assert_eq!(mask.shape(), (3, 2));
    }

    #[test]
    fn complex_tokens() {
        let c = |s: &str| parse_complex(1, s).unwrap();
        assert_eq!(c("1+2i"), Complex64::new(1.0, 2.0));
        assert_eq!(c("-1-2i"), Complex64::new(-1.0, -2.0));
        assert_eq!(c("1e-5-3E+2i"), Complex64::new(1e-5, -300.0));
        assert_eq!(c("-2.5i"), Complex64::new(0.0, -2.5));
        assert_eq!(c("4"), Complex64::new(4.0, 0.0));
        assert!(parse_complex(1, "1+i").is_err());
        for z in [Complex64::new(0.1, -0.0), Complex64::new(-3.0e-300, 7.25)] {
            let back = c(&format_complex(z));
            assert_eq!((back.re.to_bits(), back.im.to_bits()), (z.re.to_bits(), z.im.to_bits()));
        }
    }

    #[test]
    fn matrix_round_trip() {
        let a = DenseMatrix::from_row_major(2, 3, &[1.0, -0.5, 1e-300, 3.0, 0.1, -7.0]).unwrap();
        let m = Matrix::Real(a);
        assert_eq!(parse_matrix(&format_matrix(&m)).unwrap(), m);
        let z = DenseMatrix::from_row_major(1, 2, &[Complex64::new(1.0, -2.0), Complex64::new(0.0, 0.5)]).unwrap();
        let m = Matrix::Complex(z);
        assert_eq!(parse_matrix(&format_matrix(&m)).unwrap(), m);
        assert!(matches!(
            parse_matrix("sg-matrix v1\n2 1 real\n1\n"),
            Err(FormatError::RowCountMismatch { declared: 2, found: 1 })
        ));
        assert!(matches!(
            parse_matrix("sg-matrix v1\n1 1 quaternion\n1\n"),
            Err(FormatError::Syntax { .. })
        ));
    }

    #[test]
    fn points_round_trip() {
        let pts = vec![(0.0, 1.5), (-20.25, 1e4)];
        assert_eq!(parse_points(&format_points(&pts)).unwrap(), pts);
        assert!(parse_points("sg-points v1\n1 NaN\n").is_err());
    }
}
