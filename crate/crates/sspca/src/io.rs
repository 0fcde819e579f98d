//! Dense matrix and label files.
//!
//! Matrices are stored either as CSV (`.csv`: one matrix row per line,
//! comma-separated decimals, no header) or in a small binary format (`.bin`):
//!
//! ```text
//! b"SPM1" | rows: u64 LE | cols: u64 LE | rows·cols f64 LE, row-major
//! ```
//!
//! Floats are written in shortest round-trip form, so both formats reload
//! bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sspca_core::ufs::LabelVector;
use sspca_core::Matrix;

use crate::error::FormatError;

pub const MAGIC: &[u8; 4] = b"SPM1";
const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    pub fn from_path(path: &Path) -> Result<Self, FormatError> {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Ok(Self::Csv),
            Some(e) if e.eq_ignore_ascii_case("bin") => Ok(Self::Binary),
            _ => Err(FormatError::UnknownFormat {
                path: path.to_path_buf(),
            }),
        }
    }
}

pub fn load_matrix(path: &Path) -> Result<Matrix, FormatError> {
    let format = MatrixFormat::from_path(path)?;
    let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    match format {
        MatrixFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|e| {
                FormatError::malformed(
                    path,
                    format!("not UTF-8 at byte {}", e.utf8_error().valid_up_to()),
                )
            })?;
            parse_csv(&text, path)
        }
        MatrixFormat::Binary => decode_binary(&bytes, path),
    }
}

pub fn save_matrix(matrix: &Matrix, path: &Path) -> Result<(), FormatError> {
    fs::write(path, encode_matrix(matrix, MatrixFormat::from_path(path)?))
        .map_err(|e| FormatError::io(path, e))
}

pub fn encode_matrix(matrix: &Matrix, format: MatrixFormat) -> Vec<u8> {
    match format {
        MatrixFormat::Csv => matrix_to_csv(matrix).into_bytes(),
        MatrixFormat::Binary => encode_binary(matrix),
    }
}

pub fn matrix_to_csv(matrix: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..matrix.rows() {
        push_csv_row(&mut out, matrix.row(i));
    }
    out
}

pub(crate) fn push_csv_row(out: &mut String, row: &[f64]) {
    for (j, v) in row.iter().enumerate() {
        if j > 0 {
            out.push(',');
        }
        write!(out, "{v:?}").expect("write to String");
    }
    out.push('\n');
}

/// Parses CSV text; `path` is only used in error messages. Blank lines are
/// skipped.
pub fn parse_csv(text: &str, path: &Path) -> Result<Matrix, FormatError> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for (j, field) in line.split(',').enumerate() {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| {
                FormatError::parse(
                    path,
                    lineno,
                    format!("column {}: cannot parse {field:?} as a number", j + 1),
                )
            })?;
            if !v.is_finite() {
                return Err(FormatError::parse(
                    path,
                    lineno,
                    format!("column {}: non-finite value {field:?}", j + 1),
                ));
            }
            data.push(v);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(FormatError::parse(
                    path,
                    lineno,
                    format!("expected {c} columns, found {width}"),
                ))
            }
            Some(_) => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| FormatError::malformed(path, "no data rows"))?;
    Ok(Matrix::from_vec(rows, cols, data)?)
}

pub fn encode_binary(matrix: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * matrix.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(matrix.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(matrix.cols() as u64).to_le_bytes());
    for v in matrix.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_binary(bytes: &[u8], path: &Path) -> Result<Matrix, FormatError> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::malformed(
            path,
            format!(
                "truncated header: expected {HEADER_LEN} bytes, found {}",
                bytes.len()
            ),
        ));
    }
    if &bytes[..4] != MAGIC {
        return Err(FormatError::malformed(
            path,
            "bad magic at offset 0 (expected \"SPM1\")",
        ));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let (rows, cols) = (word(4), word(12));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN as u64))
        .ok_or_else(|| FormatError::malformed(path, format!("shape {rows}x{cols} overflows")))?;
    if bytes.len() as u64 != expected {
        let kind = if (bytes.len() as u64) < expected {
            "truncated"
        } else {
            "trailing data"
        };
        return Err(FormatError::malformed(
            path,
            format!(
                "{kind}: {rows}x{cols} matrix needs {expected} bytes, found {}",
                bytes.len()
            ),
        ));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    if rows == 0 || cols == 0 {
        return Err(FormatError::malformed(
            path,
            format!("empty shape {rows}x{cols}"),
        ));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (k, chunk) in bytes[HEADER_LEN..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(FormatError::malformed(
                path,
                format!(
                    "non-finite value at row {}, column {} (offset {})",
                    k / cols + 1,
                    k % cols + 1,
                    HEADER_LEN + 8 * k
                ),
            ));
        }
        data.push(v);
    }
    Ok(Matrix::from_vec(rows, cols, data)?)
}

/// One integer label per line; values are remapped to `0..c` in ascending
/// order.
pub fn load_labels(path: &Path) -> Result<LabelVector, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    let mut raw = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: i64 = line.parse().map_err(|_| {
            FormatError::parse(
                path,
                idx + 1,
                format!("cannot parse {line:?} as an integer label"),
            )
        })?;
        raw.push(v);
    }
    if raw.is_empty() {
        return Err(FormatError::malformed(path, "no labels"));
    }
    Ok(LabelVector::from_raw(&raw)?)
}

pub fn save_labels(labels: &LabelVector, path: &Path) -> Result<(), FormatError> {
    let mut out = String::new();
    for l in labels.assignments() {
        writeln!(out, "{l}").expect("write to String");
    }
    fs::write(path, out).map_err(|e| FormatError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("m.csv")
    }

    #[test]
    fn csv_small() {
        let m = parse_csv("1,2\n3,4", p()).unwrap();
        assert_eq!(m, Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
        let m = parse_csv(" 1 , 2e-3\n\n-3,4.5\n\n", p()).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 2e-3, -3.0, 4.5]);
    }

    #[test]
    fn csv_errors_carry_line() {
        let e = parse_csv("1,2\n3,x", p()).unwrap_err().to_string();
        assert!(e.contains(":2:") && e.contains("column 2"), "{e}");
        let e = parse_csv("1,2\n3", p()).unwrap_err().to_string();
        assert!(e.contains(":2:") && e.contains("expected 2 columns"), "{e}");
        let e = parse_csv("1,NaN", p()).unwrap_err().to_string();
        assert!(e.contains("non-finite"), "{e}");
        assert!(parse_csv("\n\n", p()).is_err());
    }

    #[test]
    fn csv_text_round_trip_is_exact() {
        let m = Matrix::from_rows(&[[0.1, -1e-300, 1.0 / 3.0], [1e300, 5.0, -0.0]]).unwrap();
        let back = parse_csv(&matrix_to_csv(&m), p()).unwrap();
        for (a, b) in m.as_slice().iter().zip(back.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn binary_truncation_names_byte_count() {
        let m = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        let bytes = encode_binary(&m);
        assert_eq!(bytes.len(), 44);
        let e = decode_binary(&bytes[..40], Path::new("m.bin"))
            .unwrap_err()
            .to_string();
        assert!(e.contains("44 bytes") && e.contains("found 40"), "{e}");
        let e = decode_binary(&bytes[..10], Path::new("m.bin"))
            .unwrap_err()
            .to_string();
        assert!(e.contains("20 bytes"), "{e}");
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_binary(&bad, Path::new("m.bin")).is_err());
    }

    #[test]
    fn binary_rejects_non_finite_with_location() {
        let mut bytes = encode_binary(&Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
        bytes[20 + 24..].copy_from_slice(&f64::INFINITY.to_le_bytes());
        let e = decode_binary(&bytes, Path::new("m.bin"))
            .unwrap_err()
            .to_string();
        assert!(e.contains("row 2, column 2"), "{e}");
    }

    #[test]
    fn extension_selects_format() {
        assert_eq!(
            MatrixFormat::from_path(Path::new("a/b.CSV")).unwrap(),
            MatrixFormat::Csv
        );
        assert_eq!(
            MatrixFormat::from_path(Path::new("b.bin")).unwrap(),
            MatrixFormat::Binary
        );
        assert!(MatrixFormat::from_path(Path::new("b.txt")).is_err());
    }
}
