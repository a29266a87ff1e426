//! File formats: headerless numeric CSV and the binary sample file.
//!
//! CSV values are written with Rust's shortest round-trip float formatting,
//! so a write/read cycle is exact.
//!
//! The sample file is `"QGGM"`, a little-endian `u32` version, `u64` p,
//! `u64` sample count, then `count·p²` little-endian `f64` values, one p×p
//! row-major draw after another.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gibbs::SampleStack;
use crate::matrix::DenseMatrix;

pub const SAMPLES_MAGIC: &[u8; 4] = b"QGGM";
pub const SAMPLES_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8;

pub fn format_matrix_csv(m: &DenseMatrix) -> String {
    let mut out = String::with_capacity(m.rows() * m.cols() * 20);
    for r in 0..m.rows() {
        for (c, v) in m.row(r).iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

/// Parse headerless CSV. `source` labels error messages. Blank lines are
/// skipped; every other line must have the same number of fields.
pub fn parse_matrix_csv(text: &str, source: &str) -> Result<DenseMatrix> {
    let mut data = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    for (ln, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0;
        let mut offset = 0;
        for field in line.split(',') {
            let column = offset + 1;
            offset += field.len() + 1;
            count += 1;
            let parse_err = |message: String| Error::Parse { path: source.to_string(), line: ln + 1, column, message };
            let t = field.trim();
            let v: f64 = t.parse().map_err(|_| parse_err(format!("cannot parse '{t}' as a number")))?;
            if !v.is_finite() {
                return Err(parse_err(format!("non-finite value '{t}'")));
            }
            data.push(v);
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line: ln + 1,
                    column: 1,
                    message: format!("expected {c} fields, found {count}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Parse {
        path: source.to_string(),
        line: 1,
        column: 1,
        message: "no data rows".into(),
    })?;
    DenseMatrix::new(rows, cols, data)
}

pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_csv(&text, &path.display().to_string())
}

pub fn write_matrix_csv(path: &Path, m: &DenseMatrix) -> Result<()> {
    fs::write(path, format_matrix_csv(m)).map_err(|e| Error::io(path, e))
}

pub fn encode_samples(samples: &SampleStack) -> Vec<u8> {
    let vals = samples.as_slice();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * vals.len());
    out.extend_from_slice(SAMPLES_MAGIC);
    out.extend_from_slice(&SAMPLES_VERSION.to_le_bytes());
    out.extend_from_slice(&(samples.p() as u64).to_le_bytes());
    out.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_samples(bytes: &[u8], source: &str) -> Result<SampleStack> {
    let bad = |message: String| Error::Parse { path: source.to_string(), line: 0, column: 0, message };
    if bytes.len() < HEADER_LEN || &bytes[..4] != SAMPLES_MAGIC {
        return Err(bad("not a QGGM sample file".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != SAMPLES_VERSION {
        return Err(bad(format!("unsupported sample file version {version}")));
    }
    let p = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let n = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let expected = p
        .checked_mul(p)
        .and_then(|x| x.checked_mul(n))
        .and_then(|x| x.checked_mul(8))
        .ok_or_else(|| bad("header sizes overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != expected {
        return Err(bad(format!("expected {expected} data bytes for p = {p}, {n} samples; found {}", body.len())));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    SampleStack::from_raw(p, data)
}

pub fn write_samples(path: &Path, samples: &SampleStack) -> Result<()> {
    fs::write(path, encode_samples(samples)).map_err(|e| Error::io(path, e))
}

pub fn read_samples(path: &Path) -> Result<SampleStack> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_samples(&bytes, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_is_exact() {
        let m = DenseMatrix::new(2, 3, vec![0.1, -1e-300, 1.0 / 3.0, 12345.678, 0.0, -2.5e17]).unwrap();
        assert_eq!(parse_matrix_csv(&format_matrix_csv(&m), "t").unwrap(), m);
    }

    #[test]
    fn csv_errors_carry_position() {
        let e = parse_matrix_csv("1,2\n3,x\n", "y.csv").unwrap_err();
        assert_eq!(e, Error::Parse { path: "y.csv".into(), line: 2, column: 3, message: "cannot parse 'x' as a number".into() });
        let e = parse_matrix_csv("1,2\n3\n", "y.csv").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(parse_matrix_csv("1,NaN\n", "y.csv").is_err());
        assert!(parse_matrix_csv("\n\n", "y.csv").is_err());
        assert!(e.is_validation());
    }

    #[test]
    fn csv_tolerates_crlf_and_blank_lines() {
        let m = parse_matrix_csv("1, 2\r\n\r\n3,4\r\n", "t").unwrap();
        assert_eq!(m.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn samples_roundtrip_and_corruption() {
        let stack = SampleStack::from_raw(2, vec![1.0, 0.5, -0.25, 1.0, 1.0, 0.0, 0.125, 1.0]).unwrap();
        let bytes = encode_samples(&stack);
        assert_eq!(&bytes[..4], b"QGGM");
        assert_eq!(decode_samples(&bytes, "s").unwrap(), stack);
        assert!(decode_samples(&bytes[..bytes.len() - 1], "s").is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(decode_samples(&wrong, "s").is_err());
    }
}
