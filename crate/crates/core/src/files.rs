//! Matrix file formats.
//!
//! Binary dense format: a header of three little-endian 64-bit integers
//! `(d, k, field tag)` with tag 0 = real / 1 = complex, followed by the
//! row-major entries as 8-byte IEEE-754 doubles (`re, im` pairs when
//! complex). A Kronecker-factors file reuses the same header followed by
//! `k` consecutive `d × d` row-major factor blocks.
//!
//! Real matrices are also accepted as CSV, one row per line.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::dense::DenseMatrix;
use crate::dims::{Dims, DEFAULT_TOTAL_DIM_CAP};
use crate::error::{Error, Result};
use crate::field::ScalarField;

fn field_tag(field: ScalarField) -> u64 {
    match field {
        ScalarField::Real => 0,
        ScalarField::Complex => 1,
    }
}

fn write_header(w: &mut impl Write, dims: &Dims, field: ScalarField) -> Result<()> {
    w.write_all(&(dims.d() as u64).to_le_bytes())?;
    w.write_all(&(dims.k() as u64).to_le_bytes())?;
    w.write_all(&field_tag(field).to_le_bytes())?;
    Ok(())
}

fn write_entries(w: &mut impl Write, entries: &[Complex64], field: ScalarField) -> Result<()> {
    for z in entries {
        w.write_all(&z.re.to_le_bytes())?;
        if field == ScalarField::Complex {
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_header(r: &mut impl Read, cap: u64) -> Result<(Dims, ScalarField)> {
    let d = read_u64(r)?;
    let k = read_u64(r)?;
    let tag = read_u64(r)?;
    let field = match tag {
        0 => ScalarField::Real,
        1 => ScalarField::Complex,
        other => return Err(Error::MatrixFormat(format!("unknown field tag {other}"))),
    };
    let dims = Dims::with_cap(d as usize, k as usize, cap)?;
    Ok((dims, field))
}

fn read_block(r: &mut impl Read, side: usize, field: ScalarField) -> Result<DenseMatrix> {
    let mut entries = Vec::with_capacity(side * side);
    for _ in 0..side * side {
        let re = read_f64(r)?;
        let im = if field == ScalarField::Complex {
            read_f64(r)?
        } else {
            0.0
        };
        entries.push(Complex64::new(re, im));
    }
    let mut m = DenseMatrix::from_complex(side, entries)?;
    if field == ScalarField::Real {
        m = DenseMatrix::from_real(side, &m.re_entries())?;
    }
    Ok(m)
}

/// Write a `d^k × d^k` matrix in the binary dense format.
pub fn write_matrix(path: &Path, matrix: &DenseMatrix, dims: &Dims) -> Result<()> {
    if matrix.side() != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            got: matrix.side(),
        });
    }
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, dims, matrix.field())?;
    write_entries(&mut w, matrix.entries(), matrix.field())?;
    w.flush()?;
    Ok(())
}

/// Read a matrix in the binary dense format, honoring the default dimension cap.
pub fn read_matrix(path: &Path) -> Result<(DenseMatrix, Dims)> {
    read_matrix_with_cap(path, DEFAULT_TOTAL_DIM_CAP)
}

pub fn read_matrix_with_cap(path: &Path, cap: u64) -> Result<(DenseMatrix, Dims)> {
    let mut r = BufReader::new(File::open(path)?);
    let (dims, field) = read_header(&mut r, cap)?;
    let m = read_block(&mut r, dims.total(), field)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::MatrixFormat(
            "trailing bytes after matrix entries".into(),
        ));
    }
    Ok((m, dims))
}

/// Write `k` Kronecker factors, each `d × d`, under the shared header.
pub fn write_kron_factors(path: &Path, factors: &[DenseMatrix], dims: &Dims) -> Result<()> {
    if factors.len() != dims.k() {
        return Err(Error::DimensionMismatch {
            expected: dims.k(),
            got: factors.len(),
        });
    }
    let field = if factors.iter().all(|f| f.field().is_real()) {
        ScalarField::Real
    } else {
        ScalarField::Complex
    };
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, dims, field)?;
    for f in factors {
        if f.side() != dims.d() {
            return Err(Error::DimensionMismatch {
                expected: dims.d(),
                got: f.side(),
            });
        }
        write_entries(&mut w, f.entries(), field)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a Kronecker-factors file written by [`write_kron_factors`].
pub fn read_kron_factors(path: &Path) -> Result<(Vec<DenseMatrix>, Dims)> {
    read_kron_factors_with_cap(path, DEFAULT_TOTAL_DIM_CAP)
}

pub fn read_kron_factors_with_cap(path: &Path, cap: u64) -> Result<(Vec<DenseMatrix>, Dims)> {
    let mut r = BufReader::new(File::open(path)?);
    let (dims, field) = read_header(&mut r, cap)?;
    let factors = (0..dims.k())
        .map(|_| read_block(&mut r, dims.d(), field))
        .collect::<Result<Vec<_>>>()?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::MatrixFormat(
            "trailing bytes after factor entries".into(),
        ));
    }
    Ok((factors, dims))
}

/// Read a real square matrix from CSV, one row per line.
pub fn read_csv_real(path: &Path) -> Result<DenseMatrix> {
    let mut text = String::new();
    BufReader::new(File::open(path)?).read_to_string(&mut text)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::MatrixFormat(format!("line {}: {e}", lineno + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::MatrixFormat("empty CSV matrix".into()));
    }
    let side = rows.len();
    for row in &rows {
        if row.len() != side {
            return Err(Error::MatrixFormat(format!(
                "expected {side} columns to match {side} rows, got {}",
                row.len()
            )));
        }
    }
    DenseMatrix::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_gaussian_vector, RngStream};

    fn tmp(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("krontrace-core-{}-{name}", std::process::id()));
        p
    }

    #[test]
    fn binary_round_trip_real() {
        let dims = Dims::new(3, 2).unwrap();
        let g = sample_gaussian_vector(81, &RngStream::new(6, 0));
        let m = DenseMatrix::from_real(9, &g).unwrap();
        let path = tmp("real.mat");
        write_matrix(&path, &m, &dims).unwrap();
        let (back, back_dims) = read_matrix(&path).unwrap();
        assert_eq!(back_dims, dims);
        assert_eq!(back, m);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn binary_round_trip_complex() {
        let dims = Dims::new(2, 1).unwrap();
        let entries = vec![
            Complex64::new(1.0, 2.0),
            Complex64::new(-0.5, 0.25),
            Complex64::new(0.0, -1.0),
            Complex64::new(3.0, 0.0),
        ];
        let m = DenseMatrix::from_complex(2, entries).unwrap();
        let path = tmp("complex.mat");
        write_matrix(&path, &m, &dims).unwrap();
        let (back, _) = read_matrix(&path).unwrap();
        assert_eq!(back, m);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn kron_factors_round_trip() {
        let dims = Dims::new(2, 2).unwrap();
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let path = tmp("factors.mat");
        write_kron_factors(&path, &[a.clone(), b.clone()], &dims).unwrap();
        let (factors, back_dims) = read_kron_factors(&path).unwrap();
        assert_eq!(back_dims, dims);
        assert_eq!(factors, vec![a, b]);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn csv_parse() {
        let path = tmp("m.csv");
        std::fs::write(&path, "1.0, 2.0\n3.0, 4.0\n").unwrap();
        let m = read_csv_real(&path).unwrap();
        assert_eq!(
            m,
            DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap()
        );
        std::fs::remove_file(&path).ok();

        let path = tmp("bad.csv");
        std::fs::write(&path, "1.0, 2.0\n3.0\n").unwrap();
        assert!(read_csv_real(&path).is_err());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn header_validation() {
        let path = tmp("badtag.mat");
        let mut bytes = Vec::new();
        bytes.extend(2u64.to_le_bytes());
        bytes.extend(1u64.to_le_bytes());
        bytes.extend(7u64.to_le_bytes()); // bogus field tag
        std::fs::write(&path, &bytes).unwrap();
        assert!(read_matrix(&path).is_err());
        std::fs::remove_file(&path).ok();
    }
}
