use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Explicit square matrix stored row-major.
///
/// Entries are kept as complex doubles regardless of the field tag; matrices
/// tagged `Real` hold a zero imaginary part in every entry.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    side: usize,
    field: ScalarField,
    entries: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(side: usize, field: ScalarField) -> Self {
        DenseMatrix {
            side,
            field,
            entries: vec![Complex64::ZERO; side * side],
        }
    }

    pub fn identity(side: usize) -> Self {
        let mut m = Self::zeros(side, ScalarField::Real);
        for i in 0..side {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// All-ones matrix.
    pub fn ones(side: usize) -> Self {
        DenseMatrix {
            side,
            field: ScalarField::Real,
            entries: vec![Complex64::new(1.0, 0.0); side * side],
        }
    }

    /// Real matrix from a row-major slice of length `side²`.
    pub fn from_real(side: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != side * side {
            return Err(Error::DimensionMismatch {
                expected: side * side,
                got: entries.len(),
            });
        }
        Ok(DenseMatrix {
            side,
            field: ScalarField::Real,
            entries: entries.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        })
    }

    /// Real matrix from explicit rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let side = rows.len();
        let mut entries = Vec::with_capacity(side * side);
        for row in rows {
            if row.len() != side {
                return Err(Error::DimensionMismatch {
                    expected: side,
                    got: row.len(),
                });
            }
            entries.extend(row.iter().map(|&x| Complex64::new(x, 0.0)));
        }
        Ok(DenseMatrix {
            side,
            field: ScalarField::Real,
            entries,
        })
    }

    pub fn from_complex(side: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != side * side {
            return Err(Error::DimensionMismatch {
                expected: side * side,
                got: entries.len(),
            });
        }
        Ok(DenseMatrix {
            side,
            field: ScalarField::Complex,
            entries,
        })
    }

    /// Outer product `g gᵀ` of a real vector.
    pub fn outer(g: &[f64]) -> Self {
        let side = g.len();
        let mut m = Self::zeros(side, ScalarField::Real);
        for (i, &gi) in g.iter().enumerate() {
            for (j, &gj) in g.iter().enumerate() {
                m.set(i, j, Complex64::new(gi * gj, 0.0));
            }
        }
        m
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn field(&self) -> ScalarField {
        self.field
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.side + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.side + col] = value;
    }

    #[inline]
    pub(crate) fn add_at(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.side + col] += value;
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.side).map(|i| self.get(i, i)).sum()
    }

    /// Sum of squared moduli of the entries.
    pub fn frob_norm_sq(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = Self::zeros(self.side, self.field);
        for i in 0..self.side {
            for j in 0..self.side {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn scale(&self, factor: f64) -> DenseMatrix {
        DenseMatrix {
            side: self.side,
            field: self.field,
            entries: self.entries.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if other.side != self.side {
            return Err(Error::DimensionMismatch {
                expected: self.side,
                got: other.side,
            });
        }
        let field = if self.field.is_real() && other.field.is_real() {
            ScalarField::Real
        } else {
            ScalarField::Complex
        };
        Ok(DenseMatrix {
            side: self.side,
            field,
            entries: self
                .entries
                .iter()
                .zip(other.entries.iter())
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if other.side != self.side {
            return Err(Error::DimensionMismatch {
                expected: self.side,
                got: other.side,
            });
        }
        Ok(DenseMatrix {
            side: self.side,
            field: ScalarField::Complex,
            entries: self
                .entries
                .iter()
                .zip(other.entries.iter())
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if other.side != self.side {
            return Err(Error::DimensionMismatch {
                expected: self.side,
                got: other.side,
            });
        }
        let n = self.side;
        let field = if self.field.is_real() && other.field.is_real() {
            ScalarField::Real
        } else {
            ScalarField::Complex
        };
        let mut out = Self::zeros(n, field);
        for i in 0..n {
            for l in 0..n {
                let a = self.get(i, l);
                if a == Complex64::ZERO {
                    continue;
                }
                for j in 0..n {
                    out.add_at(i, j, a * other.get(l, j));
                }
            }
        }
        Ok(out)
    }

    /// Kronecker product, `self` as the left (more significant) factor.
    pub fn kron(&self, other: &DenseMatrix) -> DenseMatrix {
        let n = self.side;
        let m = other.side;
        let field = if self.field.is_real() && other.field.is_real() {
            ScalarField::Real
        } else {
            ScalarField::Complex
        };
        let mut out = Self::zeros(n * m, field);
        for i in 0..n {
            for j in 0..n {
                let a = self.get(i, j);
                if a == Complex64::ZERO {
                    continue;
                }
                for p in 0..m {
                    for q in 0..m {
                        out.set(i * m + p, j * m + q, a * other.get(p, q));
                    }
                }
            }
        }
        out
    }

    /// Matrix-vector product with a complex vector.
    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.side {
            return Err(Error::DimensionMismatch {
                expected: self.side,
                got: x.len(),
            });
        }
        let n = self.side;
        let mut out = Vec::with_capacity(n);
        for row in self.entries.chunks_exact(n) {
            let mut acc = Complex64::ZERO;
            for (a, xv) in row.iter().zip(x.iter()) {
                acc += a * xv;
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Real parts of the entries, row-major.
    pub fn re_entries(&self) -> Vec<f64> {
        self.entries.iter().map(|z| z.re).collect()
    }
}
