use num_complex::Complex64;

use crate::dims::Dims;
use crate::error::{Error, Result};
use crate::field::ScalarField;

/// A Kronecker-structured query vector: one length-`d` factor per subsystem.
///
/// This is the only query shape the oracle accepts. `expand` realizes the
/// iterated Kronecker product with subsystem 1 as the leftmost factor.
#[derive(Clone, Debug, PartialEq)]
pub struct KronQueryVector {
    dims: Dims,
    field: ScalarField,
    factors: Vec<Vec<Complex64>>,
}

impl KronQueryVector {
    pub fn real(dims: Dims, factors: &[Vec<f64>]) -> Result<Self> {
        check_shape(&dims, factors.len(), factors.iter().map(|f| f.len()))?;
        Ok(KronQueryVector {
            dims,
            field: ScalarField::Real,
            factors: factors
                .iter()
                .map(|f| f.iter().map(|&x| Complex64::new(x, 0.0)).collect())
                .collect(),
        })
    }

    pub fn complex(dims: Dims, factors: Vec<Vec<Complex64>>) -> Result<Self> {
        check_shape(&dims, factors.len(), factors.iter().map(|f| f.len()))?;
        Ok(KronQueryVector {
            dims,
            field: ScalarField::Complex,
            factors,
        })
    }

    /// Standard-basis query `e_{digits}`: factor `i` is `e_{digits[i]}`.
    pub fn standard_basis(dims: Dims, digits: &[usize]) -> Result<Self> {
        if digits.len() != dims.k() {
            return Err(Error::DimensionMismatch {
                expected: dims.k(),
                got: digits.len(),
            });
        }
        let mut factors = Vec::with_capacity(dims.k());
        for &digit in digits {
            if digit >= dims.d() {
                return Err(Error::IndexOutOfRange {
                    index: digit,
                    total: dims.d(),
                });
            }
            let mut f = vec![0.0; dims.d()];
            f[digit] = 1.0;
            factors.push(f);
        }
        Self::real(dims, &factors)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn field(&self) -> ScalarField {
        self.field
    }

    pub fn factors(&self) -> &[Vec<Complex64>] {
        &self.factors
    }

    pub fn factor(&self, i: usize) -> &[Complex64] {
        &self.factors[i]
    }

    /// Coordinates of the full Kronecker product, length `D = d^k`.
    ///
    /// Coordinate `I` is the product over subsystems of `factor_i[digit_i(I)]`,
    /// with subsystem 1 as the most significant base-`d` digit.
    pub fn expand(&self) -> Vec<Complex64> {
        kron_expand(&self.factors)
    }

    /// Euclidean norm of the expanded vector, computed as the product of factor norms.
    pub fn norm(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .product()
    }
}

fn check_shape(dims: &Dims, count: usize, lens: impl Iterator<Item = usize>) -> Result<()> {
    if count != dims.k() {
        return Err(Error::DimensionMismatch {
            expected: dims.k(),
            got: count,
        });
    }
    for len in lens {
        if len != dims.d() {
            return Err(Error::DimensionMismatch {
                expected: dims.d(),
                got: len,
            });
        }
    }
    Ok(())
}

/// Iterated Kronecker product of a list of vectors, first vector most significant.
pub(crate) fn kron_expand(factors: &[Vec<Complex64>]) -> Vec<Complex64> {
    let mut acc = vec![Complex64::new(1.0, 0.0)];
    for factor in factors {
        let mut next = Vec::with_capacity(acc.len() * factor.len());
        for a in &acc {
            for b in factor {
                next.push(a * b);
            }
        }
        acc = next;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(values: &[Complex64]) -> Vec<f64> {
        values.iter().map(|z| z.re).collect()
    }

    #[test]
    fn expand_single_factor() {
        let dims = Dims::new(2, 1).unwrap();
        let q = KronQueryVector::real(dims, &[vec![3.0, 5.0]]).unwrap();
        assert_eq!(re(&q.expand()), vec![3.0, 5.0]);
    }

    #[test]
    fn expand_unit_second_factor() {
        let dims = Dims::new(2, 2).unwrap();
        let q = KronQueryVector::real(dims, &[vec![1.0, 2.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(re(&q.expand()), vec![1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn expand_two_factors() {
        let dims = Dims::new(2, 2).unwrap();
        let q = KronQueryVector::real(dims, &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(re(&q.expand()), vec![3.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn standard_basis_matches_digit_flattening() {
        let dims = Dims::new(3, 2).unwrap();
        for index in 0..dims.total() {
            let digits = dims.index_digits(index).unwrap();
            let q = KronQueryVector::standard_basis(dims, &digits).unwrap();
            let x = q.expand();
            for (i, v) in x.iter().enumerate() {
                let expected = if i == index { 1.0 } else { 0.0 };
                assert_eq!(v.re, expected);
                assert_eq!(v.im, 0.0);
            }
        }
    }

    #[test]
    fn shape_violations_rejected() {
        let dims = Dims::new(2, 2).unwrap();
        assert!(KronQueryVector::real(dims, &[vec![1.0, 2.0]]).is_err());
        assert!(KronQueryVector::real(dims, &[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
