use crate::error::{Error, Result};

/// Default cap on the total dimension `d^k`, keeping dense intermediates tractable.
pub const DEFAULT_TOTAL_DIM_CAP: u64 = 4096;

/// Problem shape: `k` subsystems of uniform dimension `d`, total dimension `D = d^k`.
///
/// Subsystem 1 is the leftmost Kronecker factor, i.e. the most significant
/// base-`d` digit of a flattened index. Every module shares this convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    d: usize,
    k: usize,
    total: usize,
}

impl Dims {
    /// Construct with the default total-dimension cap of 4096.
    pub fn new(d: usize, k: usize) -> Result<Self> {
        Self::with_cap(d, k, DEFAULT_TOTAL_DIM_CAP)
    }

    /// Construct with an explicit cap on `d^k`.
    pub fn with_cap(d: usize, k: usize, cap: u64) -> Result<Self> {
        if d < 1 || k < 1 {
            return Err(Error::InvalidDims { d, k });
        }
        let total = (d as u64)
            .checked_pow(k as u32)
            .ok_or(Error::DimCapExceeded {
                total: u64::MAX,
                cap,
            })?;
        if total > cap {
            return Err(Error::DimCapExceeded { total, cap });
        }
        Ok(Dims {
            d,
            k,
            total: total as usize,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Total dimension `D = d^k`.
    pub fn total(&self) -> usize {
        self.total
    }

    /// Base-`d` digits of a global index, subsystem 1 first (most significant).
    pub fn index_digits(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.total {
            return Err(Error::IndexOutOfRange {
                index,
                total: self.total,
            });
        }
        let mut digits = vec![0usize; self.k];
        let mut rem = index;
        for slot in digits.iter_mut().rev() {
            *slot = rem % self.d;
            rem /= self.d;
        }
        Ok(digits)
    }

    /// Inverse of [`index_digits`](Self::index_digits).
    pub fn digits_to_index(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: digits.len(),
            });
        }
        let mut index = 0usize;
        for &digit in digits {
            if digit >= self.d {
                return Err(Error::IndexOutOfRange {
                    index: digit,
                    total: self.d,
                });
            }
            index = index * self.d + digit;
        }
        Ok(index)
    }

    /// Flat digit table: entry `i*k + s` is the digit of global index `i` at subsystem `s+1`.
    pub(crate) fn digit_table(&self) -> Vec<usize> {
        let mut table = vec![0usize; self.total * self.k];
        for i in 0..self.total {
            let mut rem = i;
            for s in (0..self.k).rev() {
                table[i * self.k + s] = rem % self.d;
                rem /= self.d;
            }
        }
        table
    }
}
