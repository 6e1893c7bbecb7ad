//! Partial trace, partial transpose, averaged partial transposes, and
//! post-measurement reduced density matrices on explicit matrices.
//!
//! Everything here works by base-`d` digit arithmetic on flattened indices;
//! no identity Kronecker factors are ever materialized. All operations are
//! pure functions on immutable inputs.

use num_complex::Complex64;

use crate::dense::DenseMatrix;
use crate::dims::Dims;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::query::kron_expand;

/// Largest `k` for which `2^k` partial-transpose enumeration is attempted.
pub const SUBSET_ENUMERATION_MAX_K: usize = 16;

/// A subset of the subsystems `{1..k}`, iterated in ascending order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SubsystemSet {
    k: usize,
    mask: u32,
}

impl SubsystemSet {
    /// Build from 1-based subsystem indices.
    pub fn new(k: usize, members: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        for &m in members {
            if m < 1 || m > k {
                return Err(Error::SubsystemOutOfRange { subsystem: m, k });
            }
            mask |= 1 << (m - 1);
        }
        Ok(SubsystemSet { k, mask })
    }

    /// Build from a bitmask where bit `i` selects subsystem `i+1`.
    pub fn from_mask(k: usize, mask: u32) -> Result<Self> {
        if k < 32 && mask >> k != 0 {
            return Err(Error::SubsystemOutOfRange {
                subsystem: k + 1,
                k,
            });
        }
        Ok(SubsystemSet { k, mask })
    }

    pub fn empty(k: usize) -> Self {
        SubsystemSet { k, mask: 0 }
    }

    pub fn full(k: usize) -> Self {
        SubsystemSet {
            k,
            mask: ((1u64 << k) - 1) as u32,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    /// Cardinality `|S|`.
    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    /// Membership of the 1-based subsystem `i`.
    pub fn contains(&self, i: usize) -> bool {
        i >= 1 && i <= self.k && (self.mask >> (i - 1)) & 1 == 1
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=self.k).filter(move |&i| self.contains(i))
    }
}

fn check_side(a: &DenseMatrix, dims: &Dims) -> Result<()> {
    if a.side() != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            got: a.side(),
        });
    }
    Ok(())
}

/// Partial trace `tr_S(A)`, summing out the subsystems in `S`.
///
/// Entry `(I′, J′)` of the result sums `A[embed(I′,t), embed(J′,t)]` over all
/// digit assignments `t` on the traced subsystems, with the same `t` in the
/// row and column. Surviving subsystems keep their relative order and are
/// renumbered `1..k-|S|`.
pub fn partial_trace(a: &DenseMatrix, dims: &Dims, s: &SubsystemSet) -> Result<DenseMatrix> {
    check_side(a, dims)?;
    if s.k() != dims.k() {
        return Err(Error::DimensionMismatch {
            expected: dims.k(),
            got: s.k(),
        });
    }
    if s.is_empty() {
        return Ok(a.clone());
    }
    let total = dims.total();
    let k = dims.k();
    let d = dims.d();
    let out_side = total / d.pow(s.len() as u32);
    let digits = dims.digit_table();

    // For each global index: its digits packed on S (trace key) and the
    // flattened survivor index.
    let mut trace_key = vec![0usize; total];
    let mut survivor = vec![0usize; total];
    for i in 0..total {
        let mut key = 0usize;
        let mut surv = 0usize;
        for sub in 0..k {
            let digit = digits[i * k + sub];
            if s.contains(sub + 1) {
                key = key * d + digit;
            } else {
                surv = surv * d + digit;
            }
        }
        trace_key[i] = key;
        survivor[i] = surv;
    }

    let mut out = DenseMatrix::zeros(out_side, a.field());
    for i in 0..total {
        for j in 0..total {
            if trace_key[i] == trace_key[j] {
                out.add_at(survivor[i], survivor[j], a.get(i, j));
            }
        }
    }
    Ok(out)
}

/// Partial transpose `A^{T_V}`, transposing only the subsystems in `V`.
///
/// The output entry with row digits `r` and column digits `c` is taken from
/// `A` at digits with `(r_i, c_i)` swapped for every `i ∈ V`. Transposing a
/// single subsystem twice is the identity, and single-subsystem transposes
/// commute.
pub fn partial_transpose(a: &DenseMatrix, dims: &Dims, v: &SubsystemSet) -> Result<DenseMatrix> {
    check_side(a, dims)?;
    if v.k() != dims.k() {
        return Err(Error::DimensionMismatch {
            expected: dims.k(),
            got: v.k(),
        });
    }
    if v.is_empty() {
        return Ok(a.clone());
    }
    let total = dims.total();
    let k = dims.k();
    let d = dims.d();
    let digits = dims.digit_table();

    let mut out = DenseMatrix::zeros(total, a.field());
    for i in 0..total {
        for j in 0..total {
            let mut src_row = 0usize;
            let mut src_col = 0usize;
            for sub in 0..k {
                let (ri, ci) = (digits[i * k + sub], digits[j * k + sub]);
                let (sr, sc) = if v.contains(sub + 1) {
                    (ci, ri)
                } else {
                    (ri, ci)
                };
                src_row = src_row * d + sr;
                src_col = src_col * d + sc;
            }
            out.set(i, j, a.get(src_row, src_col));
        }
    }
    Ok(out)
}

/// `Ā = 2^{-k} Σ_{V ⊆ [k]} A^{T_V}`, the average of all partial transposes.
///
/// Computed by direct `2^k` enumeration. The result is fixed by every partial
/// transpose, hence the operation is idempotent.
pub fn average_partial_transposes(a: &DenseMatrix, dims: &Dims) -> Result<DenseMatrix> {
    check_side(a, dims)?;
    let k = dims.k();
    if k > SUBSET_ENUMERATION_MAX_K {
        return Err(Error::BudgetExceeded(format!(
            "2^k enumeration needs k <= {SUBSET_ENUMERATION_MAX_K}, got k = {k}"
        )));
    }
    let mut acc = DenseMatrix::zeros(dims.total(), a.field());
    for mask in 0u32..(1u32 << k) {
        let v = SubsystemSet::from_mask(k, mask)?;
        let t = partial_transpose(a, dims, &v)?;
        acc = acc.add(&t)?;
    }
    Ok(acc.scale(1.0 / (1u64 << k) as f64))
}

/// Measured prefix for a post-measurement reduced density matrix: the first
/// `i` factor vectors of a query. `i = 0` denotes the empty measurement.
#[derive(Clone, Debug)]
pub struct PmrdmPrefix {
    factors: Vec<Vec<Complex64>>,
}

impl PmrdmPrefix {
    pub fn empty() -> Self {
        PmrdmPrefix {
            factors: Vec::new(),
        }
    }

    pub fn real(factors: &[Vec<f64>]) -> Self {
        PmrdmPrefix {
            factors: factors
                .iter()
                .map(|f| f.iter().map(|&x| Complex64::new(x, 0.0)).collect())
                .collect(),
        }
    }

    pub fn complex(factors: Vec<Vec<Complex64>>) -> Self {
        PmrdmPrefix { factors }
    }

    /// Number of measured leading subsystems.
    pub fn measured(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Vec<Complex64>] {
        &self.factors
    }
}

/// Post-measurement reduced density matrix
/// `(x_{:i} ⊗ I^{⊗(k−i)})ᵀ A (x_{:i} ⊗ I^{⊗(k−i)})` for a measured prefix of
/// the first `i` subsystems. `i = k` yields the 1×1 matrix `[xᵀAx]`.
///
/// The sandwich uses the plain transpose (no conjugation), as the defining
/// identity does; prefixes are only measured on leading subsystems.
pub fn pmrdm(a: &DenseMatrix, dims: &Dims, prefix: &PmrdmPrefix) -> Result<DenseMatrix> {
    check_side(a, dims)?;
    let i = prefix.measured();
    if i > dims.k() {
        return Err(Error::DimensionMismatch {
            expected: dims.k(),
            got: i,
        });
    }
    for f in prefix.factors() {
        if f.len() != dims.d() {
            return Err(Error::DimensionMismatch {
                expected: dims.d(),
                got: f.len(),
            });
        }
    }
    if i == 0 {
        return Ok(a.clone());
    }
    let w = kron_expand(prefix.factors()); // length d^i
    let total = dims.total();
    let m = total / w.len();

    // Right contraction: mid[r, b] = Σ_q w_q A[r, q·m + b]
    let mut mid = vec![Complex64::ZERO; total * m];
    for r in 0..total {
        for (q, wq) in w.iter().enumerate() {
            if *wq == Complex64::ZERO {
                continue;
            }
            for b in 0..m {
                mid[r * m + b] += wq * a.get(r, q * m + b);
            }
        }
    }
    // Left contraction: out[a, b] = Σ_p w_p mid[p·m + a, b]
    let field = if a.field().is_real() && w.iter().all(|z| z.im == 0.0) {
        ScalarField::Real
    } else {
        ScalarField::Complex
    };
    let mut out = DenseMatrix::zeros(m, field);
    for (p, wp) in w.iter().enumerate() {
        if *wp == Complex64::ZERO {
            continue;
        }
        for row in 0..m {
            for col in 0..m {
                out.add_at(row, col, wp * mid[(p * m + row) * m + col]);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dims22() -> Dims {
        Dims::new(2, 2).unwrap()
    }

    #[test]
    fn empty_trace_is_identity_map() {
        let dims = dims22();
        let a = DenseMatrix::from_real(4, &(0..16).map(|x| x as f64).collect::<Vec<_>>()).unwrap();
        let out = partial_trace(&a, &dims, &SubsystemSet::empty(2)).unwrap();
        assert_eq!(out, a);
    }

    #[test]
    fn trace_out_first_subsystem_of_kron() {
        // A = B ⊗ C, tr_{1}(A) = tr(B)·C
        let dims = dims22();
        let b = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let c = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let a = b.kron(&c);
        let out = partial_trace(&a, &dims, &SubsystemSet::new(2, &[1]).unwrap()).unwrap();
        let expected = c.scale(5.0);
        assert_eq!(out, expected);
    }

    #[test]
    fn full_trace_of_identity() {
        let dims = dims22();
        let out = partial_trace(&DenseMatrix::identity(4), &dims, &SubsystemSet::full(2)).unwrap();
        assert_eq!(out.side(), 1);
        assert_relative_eq!(out.get(0, 0).re, 4.0);
    }

    #[test]
    fn partial_transpose_examples() {
        let dims = dims22();
        let a = DenseMatrix::from_real(4, &(1..=16).map(|x| x as f64).collect::<Vec<_>>()).unwrap();

        let v_empty = partial_transpose(&a, &dims, &SubsystemSet::empty(2)).unwrap();
        assert_eq!(v_empty, a);

        let v_full = partial_transpose(&a, &dims, &SubsystemSet::full(2)).unwrap();
        assert_eq!(v_full, a.transpose());

        let v1 = partial_transpose(&a, &dims, &SubsystemSet::new(2, &[1]).unwrap()).unwrap();
        let expected = DenseMatrix::from_rows(&[
            vec![1.0, 2.0, 9.0, 10.0],
            vec![5.0, 6.0, 13.0, 14.0],
            vec![3.0, 4.0, 11.0, 12.0],
            vec![7.0, 8.0, 15.0, 16.0],
        ])
        .unwrap();
        assert_eq!(v1, expected);
    }

    #[test]
    fn transpose_of_symmetric_factor_is_identity() {
        let dims = dims22();
        let b = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let c = DenseMatrix::from_rows(&[vec![5.0, 1.0], vec![1.0, 7.0]]).unwrap(); // symmetric
        let a = b.kron(&c);
        let out = partial_transpose(&a, &dims, &SubsystemSet::new(2, &[2]).unwrap()).unwrap();
        assert_eq!(out, a);
    }

    #[test]
    fn averaged_transposes_single_entry() {
        // One nonzero entry at row digits (0,1), col digits (1,0) spreads to
        // the four digit-swapped positions with weight 1/4.
        let dims = dims22();
        let mut a = DenseMatrix::zeros(4, ScalarField::Real);
        a.set(1, 2, Complex64::new(1.0, 0.0));
        let abar = average_partial_transposes(&a, &dims).unwrap();
        let quarter = 0.25;
        assert_relative_eq!(abar.get(1, 2).re, quarter);
        assert_relative_eq!(abar.get(3, 0).re, quarter);
        assert_relative_eq!(abar.get(0, 3).re, quarter);
        assert_relative_eq!(abar.get(2, 1).re, quarter);
        assert_relative_eq!(abar.frob_norm_sq(), 4.0 * quarter * quarter);
    }

    #[test]
    fn averaged_transposes_symmetric_kron_is_fixed() {
        let dims = dims22();
        let s1 = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 5.0]]).unwrap();
        let s2 = DenseMatrix::from_rows(&[vec![3.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        let a = s1.kron(&s2);
        let abar = average_partial_transposes(&a, &dims).unwrap();
        assert!(abar.sub(&a).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn k1_average_is_classical_symmetrization() {
        let dims = Dims::new(3, 1).unwrap();
        let a = DenseMatrix::from_real(3, &(0..9).map(|x| x as f64).collect::<Vec<_>>()).unwrap();
        let abar = average_partial_transposes(&a, &dims).unwrap();
        let sym = a.add(&a.transpose()).unwrap().scale(0.5);
        assert!(abar.sub(&sym).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn pmrdm_examples() {
        let dims = dims22();
        let a = DenseMatrix::identity(4);

        let out = pmrdm(&a, &dims, &PmrdmPrefix::empty()).unwrap();
        assert_eq!(out, a);

        // i = k, all-ones factors: [xᵀx] = d^k
        let out = pmrdm(
            &a,
            &dims,
            &PmrdmPrefix::real(&[vec![1.0, 1.0], vec![1.0, 1.0]]),
        )
        .unwrap();
        assert_eq!(out.side(), 1);
        assert_relative_eq!(out.get(0, 0).re, 4.0);

        // prefix x1 = (1,2): (x1 ⊗ I)ᵀ (x1 ⊗ I) = ‖x1‖² I
        let out = pmrdm(&a, &dims, &PmrdmPrefix::real(&[vec![1.0, 2.0]])).unwrap();
        assert!(
            out.sub(&DenseMatrix::identity(2).scale(5.0))
                .unwrap()
                .max_abs()
                < 1e-12
        );
    }

    #[test]
    fn subsystem_set_validation() {
        assert!(SubsystemSet::new(2, &[0]).is_err());
        assert!(SubsystemSet::new(2, &[3]).is_err());
        let s = SubsystemSet::new(3, &[3, 1]).unwrap();
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(s.len(), 2);
    }
}
