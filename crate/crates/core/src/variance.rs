//! Exact variance formulas, closed-form bounds, sample-size calculators, and
//! an independent brute-force fourth-moment oracle.
//!
//! The central quantity is the single-sample variance of the
//! Kronecker-Hutchinson estimator. With `Ā` the average of all `2^k` partial
//! transposes of `A`, the variance of one quadratic form is
//!
//! ```text
//! Var = Σ_{S ⊊ [k]}  w^{k−|S|} · ‖tr_S(Ā)‖_F²
//! ```
//!
//! with `w = 2` for real factor vectors and `w = 1` for complex ones. The sum
//! runs over strict subsets; adding the `S = [k]` term `(tr A)²` gives the
//! second moment. The expression is exact for Gaussian factors and an upper
//! bound for Rademacher factors.
//!
//! A real Kronecker quadratic form `xᵀAx` is pointwise invariant under every
//! partial transpose of `A`, so for real queries the formula describes the
//! sample as drawn. Conjugation breaks that invariance, and for complex
//! queries the formula describes the sample averaged over the `2^k`
//! per-factor conjugation patterns — pointwise the plain form `xᴴĀx` — which
//! coincides with the plain sample exactly when `A` is fixed by all partial
//! transposes (any sum of symmetric Kronecker products). All complex moments
//! in this module refer to that transpose-fixed representative.
//!
//! The [`moment_oracle`] computes the same moments by direct enumeration of
//! the four-index expectation `E[x_I x_J x_M x_N]` using per-subsystem
//! second- and fourth-moment tensors, with its own digit arithmetic
//! throughout. It never calls the partial-trace or partial-transpose
//! routines, so it is an independent check of the formulas above.

use num_complex::Complex64;

use crate::dense::DenseMatrix;
use crate::dims::Dims;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::sampling::{QueryDistribution, RngStream};
use crate::subsystems::{
    average_partial_transposes, partial_trace, SubsystemSet, SUBSET_ENUMERATION_MAX_K,
};

/// Default cap on the number of four-index terms the oracle will enumerate.
pub const DEFAULT_ORACLE_TERM_BUDGET: u64 = 10_000_000;

/// Exact variance, bound quantities, and labels for one experiment cell.
#[derive(Clone, Debug)]
pub struct VarianceReport {
    pub second_moment: f64,
    pub variance: f64,
    pub upper_bound_no_abar: f64,
    /// `w+1` power bound for PSD input; absent when the matrix is not
    /// promised PSD.
    pub psd_worst_case: Option<f64>,
    pub field: ScalarField,
    pub dist: QueryDistribution,
}

/// Variance weight per omitted subsystem: 2 for real queries, 1 for complex.
fn weight(field: ScalarField) -> f64 {
    match field {
        ScalarField::Real => 2.0,
        ScalarField::Complex => 1.0,
    }
}

fn check_real_input(a: &DenseMatrix) -> Result<()> {
    if !a.field().is_real() {
        return Err(Error::FieldMismatch(
            "variance formulas take a real matrix; complex queries are a property of the \
             estimator, not the input"
                .into(),
        ));
    }
    Ok(())
}

fn check_subset_budget(k: usize) -> Result<()> {
    if k > SUBSET_ENUMERATION_MAX_K {
        return Err(Error::BudgetExceeded(format!(
            "subset enumeration needs k <= {SUBSET_ENUMERATION_MAX_K}, got k = {k}"
        )));
    }
    Ok(())
}

/// Sum `w^{k−|S|}·‖tr_S(M)‖_F²` over strict subsets `S ⊊ [k]`.
fn strict_subset_sum(m: &DenseMatrix, dims: &Dims, w: f64) -> Result<f64> {
    let k = dims.k();
    let full = ((1u64 << k) - 1) as u32;
    let mut acc = 0.0;
    for mask in 0u32..=full {
        if mask == full {
            continue;
        }
        let s = SubsystemSet::from_mask(k, mask)?;
        let traced = partial_trace(m, dims, &s)?;
        acc += w.powi((k - s.len()) as i32) * traced.frob_norm_sq();
    }
    Ok(acc)
}

/// Exact single-sample variance of the Kronecker-Hutchinson estimator with
/// Gaussian factor vectors; an upper bound for Rademacher factors.
///
/// Computes `Ā` and sums `w^{k−|S|}·‖tr_S(Ā)‖_F²` over strict subsets,
/// with `w = 2` (Real) or `w = 1` (Complex).
pub fn exact_variance(a: &DenseMatrix, dims: &Dims, field: ScalarField) -> Result<f64> {
    check_real_input(a)?;
    check_subset_budget(dims.k())?;
    let abar = average_partial_transposes(a, dims)?;
    strict_subset_sum(&abar, dims, weight(field))
}

/// Second moment of one sample: the subset sum over all `S ⊆ [k]`, i.e.
/// [`exact_variance`] plus the `S = [k]` term `(tr A)²`.
pub fn second_moment_formula(a: &DenseMatrix, dims: &Dims, field: ScalarField) -> Result<f64> {
    let var = exact_variance(a, dims, field)?;
    let tr = a.trace().re;
    Ok(var + tr * tr)
}

/// The looser bound that skips `Ā`: the same subset sum with `tr_S(A)` in
/// place of `tr_S(Ā)`. Always at least [`exact_variance`], with equality
/// when `A = Ā`.
pub fn variance_upper_bound_no_abar(
    a: &DenseMatrix,
    dims: &Dims,
    field: ScalarField,
) -> Result<f64> {
    check_real_input(a)?;
    check_subset_budget(dims.k())?;
    strict_subset_sum(a, dims, weight(field))
}

/// Which reading of the PSD worst-case bound to evaluate.
///
/// The proof concludes `w+1` to the `k` times `(tr A)²`; the theorem
/// statement squares the whole product instead. The proof form is tighter
/// and is the default everywhere; the statement form is kept available for
/// comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsdBoundForm {
    /// `(w+1)^k · (tr A)²` — 3^k (real) or 2^k (complex) times the squared trace.
    Proof,
    /// `((w+1)^k · tr A)²`.
    Statement,
}

/// Worst-case variance bound for PSD matrices, proof form:
/// `3^k (tr A)²` for real queries, `2^k (tr A)²` for complex ones.
pub fn psd_worst_case_bound(trace_value: f64, k: usize, field: ScalarField) -> Result<f64> {
    psd_worst_case_bound_with_form(trace_value, k, field, PsdBoundForm::Proof)
}

/// [`psd_worst_case_bound`] with an explicit [`PsdBoundForm`].
pub fn psd_worst_case_bound_with_form(
    trace_value: f64,
    k: usize,
    field: ScalarField,
    form: PsdBoundForm,
) -> Result<f64> {
    if trace_value < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "PSD bound needs a non-negative trace, got {trace_value}"
        )));
    }
    let base = weight(field) + 1.0;
    let factor = base.powi(k as i32);
    Ok(match form {
        PsdBoundForm::Proof => factor * trace_value * trace_value,
        PsdBoundForm::Statement => (factor * trace_value) * (factor * trace_value),
    })
}

/// Per-subsystem second and fourth moments of one factor distribution,
/// materialized over `[d]²` and `[d]⁴`.
///
/// The fourth-moment tensor is `m4(a,b,c,e) = E[ȳ_a y_b ȳ_c y_e]` (for real
/// distributions the conjugations are vacuous and the tensor is symmetric in
/// all four indices):
///
/// - real Gaussian: the three pair couplings `δ_ab δ_ce + δ_ac δ_be + δ_ae δ_bc`;
/// - real Rademacher: the same minus `2·[a=b=c=e]` (since `E[y⁴] = 1`);
/// - complex Gaussian: `δ_ab δ_ce + δ_ae δ_cb` (conjugated indices pair with
///   unconjugated ones);
/// - complex Rademacher: that minus `[a=b=c=e]` (since `E[|y|⁴] = 1`).
#[derive(Clone, Debug)]
pub struct MomentTensor {
    dist: QueryDistribution,
    d: usize,
    m2: Vec<f64>,
    m4: Vec<f64>,
}

impl MomentTensor {
    pub fn new(dist: QueryDistribution, d: usize) -> Self {
        let mut m2 = vec![0.0; d * d];
        for a in 0..d {
            m2[a * d + a] = 1.0;
        }
        let mut m4 = vec![0.0; d * d * d * d];
        let idx = |a: usize, b: usize, c: usize, e: usize| ((a * d + b) * d + c) * d + e;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let v = match dist {
                            QueryDistribution::RealGaussian | QueryDistribution::RealRademacher => {
                                let pairings =
                                    f(a == b && c == e) + f(a == c && b == e) + f(a == e && b == c);
                                if dist == QueryDistribution::RealRademacher
                                    && a == b
                                    && b == c
                                    && c == e
                                {
                                    pairings - 2.0
                                } else {
                                    pairings
                                }
                            }
                            QueryDistribution::ComplexGaussian
                            | QueryDistribution::ComplexRademacher => {
                                let pairings = f(a == b && c == e) + f(a == e && c == b);
                                if dist == QueryDistribution::ComplexRademacher
                                    && a == b
                                    && b == c
                                    && c == e
                                {
                                    pairings - 1.0
                                } else {
                                    pairings
                                }
                            }
                        };
                        m4[idx(a, b, c, e)] = v;
                    }
                }
            }
        }
        MomentTensor { dist, d, m2, m4 }
    }

    pub fn dist(&self) -> QueryDistribution {
        self.dist
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `E[ȳ_a y_b]`.
    #[inline]
    pub fn m2(&self, a: usize, b: usize) -> f64 {
        self.m2[a * self.d + b]
    }

    /// `E[ȳ_a y_b ȳ_c y_e]`.
    #[inline]
    pub fn m4(&self, a: usize, b: usize, c: usize, e: usize) -> f64 {
        self.m4[((a * self.d + b) * self.d + c) * self.d + e]
    }

    /// Cross-check every tensor entry against a Monte Carlo estimate over
    /// `samples` draws of one factor vector. Returns the largest absolute
    /// deviation observed (over both m2 and m4, real and imaginary parts).
    pub fn validate_monte_carlo(&self, samples: u64, stream: &RngStream) -> f64 {
        let d = self.d;
        let dims = Dims::new(d, 1).expect("single subsystem fits any cap");
        let mut m2_acc = vec![Complex64::ZERO; d * d];
        let mut m4_acc = vec![Complex64::ZERO; d * d * d * d];
        for j in 0..samples {
            let q = crate::sampling::sample_query(self.dist, dims, &stream.offset(j));
            let y = q.factor(0);
            for a in 0..d {
                for b in 0..d {
                    m2_acc[a * d + b] += y[a].conj() * y[b];
                }
            }
            for a in 0..d {
                for b in 0..d {
                    let ab = y[a].conj() * y[b];
                    for c in 0..d {
                        for e in 0..d {
                            m4_acc[((a * d + b) * d + c) * d + e] += ab * y[c].conj() * y[e];
                        }
                    }
                }
            }
        }
        let n = samples as f64;
        let mut worst = 0.0f64;
        for (acc, expect) in m2_acc.iter().zip(self.m2.iter()) {
            let est = acc / n;
            worst = worst.max((est.re - expect).abs()).max(est.im.abs());
        }
        for (acc, expect) in m4_acc.iter().zip(self.m4.iter()) {
            let est = acc / n;
            worst = worst.max((est.re - expect).abs()).max(est.im.abs());
        }
        worst
    }
}

#[inline]
fn f(cond: bool) -> f64 {
    if cond {
        1.0
    } else {
        0.0
    }
}

/// Output of the brute-force moment oracle.
#[derive(Clone, Copy, Debug)]
pub struct OracleMoments {
    /// `E[sample]`; equals `tr(A)` for every distribution.
    pub mean: f64,
    /// `E[sample²]` of the reported (real) sample value.
    pub second_moment: f64,
}

impl OracleMoments {
    pub fn variance(&self) -> f64 {
        self.second_moment - self.mean * self.mean
    }
}

/// Brute-force moment oracle with the default term budget.
pub fn moment_oracle(
    a: &DenseMatrix,
    dims: &Dims,
    dist: QueryDistribution,
) -> Result<OracleMoments> {
    moment_oracle_with_budget(a, dims, dist, DEFAULT_ORACLE_TERM_BUDGET)
}

/// Brute-force mean and second moment of one Hutchinson sample by direct
/// enumeration of index tuples against the per-subsystem moment tensors.
///
/// The mean contracts `A` against `m2` over index pairs; the second moment
/// contracts `A ⊗ A` against products of `m4` over index quadruples
/// (`d^{4k}` terms, capped by `budget`).
///
/// For real queries the sample is `xᵀAx`, which is invariant under every
/// partial transpose of `A` (swapping a subsystem's row/column digits
/// permutes identical products `x_I x_J`), so the raw entries are contracted
/// directly. A complex query breaks that invariance; the quantity the exact
/// formulas describe is the conjugation-averaged sample
/// `2^{−k} Σ_V x^{(V)ᴴ} A x^{(V)}` (conjugating the factors in `V` on both
/// sides), which pointwise equals the plain sample on the transpose-averaged
/// matrix — and *is* the plain sample whenever `A` is fixed by all partial
/// transposes, as every sum of symmetric Kronecker products is. The oracle
/// therefore contracts digit-swap-averaged entries in the complex case,
/// using its own digit arithmetic throughout; it never calls the
/// partial-trace/transpose routines it is used to check.
pub fn moment_oracle_with_budget(
    a: &DenseMatrix,
    dims: &Dims,
    dist: QueryDistribution,
    budget: u64,
) -> Result<OracleMoments> {
    check_real_input(a)?;
    if a.side() != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            got: a.side(),
        });
    }
    let total = dims.total() as u64;
    let terms = total
        .checked_pow(4)
        .ok_or_else(|| Error::BudgetExceeded("d^{4k} overflows".into()))?;
    if terms > budget {
        return Err(Error::BudgetExceeded(format!(
            "oracle needs {terms} terms, budget is {budget}"
        )));
    }

    let d = dims.d();
    let k = dims.k();
    let n = dims.total();
    let tensor = MomentTensor::new(dist, d);
    let raw = a.re_entries();
    let digits = dims.digit_table();

    let entries = if dist.field().is_real() {
        raw
    } else {
        digit_swap_average(&raw, n, d, k, &digits)
    };

    // mean = Σ_{I,J} A_IJ · Π_i m2(I_i, J_i)
    let mut mean = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut coeff = 1.0;
            for s in 0..k {
                coeff *= tensor.m2(digits[i * k + s], digits[j * k + s]);
                if coeff == 0.0 {
                    break;
                }
            }
            if coeff != 0.0 {
                mean += entries[i * n + j] * coeff;
            }
        }
    }

    // second moment = Σ_{I,J,M,N} A_IJ A_MN · Π_i m4(I_i, J_i, M_i, N_i)
    let mut second_moment = 0.0;
    for i in 0..n {
        for j in 0..n {
            let a_ij = entries[i * n + j];
            if a_ij == 0.0 {
                continue;
            }
            for m in 0..n {
                for nn in 0..n {
                    let a_mn = entries[m * n + nn];
                    if a_mn == 0.0 {
                        continue;
                    }
                    let mut coeff = 1.0;
                    for s in 0..k {
                        coeff *= tensor.m4(
                            digits[i * k + s],
                            digits[j * k + s],
                            digits[m * k + s],
                            digits[nn * k + s],
                        );
                        if coeff == 0.0 {
                            break;
                        }
                    }
                    second_moment += a_ij * a_mn * coeff;
                }
            }
        }
    }
    Ok(OracleMoments {
        mean,
        second_moment,
    })
}

/// Average the entry array over all `2^k` per-subsystem row/column digit
/// swaps. Local digit arithmetic only; this is the oracle's own transpose
/// averaging, kept separate from the subsystem-operator implementations.
fn digit_swap_average(entries: &[f64], n: usize, d: usize, k: usize, digits: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    let patterns = 1u32 << k;
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for pattern in 0..patterns {
                let mut src_row = 0usize;
                let mut src_col = 0usize;
                for s in 0..k {
                    let (mut ri, mut ci) = (digits[i * k + s], digits[j * k + s]);
                    if (pattern >> s) & 1 == 1 {
                        std::mem::swap(&mut ri, &mut ci);
                    }
                    src_row = src_row * d + ri;
                    src_col = src_col * d + ci;
                }
                acc += entries[src_row * n + src_col];
            }
            out[i * n + j] = acc / patterns as f64;
        }
    }
    out
}

/// Samples needed for the all-ones hard instance to reach standard deviation
/// `ε·tr(A)`: `((3−2/d)^k − 1)/ε²` for real queries and `((2−1/d)^k − 1)/ε²`
/// for complex ones. The exact formula value is returned, not an asymptotic.
pub fn all_ones_lower_bound_samples(
    d: usize,
    k: usize,
    eps: f64,
    field: ScalarField,
) -> Result<f64> {
    if d < 1 {
        return Err(Error::InvalidDims { d, k });
    }
    if eps <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let d = d as f64;
    let base = match field {
        ScalarField::Real => 3.0 - 2.0 / d,
        ScalarField::Complex => 2.0 - 1.0 / d,
    };
    Ok((base.powi(k as i32) - 1.0) / (eps * eps))
}

/// Expected squared Frobenius norm of a partial trace of a Gaussian outer
/// product: `E‖tr_S(ggᵀ)‖_F² = d^k (d^{k−s} + d^s + 1)` for `|S| = s`.
pub fn rankone_expected_partial_trace_norm(d: usize, k: usize, s: usize) -> Result<f64> {
    if s > k {
        return Err(Error::InvalidArgument(format!(
            "subset size {s} exceeds k = {k}"
        )));
    }
    let d = d as f64;
    let k_i = k as i32;
    let s_i = s as i32;
    Ok(d.powi(k_i) * (d.powi(k_i - s_i) + d.powi(s_i) + 1.0))
}

/// Sample budgets for estimating the trace of a random rank-one matrix.
#[derive(Clone, Copy, Debug)]
pub struct RankOneBudget {
    /// `(2+1/d)^k/ε²` for real queries, `(1+1/d)^k/ε²` for complex ones.
    pub leading_order: f64,
    /// The explicit constant-1152 figure from the concentration argument.
    pub paper_constant: f64,
}

/// Leading-order and explicit-constant sample budgets for random rank-one
/// trace estimation.
pub fn rankone_variance_budget(
    d: usize,
    k: usize,
    eps: f64,
    field: ScalarField,
) -> Result<RankOneBudget> {
    if d < 1 {
        return Err(Error::InvalidDims { d, k });
    }
    if eps <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let base = match field {
        ScalarField::Real => 2.0 + 1.0 / d as f64,
        ScalarField::Complex => 1.0 + 1.0 / d as f64,
    };
    let leading_order = base.powi(k as i32) / (eps * eps);
    Ok(RankOneBudget {
        leading_order,
        paper_constant: 1152.0 * leading_order,
    })
}

/// Mean squared error of the best estimator that has seen `q` adaptive
/// queries against a Kronecker product of Wishart(d) factors:
/// `(d⁴+2d²)^k − (d⁴+2d²−2(d−q)²)^k`. At `q = 0` this is the unconditional
/// variance of `Π tr(W_i)`; at `q = d` it vanishes.
pub fn wishart_mse(d: usize, k: usize, q: usize) -> Result<f64> {
    if q > d {
        return Err(Error::InvalidArgument(format!("q = {q} exceeds d = {d}")));
    }
    let df = d as f64;
    let qf = q as f64;
    let full = df.powi(4) + 2.0 * df * df;
    let hidden = full - 2.0 * (df - qf) * (df - qf);
    Ok(full.powi(k as i32) - hidden.powi(k as i32))
}

/// Query lower bound for any adaptive algorithm reaching standard deviation
/// `ε·tr(A)`: `4√k/(√2·ε)`.
///
/// The argument behind the formula is valid for `ε` up to 1/2; larger values
/// are rejected.
pub fn adaptive_query_lower_bound(k: usize, eps: f64) -> Result<f64> {
    if k < 1 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if eps <= 0.0 || eps > 0.5 {
        return Err(Error::InvalidArgument(format!(
            "eps must lie in (0, 1/2], got {eps}"
        )));
    }
    Ok(4.0 * (k as f64).sqrt() / (std::f64::consts::SQRT_2 * eps))
}

/// Samples needed to bring the estimator standard deviation to `ε·|tr|`:
/// `ceil(variance/(ε²·trace²))`, floored at one sample.
pub fn required_samples(variance: f64, trace_value: f64, eps: f64) -> Result<u64> {
    if trace_value == 0.0 {
        return Err(Error::InvalidArgument(
            "required_samples needs a nonzero trace".into(),
        ));
    }
    if eps <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if variance < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "variance must be non-negative, got {variance}"
        )));
    }
    let raw = variance / (eps * eps * trace_value * trace_value);
    Ok((raw.ceil() as u64).max(1))
}

/// Frobenius norm of `A − Ā`: zero exactly when every partial transpose
/// fixes `A`, the regime where the exact complex-query formula describes the
/// plain (un-averaged) sample.
pub fn average_fixedness_gap(a: &DenseMatrix, dims: &Dims) -> Result<f64> {
    let abar = average_partial_transposes(a, dims)?;
    Ok(abar.sub(a)?.frob_norm_sq().sqrt())
}

/// Assemble the variance report for one experiment cell.
///
/// `promise_psd` controls whether the PSD worst-case bound is attached; the
/// report never tests definiteness itself.
pub fn variance_report(
    a: &DenseMatrix,
    dims: &Dims,
    dist: QueryDistribution,
    promise_psd: bool,
) -> Result<VarianceReport> {
    let field = dist.field();
    let variance = exact_variance(a, dims, field)?;
    let tr = a.trace().re;
    let second_moment = variance + tr * tr;
    let upper_bound_no_abar = variance_upper_bound_no_abar(a, dims, field)?;
    let psd_worst_case = if promise_psd && tr >= 0.0 {
        Some(psd_worst_case_bound(tr, dims.k(), field)?)
    } else {
        None
    };
    Ok(VarianceReport {
        second_moment,
        variance,
        upper_bound_no_abar,
        psd_worst_case,
        field,
        dist,
    })
}
