//! The invariant battery behind `krontrace verify`: every cross-module
//! identity the library rests on, run at fixed seeds with per-invariant
//! status and the worst observed deviation.
//!
//! `fast` keeps Monte Carlo sizes small enough to finish within a minute;
//! `full` raises sample counts and adds the larger Gaussian-exactness shape.

use std::str::FromStr;
use std::time::{Duration, Instant};

use krontrace::dense::DenseMatrix;
use krontrace::dims::Dims;
use krontrace::estimators::{
    exact_kron_recovery, kron_hutchinson, rank_one_exact_trace, simulate_complex_query,
};
use krontrace::linalg::min_symmetric_eigenvalue;
use krontrace::operator::KronOperator;
use krontrace::sampling::{sample_gaussian_vector, sample_query, QueryDistribution, RngStream};
use krontrace::subsystems::{
    average_partial_transposes, partial_trace, partial_transpose, pmrdm, PmrdmPrefix, SubsystemSet,
};
use krontrace::variance::{
    exact_variance, moment_oracle, psd_worst_case_bound, rankone_expected_partial_trace_norm,
    variance_upper_bound_no_abar, wishart_mse, MomentTensor,
};
use krontrace::ScalarField;

use crate::config::{ExperimentConfig, MatrixSpec};
use crate::emit::rows_to_csv;
use crate::runner::{run_config, RunMode};
use crate::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Depth {
    Fast,
    Full,
}

impl FromStr for Depth {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fast" => Ok(Depth::Fast),
            "full" => Ok(Depth::Full),
            other => Err(CliError::Config(format!(
                "unknown verify depth {other:?}, expected fast or full"
            ))),
        }
    }
}

/// Outcome of one invariant.
#[derive(Clone, Debug)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub pass: bool,
    /// Worst deviation observed, in the units of the check's tolerance.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub checks: Vec<InvariantCheck>,
    pub elapsed: Duration,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.pass { "PASS" } else { "FAIL" };
            out.push_str(&format!(
                "{status}  {:<44} worst {:>12.3e}  tol {:>9.1e}  {}\n",
                c.name, c.worst, c.tolerance, c.detail
            ));
        }
        let passed = self.checks.iter().filter(|c| c.pass).count();
        out.push_str(&format!(
            "{passed}/{} invariants pass in {:.2?}\n",
            self.checks.len(),
            self.elapsed
        ));
        out
    }
}

fn record(
    checks: &mut Vec<InvariantCheck>,
    name: &'static str,
    worst: f64,
    tolerance: f64,
    detail: String,
) {
    checks.push(InvariantCheck {
        name,
        pass: worst <= tolerance,
        worst,
        tolerance,
        detail,
    });
}

fn random_matrix(side: usize, seed: u64) -> DenseMatrix {
    let g = sample_gaussian_vector(side * side, &RngStream::new(seed, 0));
    DenseMatrix::from_real(side, &g).unwrap()
}

fn shapes(depth: Depth) -> Vec<(usize, usize)> {
    match depth {
        Depth::Fast => vec![(2, 1), (2, 2), (2, 3)],
        Depth::Full => vec![(2, 1), (2, 2), (2, 3), (3, 2)],
    }
}

/// Run the whole battery.
pub fn verify_suite(depth: Depth) -> VerifyReport {
    let start = Instant::now();
    let mut checks = Vec::new();

    check_apply_matches_materialize(&mut checks);
    check_query_accounting(&mut checks);
    check_subsystem_identities(&mut checks, depth);
    check_psd_partial_trace(&mut checks);
    check_pmrdm_trace_link(&mut checks);
    check_abar_idempotent(&mut checks);
    check_unbiasedness(&mut checks);
    check_estimator_determinism(&mut checks);
    check_recovery(&mut checks);
    check_rank_one(&mut checks);
    check_complex_simulation(&mut checks);
    check_moment_tensors(&mut checks, depth);
    check_gaussian_exactness(&mut checks, depth);
    check_rademacher_domination(&mut checks);
    check_upper_bound_ordering(&mut checks);
    check_psd_chain(&mut checks);
    check_wishart_mse_monte_carlo(&mut checks, depth);
    check_rankone_norm_monte_carlo(&mut checks, depth);
    check_runner_reproducibility(&mut checks);

    VerifyReport {
        checks,
        elapsed: start.elapsed(),
    }
}

fn check_apply_matches_materialize(checks: &mut Vec<InvariantCheck>) {
    let dims = Dims::new(2, 2).unwrap();
    let ops = [
        KronOperator::explicit_dense(dims, random_matrix(4, 201)).unwrap(),
        KronOperator::kron_factors(dims, vec![random_matrix(2, 202), random_matrix(2, 203)])
            .unwrap(),
        KronOperator::sum_of_kron(
            dims,
            vec![
                vec![random_matrix(2, 204), random_matrix(2, 205)],
                vec![random_matrix(2, 206), random_matrix(2, 207)],
            ],
        )
        .unwrap(),
        KronOperator::rank_one(dims, sample_gaussian_vector(4, &RngStream::new(208, 0))).unwrap(),
        KronOperator::all_ones(dims),
        KronOperator::wishart(dims, 209),
    ];
    let mut worst = 0.0f64;
    for (i, op) in ops.iter().enumerate() {
        let q = sample_query(
            QueryDistribution::RealGaussian,
            dims,
            &RngStream::new(210, i as u64),
        );
        let via_oracle = op.apply(&q).unwrap();
        let direct = op.materialize().unwrap().matvec(&q.expand()).unwrap();
        for (a, b) in via_oracle.iter().zip(direct.iter()) {
            worst = worst.max((a - b).norm());
        }
    }
    record(
        checks,
        "apply == materialize . expand",
        worst,
        1e-12,
        "6 representations".into(),
    );
}

fn check_query_accounting(checks: &mut Vec<InvariantCheck>) {
    let dims = Dims::new(2, 2).unwrap();
    let op = KronOperator::wishart(dims, 220);
    let q = sample_query(
        QueryDistribution::RealGaussian,
        dims,
        &RngStream::new(221, 0),
    );
    for _ in 0..57 {
        op.apply(&q).unwrap();
    }
    let worst = (op.query_count() as f64 - 57.0).abs();
    record(
        checks,
        "query_count == number of applies",
        worst,
        0.0,
        "57 applies".into(),
    );
}

fn check_subsystem_identities(checks: &mut Vec<InvariantCheck>, depth: Depth) {
    let mut worst_trace = 0.0f64;
    let mut worst_frob = 0.0f64;
    let mut worst_tr_of_pt = 0.0f64;
    for (d, k) in shapes(depth) {
        let dims = Dims::new(d, k).unwrap();
        let a = random_matrix(dims.total(), 230 + (d * 10 + k) as u64);
        for mask in 0u32..(1u32 << k) {
            let s = SubsystemSet::from_mask(k, mask).unwrap();
            let traced = partial_trace(&a, &dims, &s).unwrap();
            worst_trace = worst_trace
                .max((traced.trace().re - a.trace().re).abs() / a.trace().re.abs().max(1.0));
            let t = partial_transpose(&a, &dims, &s).unwrap();
            worst_frob =
                worst_frob.max((t.frob_norm_sq() - a.frob_norm_sq()).abs() / a.frob_norm_sq());
        }
        for i in 1..=k {
            let s = SubsystemSet::new(k, &[i]).unwrap();
            let t = partial_transpose(&a, &dims, &s).unwrap();
            let lhs = partial_trace(&t, &dims, &s).unwrap();
            let rhs = partial_trace(&a, &dims, &s).unwrap();
            worst_tr_of_pt = worst_tr_of_pt.max(lhs.sub(&rhs).unwrap().max_abs());
        }
    }
    record(
        checks,
        "tr(tr_S(A)) == tr(A)",
        worst_trace,
        1e-12,
        "all subsets".into(),
    );
    record(
        checks,
        "||A^{T_V}||_F == ||A||_F",
        worst_frob,
        1e-12,
        "all subsets, relative".into(),
    );
    record(
        checks,
        "tr_i(A^{T_i}) == tr_i(A)",
        worst_tr_of_pt,
        1e-12,
        "single subsystems".into(),
    );

    // kron-sum-of-frob at d=2, k=2
    let dmat = random_matrix(4, 240);
    let c = random_matrix(2, 241);
    let e = random_matrix(2, 242);
    let mut lhs = 0.0;
    for i_hat in 0..2usize {
        for j_hat in 0..2usize {
            for row in 0..2usize {
                for col in 0..2usize {
                    let mut acc = 0.0;
                    for p in 0..2usize {
                        for q in 0..2usize {
                            acc += c.get(p, row).re
                                * dmat.get(p * 2 + i_hat, q * 2 + j_hat).re
                                * e.get(q, col).re;
                        }
                    }
                    lhs += acc * acc;
                }
            }
        }
    }
    let mut rhs = 0.0;
    for row in 0..2usize {
        for ei in 0..2usize {
            for col in 0..2usize {
                for ej in 0..2usize {
                    let mut acc = 0.0;
                    for p in 0..2usize {
                        for q in 0..2usize {
                            acc += c.get(p, row).re
                                * dmat.get(p * 2 + ei, q * 2 + ej).re
                                * e.get(q, col).re;
                        }
                    }
                    rhs += acc * acc;
                }
            }
        }
    }
    record(
        checks,
        "sum of basis sandwiches == identity sandwich",
        (lhs - rhs).abs() / rhs.max(1.0),
        1e-12,
        "Frobenius identity, d=2 k=2".into(),
    );
}

fn check_psd_partial_trace(checks: &mut Vec<InvariantCheck>) {
    let mut worst = 0.0f64;
    for (d, k) in [(2usize, 2usize), (2, 3), (3, 2)] {
        let dims = Dims::new(d, k).unwrap();
        let m = random_matrix(dims.total(), 250 + (d * 10 + k) as u64);
        let a = m.transpose().matmul(&m).unwrap();
        let floor = a.frob_norm_sq().sqrt();
        for mask in 0u32..(1u32 << k) {
            let s = SubsystemSet::from_mask(k, mask).unwrap();
            let traced = partial_trace(&a, &dims, &s).unwrap();
            let min = min_symmetric_eigenvalue(&traced).unwrap();
            worst = worst.max(-min / floor);
        }
    }
    record(
        checks,
        "tr_S preserves PSD",
        worst,
        1e-10,
        "min eig >= -tol * ||A||_F".into(),
    );
}

fn check_pmrdm_trace_link(checks: &mut Vec<InvariantCheck>) {
    let dims = Dims::new(2, 3).unwrap();
    let a = random_matrix(8, 260);
    let mut worst = 0.0f64;
    for i in 0..=3usize {
        let factors: Vec<Vec<f64>> = (0..i)
            .map(|j| sample_gaussian_vector(2, &RngStream::new(261, j as u64)))
            .collect();
        let reduced = pmrdm(&a, &dims, &PmrdmPrefix::real(&factors)).unwrap();
        let tail: Vec<usize> = (i + 1..=3).collect();
        let traced = partial_trace(&a, &dims, &SubsystemSet::new(3, &tail).unwrap()).unwrap();
        let mut w = vec![1.0];
        for f in &factors {
            let mut next = Vec::with_capacity(w.len() * 2);
            for a in &w {
                for b in f {
                    next.push(a * b);
                }
            }
            w = next;
        }
        let mut quad = 0.0;
        for (r, wr) in w.iter().enumerate() {
            for (cidx, wc) in w.iter().enumerate() {
                quad += wr * traced.get(r, cidx).re * wc;
            }
        }
        worst = worst.max((reduced.trace().re - quad).abs() / quad.abs().max(1.0));
    }
    record(
        checks,
        "tr(pmrdm) == prefix-sandwiched partial trace",
        worst,
        1e-10,
        "i = 0..k".into(),
    );
}

fn check_abar_idempotent(checks: &mut Vec<InvariantCheck>) {
    let mut worst = 0.0f64;
    for (d, k) in [(2usize, 3usize), (3, 2)] {
        let dims = Dims::new(d, k).unwrap();
        let a = random_matrix(dims.total(), 270 + d as u64);
        let once = average_partial_transposes(&a, &dims).unwrap();
        let twice = average_partial_transposes(&once, &dims).unwrap();
        worst = worst.max(twice.sub(&once).unwrap().max_abs());
        for i in 1..=k {
            let t = partial_transpose(&once, &dims, &SubsystemSet::new(k, &[i]).unwrap()).unwrap();
            worst = worst.max(t.sub(&once).unwrap().max_abs());
        }
    }
    record(
        checks,
        "transpose average is idempotent and fixed",
        worst,
        1e-12,
        String::new(),
    );
}

fn check_unbiasedness(checks: &mut Vec<InvariantCheck>) {
    let mut worst = 0.0f64;
    for (d, k) in [(2usize, 2usize), (3, 2)] {
        let dims = Dims::new(d, k).unwrap();
        let a = random_matrix(dims.total(), 280 + d as u64);
        for dist in QueryDistribution::ALL {
            let m = moment_oracle(&a, &dims, dist).unwrap();
            worst = worst.max((m.mean - a.trace().re).abs() / a.trace().re.abs().max(1.0));
        }
    }
    record(
        checks,
        "E[x^H A x] == tr(A) for all distributions",
        worst,
        1e-10,
        String::new(),
    );
}

fn check_estimator_determinism(checks: &mut Vec<InvariantCheck>) {
    let dims = Dims::new(2, 2).unwrap();
    let op = KronOperator::wishart(dims, 290);
    let mut worst = 0.0f64;
    for dist in QueryDistribution::ALL {
        let a = kron_hutchinson(&op, dist, 32, &RngStream::new(291, 0), true).unwrap();
        let b = kron_hutchinson(&op, dist, 32, &RngStream::new(291, 0), true).unwrap();
        if a != b {
            worst = 1.0;
        }
    }
    record(
        checks,
        "identical seeds give bit-identical estimates",
        worst,
        0.0,
        String::new(),
    );
}

fn check_recovery(checks: &mut Vec<InvariantCheck>) {
    let mut worst_err = 0.0f64;
    let mut worst_queries = 0.0f64;
    let mut worst_trace = 0.0f64;
    for (d, k) in [(2usize, 2usize), (2, 3), (3, 2)] {
        let dims = Dims::new(d, k).unwrap();
        for trial in 0..3u64 {
            let factors: Vec<DenseMatrix> = (0..k)
                .map(|i| random_matrix(d, 300 + trial * 10 + i as u64))
                .collect();
            let op = KronOperator::kron_factors(dims, factors).unwrap();
            let rec = exact_kron_recovery(&op, &RngStream::new(301 + trial, 0)).unwrap();
            worst_queries = worst_queries.max((rec.queries_used as f64 - (k * d + 1) as f64).abs());
            let mut rebuilt = DenseMatrix::identity(1);
            for b in &rec.factors {
                rebuilt = rebuilt.kron(b);
            }
            let target = op.materialize().unwrap();
            let scale = target.frob_norm_sq().sqrt();
            worst_err = worst_err.max(rebuilt.sub(&target).unwrap().frob_norm_sq().sqrt() / scale);
            worst_trace = worst_trace
                .max((rec.trace() - target.trace().re).abs() / target.trace().re.abs().max(1e-6));
        }
    }
    record(
        checks,
        "kron recovery reconstructs the matrix",
        worst_err,
        1e-8,
        String::new(),
    );
    record(
        checks,
        "kron recovery costs exactly kd+1 queries",
        worst_queries,
        0.0,
        String::new(),
    );
    record(
        checks,
        "product of recovered factor traces == tr(A)",
        worst_trace,
        1e-8,
        String::new(),
    );
}

fn check_rank_one(checks: &mut Vec<InvariantCheck>) {
    let mut worst_value = 0.0f64;
    let mut worst_queries = 0.0f64;
    for (d, k, seed) in [(2usize, 2usize, 310u64), (2, 3, 311), (3, 2, 312)] {
        let dims = Dims::new(d, k).unwrap();
        let g = sample_gaussian_vector(dims.total(), &RngStream::new(seed, 0));
        let expected: f64 = g.iter().map(|x| x * x).sum();
        let op = KronOperator::rank_one(dims, g).unwrap();
        let value = rank_one_exact_trace(&op, &RngStream::new(seed, 1)).unwrap();
        worst_value = worst_value.max((value - expected).abs() / expected);
        worst_queries = worst_queries.max((op.query_count() as f64 - 1.0).abs());
    }
    record(
        checks,
        "rank-one trace from a single query",
        worst_value,
        1e-10,
        String::new(),
    );
    record(
        checks,
        "rank-one estimator uses exactly 1 query",
        worst_queries,
        0.0,
        String::new(),
    );
}

fn check_complex_simulation(checks: &mut Vec<InvariantCheck>) {
    let mut worst = 0.0f64;
    let mut worst_queries = 0.0f64;
    for (d, k, seed) in [(2usize, 2usize, 320u64), (2, 3, 321), (2, 4, 322)] {
        let dims = Dims::new(d, k).unwrap();
        let a = random_matrix(dims.total(), seed);
        let op = KronOperator::explicit_dense(dims, a).unwrap();
        let q = sample_query(
            QueryDistribution::ComplexGaussian,
            dims,
            &RngStream::new(seed, 1),
        );
        let (sim, used) = simulate_complex_query(&op, &q).unwrap();
        worst_queries = worst_queries.max((used as f64 - (1u64 << k) as f64).abs());
        let direct = op.apply(&q).unwrap();
        let scale = direct.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
        for (s, dv) in sim.iter().zip(direct.iter()) {
            worst = worst.max((s - dv).norm() / scale);
        }
    }
    record(
        checks,
        "complex query == 2^k real queries",
        worst,
        1e-12,
        String::new(),
    );
    record(
        checks,
        "complex simulation uses exactly 2^k queries",
        worst_queries,
        0.0,
        String::new(),
    );
}

fn check_moment_tensors(checks: &mut Vec<InvariantCheck>, depth: Depth) {
    let (samples, tol) = match depth {
        Depth::Fast => (200_000u64, 0.15),
        Depth::Full => (1_000_000u64, 0.06),
    };
    let mut worst = 0.0f64;
    for dist in QueryDistribution::ALL {
        for d in [2usize, 3] {
            let tensor = MomentTensor::new(dist, d);
            worst = worst.max(tensor.validate_monte_carlo(samples, &RngStream::new(330, 0)));
        }
    }
    record(
        checks,
        "moment tensors match Monte Carlo",
        worst,
        tol,
        format!("{samples} draws per distribution"),
    );
}

fn check_gaussian_exactness(checks: &mut Vec<InvariantCheck>, depth: Depth) {
    let mut worst = 0.0f64;
    for (d, k) in shapes(depth) {
        let dims = Dims::new(d, k).unwrap();
        for trial in 0..3u64 {
            let a = random_matrix(dims.total(), 340 + trial * 31 + (d * 10 + k) as u64);
            let formula = exact_variance(&a, &dims, ScalarField::Real).unwrap();
            let oracle = moment_oracle(&a, &dims, QueryDistribution::RealGaussian).unwrap();
            worst = worst.max((formula - oracle.variance()).abs() / formula.abs().max(1e-12));
            let formula_c = exact_variance(&a, &dims, ScalarField::Complex).unwrap();
            let oracle_c = moment_oracle(&a, &dims, QueryDistribution::ComplexGaussian).unwrap();
            worst = worst.max((formula_c - oracle_c.variance()).abs() / formula_c.abs().max(1e-12));
        }
    }
    record(
        checks,
        "Gaussian variance formula is exact",
        worst,
        1e-10,
        "real and complex, relative".into(),
    );
}

fn check_rademacher_domination(checks: &mut Vec<InvariantCheck>) {
    let mut worst = f64::NEG_INFINITY;
    for (d, k) in [(2usize, 2usize), (2, 3), (3, 2)] {
        let dims = Dims::new(d, k).unwrap();
        for trial in 0..3u64 {
            let a = random_matrix(dims.total(), 350 + trial * 17 + (d * 10 + k) as u64);
            for (field, dist) in [
                (ScalarField::Real, QueryDistribution::RealRademacher),
                (ScalarField::Complex, QueryDistribution::ComplexRademacher),
            ] {
                let formula = exact_variance(&a, &dims, field).unwrap();
                let oracle = moment_oracle(&a, &dims, dist).unwrap();
                // positive when the oracle exceeds the formula's upper bound
                worst = worst.max((oracle.variance() - formula) / formula.abs().max(1e-12));
            }
        }
    }
    record(
        checks,
        "formula dominates Rademacher variance",
        worst,
        1e-9,
        "signed relative slack".into(),
    );
}

fn check_upper_bound_ordering(checks: &mut Vec<InvariantCheck>) {
    let mut worst_order = f64::NEG_INFINITY;
    let mut worst_eq = 0.0f64;
    for (d, k) in [(2usize, 2usize), (3, 2)] {
        let dims = Dims::new(d, k).unwrap();
        let a = random_matrix(dims.total(), 360 + d as u64);
        for field in [ScalarField::Real, ScalarField::Complex] {
            let var = exact_variance(&a, &dims, field).unwrap();
            let ub = variance_upper_bound_no_abar(&a, &dims, field).unwrap();
            worst_order = worst_order.max((var - ub) / ub.abs().max(1e-12));

            let abar = average_partial_transposes(&a, &dims).unwrap();
            let var_fixed = exact_variance(&abar, &dims, field).unwrap();
            let ub_fixed = variance_upper_bound_no_abar(&abar, &dims, field).unwrap();
            worst_eq = worst_eq.max((var_fixed - ub_fixed).abs() / ub_fixed.abs().max(1e-12));
        }
    }
    record(
        checks,
        "no-average bound dominates the exact variance",
        worst_order,
        1e-12,
        String::new(),
    );
    record(
        checks,
        "bound is tight on transpose-fixed matrices",
        worst_eq,
        1e-10,
        String::new(),
    );
}

fn check_psd_chain(checks: &mut Vec<InvariantCheck>) {
    let mut worst = f64::NEG_INFINITY;
    for (d, k) in [(2usize, 2usize), (2, 3)] {
        let dims = Dims::new(d, k).unwrap();
        for seed in 0..4u64 {
            let a = KronOperator::wishart(dims, 370 + seed)
                .materialize()
                .unwrap();
            let tr = a.trace().re;
            for field in [ScalarField::Real, ScalarField::Complex] {
                let var = exact_variance(&a, &dims, field).unwrap();
                let w = if field.is_real() { 2.0f64 } else { 1.0 };
                let subset_bound = ((w + 1.0).powi(k as i32) - 1.0) * tr * tr;
                let psd_bound = psd_worst_case_bound(tr, k, field).unwrap();
                worst = worst.max((var - subset_bound) / (tr * tr));
                worst = worst.max((subset_bound - psd_bound) / (tr * tr));
            }
        }
    }
    record(
        checks,
        "PSD variance chain up to (w+1)^k (tr A)^2",
        worst,
        1e-12,
        "Wishart instances".into(),
    );
}

fn check_wishart_mse_monte_carlo(checks: &mut Vec<InvariantCheck>, depth: Depth) {
    let draws = match depth {
        Depth::Fast => 100_000u64,
        Depth::Full => 200_000u64,
    };
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for (d, k) in [(2usize, 1usize), (2, 2)] {
        // tr(⊗W_i) = Π tr(W_i); draw directly from the factor definition
        let mut values = Vec::with_capacity(draws as usize);
        for j in 0..draws {
            let g = sample_gaussian_vector(d * d * k, &RngStream::new(380 + d as u64, j));
            let mut prod = 1.0;
            for i in 0..k {
                let slice = &g[i * d * d..(i + 1) * d * d];
                // tr(GᵀG) = Σ entries²
                prod *= slice.iter().map(|x| x * x).sum::<f64>();
            }
            values.push(prod);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let fourth = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        let se_var = ((fourth - var * var).max(0.0) / n).sqrt();
        let expected = wishart_mse(d, k, 0).unwrap();
        let deviation = (var - expected).abs() / (5.0 * se_var);
        worst = worst.max(deviation);
        detail = format!("{draws} draws; 5-SE units");
    }
    record(
        checks,
        "wishart_mse(d,k,0) matches Monte Carlo",
        worst,
        1.0,
        detail,
    );
}

fn check_rankone_norm_monte_carlo(checks: &mut Vec<InvariantCheck>, depth: Depth) {
    let draws = match depth {
        Depth::Fast => 10_000u64,
        Depth::Full => 30_000u64,
    };
    let mut worst = 0.0f64;
    for d in [2usize, 3] {
        for k in [1usize, 2, 3] {
            let total: usize = d.pow(k as u32);
            for s in 0..=k {
                let rows = total / d.pow(s as u32);
                let cols = d.pow(s as u32);
                let mut values = Vec::with_capacity(draws as usize);
                for j in 0..draws {
                    let g = sample_gaussian_vector(
                        total,
                        &RngStream::new(400 + (d * 10 + k) as u64, j),
                    );
                    // tr_S(ggᵀ) = GGᵀ for the (rows × cols) reshape of g;
                    // ‖GGᵀ‖_F² = ‖GᵀG‖_F²
                    let mut norm_sq = 0.0;
                    for c1 in 0..cols {
                        for c2 in 0..cols {
                            let mut dot = 0.0;
                            for r in 0..rows {
                                dot += g[c1 * rows + r] * g[c2 * rows + r];
                            }
                            norm_sq += dot * dot;
                        }
                    }
                    values.push(norm_sq);
                }
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
                let se = (var / n).sqrt();
                let expected = rankone_expected_partial_trace_norm(d, k, s).unwrap();
                worst = worst.max((mean - expected).abs() / (3.0 * se));
            }
        }
    }
    record(
        checks,
        "rank-one partial trace norms match Monte Carlo",
        worst,
        1.0,
        format!("{draws} draws; 3-SE units"),
    );
}

fn check_runner_reproducibility(checks: &mut Vec<InvariantCheck>) {
    let cfg = ExperimentConfig {
        d: 2,
        k: 2,
        field: "complex".into(),
        matrix: MatrixSpec {
            kind: "wishart_seed".into(),
            path: None,
            seed: Some(6),
        },
        distributions: vec![
            "real-gaussian".into(),
            "real-rademacher".into(),
            "complex-gaussian".into(),
        ],
        samples: vec![1, 8],
        mc_trials: 40,
        eps: Some(0.25),
        seed: 99,
        output: None,
    };
    let run = |_: u32| -> Result<String> {
        let rows = run_config(&cfg, RunMode::Estimate)?;
        Ok(rows_to_csv(&rows))
    };
    let worst = match (run(0), run(1)) {
        (Ok(a), Ok(b)) if a == b => 0.0,
        _ => 1.0,
    };
    record(
        checks,
        "re-running a config is byte-identical",
        worst,
        0.0,
        "estimate mode, 6 cells".into(),
    );

    // required_samples column consistency on a cell with eps and exact_var
    let rows = run_config(&cfg, RunMode::Estimate).unwrap();
    let mut worst_required = 0.0f64;
    for row in &rows {
        if let (Some(exact), Some(required)) = (row.exact_var, row.required_samples_for_eps) {
            let expected =
                krontrace::variance::required_samples(exact, row.trace_true, 0.25).unwrap();
            worst_required = worst_required.max((required as f64 - expected as f64).abs());
        }
    }
    record(
        checks,
        "required-samples column matches the formula",
        worst_required,
        0.0,
        String::new(),
    );
}
