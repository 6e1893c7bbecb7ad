//! Drive an [`ExperimentConfig`] through the estimators and formulas.
//!
//! Grid cells `(distribution, ℓ)` are laid out in sorted order, each with its
//! own disjoint block of RNG streams, so re-running a config with the same
//! seed reproduces every number bit-for-bit regardless of execution order.

use serde::{Deserialize, Serialize};

use krontrace::estimators::{
    diagonal_trace, exact_kron_recovery, kron_hutchinson, rank_one_exact_trace,
};
use krontrace::files;
use krontrace::sampling::{sample_gaussian_vector, RngStream};
use krontrace::subsystems::SUBSET_ENUMERATION_MAX_K;
use krontrace::variance::{
    average_fixedness_gap, exact_variance, psd_worst_case_bound, required_samples,
    variance_upper_bound_no_abar,
};
use krontrace::{DenseMatrix, Dims, KronOperator, OperatorKind, QueryDistribution};

use crate::config::ExperimentConfig;
use crate::{CliError, Result};

/// What the run produces per cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    /// Hutchinson sampling versus the exact formulas.
    Estimate,
    /// Formula and bound columns only, no sampling.
    Variance,
    /// Exact recovery: single-query rank-one trace or `kd+1`-query
    /// Kronecker-factor reconstruction.
    Recover,
}

impl RunMode {
    fn label(self) -> &'static str {
        match self {
            RunMode::Estimate => "estimate",
            RunMode::Variance => "variance",
            RunMode::Recover => "recover",
        }
    }
}

/// One emitted table row. Unavailable quantities (budget exceeded, bound not
/// applicable) stay empty rather than aborting the run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResultRow {
    pub experiment_id: String,
    pub d: u64,
    pub k: u64,
    pub field: String,
    pub dist: String,
    pub matrix_kind: String,
    pub seed: u64,
    pub n_samples: u64,
    pub trace_true: f64,
    pub estimate_mean: Option<f64>,
    pub estimate_stderr: Option<f64>,
    pub empirical_var: Option<f64>,
    pub exact_var: Option<f64>,
    pub upper_bound_var: Option<f64>,
    pub psd_bound: Option<f64>,
    pub required_samples_for_eps: Option<u64>,
    pub queries_used: u64,
}

/// Operator plus what we know about it up front.
pub struct BuiltMatrix {
    pub operator: KronOperator,
    pub dims: Dims,
    pub kind: String,
    /// Known positive semidefinite by construction.
    pub promised_psd: bool,
}

/// Construct the operator a config names.
pub fn build_matrix(cfg: &ExperimentConfig) -> Result<BuiltMatrix> {
    let dims = cfg.dims()?;
    let spec = &cfg.matrix;
    let need_seed = || {
        spec.seed
            .ok_or_else(|| CliError::Config(format!("matrix kind {} needs a seed", spec.kind)))
    };
    let need_path = || {
        spec.path
            .clone()
            .ok_or_else(|| CliError::Config(format!("matrix kind {} needs a path", spec.kind)))
    };
    let (operator, promised_psd) = match spec.kind.as_str() {
        "all_ones" => (KronOperator::all_ones(dims), true),
        "wishart_seed" => (KronOperator::wishart(dims, need_seed()?), true),
        "rank_one_seed" => {
            let g = sample_gaussian_vector(dims.total(), &RngStream::new(need_seed()?, 0));
            (KronOperator::rank_one(dims, g)?, true)
        }
        "random_dense_seed" => {
            let n = dims.total();
            let entries = sample_gaussian_vector(n * n, &RngStream::new(need_seed()?, 0));
            let m = DenseMatrix::from_real(n, &entries)?;
            (KronOperator::explicit_dense(dims, m)?, false)
        }
        "random_psd_seed" => {
            let n = dims.total();
            let entries = sample_gaussian_vector(n * n, &RngStream::new(need_seed()?, 0));
            let m = DenseMatrix::from_real(n, &entries)?;
            let gram = m.transpose().matmul(&m)?;
            (KronOperator::explicit_dense(dims, gram)?, true)
        }
        "dense_file" => {
            let path = need_path()?;
            let cap = ExperimentConfig::dim_cap()?;
            let matrix = if path.extension().is_some_and(|e| e == "csv") {
                files::read_csv_real(&path)?
            } else {
                let (matrix, file_dims) = files::read_matrix_with_cap(&path, cap)?;
                if file_dims != dims {
                    return Err(CliError::Config(format!(
                        "file dims (d={}, k={}) differ from config (d={}, k={})",
                        file_dims.d(),
                        file_dims.k(),
                        dims.d(),
                        dims.k()
                    )));
                }
                matrix
            };
            (KronOperator::explicit_dense(dims, matrix)?, false)
        }
        "kron_factors_file" => {
            let path = need_path()?;
            let cap = ExperimentConfig::dim_cap()?;
            let (factors, file_dims) = files::read_kron_factors_with_cap(&path, cap)?;
            if file_dims != dims {
                return Err(CliError::Config(format!(
                    "file dims (d={}, k={}) differ from config (d={}, k={})",
                    file_dims.d(),
                    file_dims.k(),
                    dims.d(),
                    dims.k()
                )));
            }
            (KronOperator::kron_factors(dims, factors)?, false)
        }
        other => return Err(CliError::Config(format!("unknown matrix kind {other:?}"))),
    };
    Ok(BuiltMatrix {
        operator,
        dims,
        kind: spec.kind.clone(),
        promised_psd,
    })
}

/// Ground-truth trace: the product of factor traces when the representation
/// carries factors, otherwise the exact diagonal sum via `D` standard-basis
/// queries on a fresh clone (so the experiment's query account is untouched).
fn true_trace(built: &BuiltMatrix) -> Result<f64> {
    match built.operator.kind() {
        OperatorKind::KronFactors(factors) | OperatorKind::WishartKron { factors, .. } => {
            Ok(factors.iter().map(|f| f.trace().re).product())
        }
        _ => {
            let probe = built.operator.clone();
            let (trace, _queries) = diagonal_trace(&probe)?;
            Ok(trace)
        }
    }
}

/// Unbiased mean/variance/standard-error summaries.
fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn unbiased_variance(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let mean = mean_of(values);
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Some(ss / (values.len() - 1) as f64)
}

struct FormulaColumns {
    exact_var: Option<f64>,
    upper_bound_var: Option<f64>,
    psd_bound: Option<f64>,
    required: Option<u64>,
}

/// Formula columns for one cell. `attach_exact` controls whether the exact
/// value is reported: estimate cells withhold it for complex distributions
/// on matrices not fixed by all partial transposes, where the formula does
/// not describe the sampled quadratic form.
fn formula_columns(
    matrix: &DenseMatrix,
    dims: &Dims,
    dist: QueryDistribution,
    trace_true: f64,
    promised_psd: bool,
    eps: Option<f64>,
    attach_exact: bool,
) -> Result<FormulaColumns> {
    let field = dist.field();
    let within_budget = dims.k() <= SUBSET_ENUMERATION_MAX_K;
    let exact_var = if within_budget && attach_exact {
        Some(exact_variance(matrix, dims, field)?)
    } else {
        None
    };
    let upper_bound_var = if within_budget {
        Some(variance_upper_bound_no_abar(matrix, dims, field)?)
    } else {
        None
    };
    let psd_bound = if promised_psd && trace_true >= 0.0 {
        Some(psd_worst_case_bound(trace_true, dims.k(), field)?)
    } else {
        None
    };
    let required = match (eps, exact_var) {
        (Some(eps), Some(var)) if trace_true != 0.0 => {
            Some(required_samples(var, trace_true, eps)?)
        }
        _ => None,
    };
    Ok(FormulaColumns {
        exact_var,
        upper_bound_var,
        psd_bound,
        required,
    })
}

/// Allowed gap between empirical and exact single-sample variance:
/// `5·exact·√(2/(mc_trials−1))·√(1+3)`.
fn variance_band(exact: f64, mc_trials: u64) -> Option<f64> {
    if mc_trials < 2 {
        return None;
    }
    Some(5.0 * exact * (2.0 / (mc_trials - 1) as f64).sqrt() * 2.0)
}

/// Run one config in the given mode, returning rows sorted by
/// `(dist, n_samples)`.
pub fn run_config(cfg: &ExperimentConfig, mode: RunMode) -> Result<Vec<ResultRow>> {
    let built = build_matrix(cfg)?;
    let dims = built.dims;
    let trace_true = true_trace(&built)?;
    let dists = cfg.parsed_distributions()?;
    let field_label = cfg.scalar_field()?.to_string();

    // The formula columns need the explicit matrix; recovery does not.
    let formula_input = if mode == RunMode::Recover {
        None
    } else {
        let materialized = built.operator.materialize()?;
        let abar_fixed = dims.k() <= SUBSET_ENUMERATION_MAX_K
            && average_fixedness_gap(&materialized, &dims)?
                <= 1e-12 * materialized.frob_norm_sq().sqrt().max(1.0);
        Some((materialized, abar_fixed))
    };

    let base_row = |dist: String, id_tail: String| ResultRow {
        experiment_id: format!("{}-{}-{}", mode.label(), built.kind, id_tail),
        d: dims.d() as u64,
        k: dims.k() as u64,
        field: field_label.clone(),
        dist,
        matrix_kind: built.kind.clone(),
        seed: cfg.seed,
        n_samples: 0,
        trace_true,
        estimate_mean: None,
        estimate_stderr: None,
        empirical_var: None,
        exact_var: None,
        upper_bound_var: None,
        psd_bound: None,
        required_samples_for_eps: None,
        queries_used: 0,
    };

    match mode {
        RunMode::Estimate => {
            let (materialized, abar_fixed) =
                formula_input.as_ref().expect("present outside recover mode");
            if cfg.samples.is_empty() {
                return Err(CliError::Config("samples grid is empty".into()));
            }
            if cfg.mc_trials == 0 {
                return Err(CliError::Config("mc_trials must be at least 1".into()));
            }
            let mut cells: Vec<(QueryDistribution, u64)> = Vec::new();
            for &dist in &dists {
                for &ell in &cfg.samples {
                    cells.push((dist, ell));
                }
            }
            cells.sort_by_key(|&(dist, ell)| (dist.to_string(), ell));
            cells.dedup();

            let mut rows = Vec::with_capacity(cells.len());
            for (cell_index, &(dist, ell)) in cells.iter().enumerate() {
                if ell == 0 {
                    return Err(CliError::Config("sample count 0 in grid".into()));
                }
                // Disjoint stream block per cell: trial t consumes streams
                // [base + t·ℓ, base + (t+1)·ℓ).
                let cell_base = (cell_index as u64) << 40;
                let mut trial_means = Vec::with_capacity(cfg.mc_trials as usize);
                let mut singles = Vec::with_capacity((cfg.mc_trials * ell) as usize);
                let queries_before = built.operator.query_count();
                for trial in 0..cfg.mc_trials {
                    let stream = RngStream::new(cfg.seed, cell_base + trial * ell);
                    let est = kron_hutchinson(&built.operator, dist, ell, &stream, true)?;
                    trial_means.push(est.value);
                    singles.extend(est.per_sample.expect("samples kept").iter().map(|z| z.re));
                }
                let queries_used = built.operator.query_count() - queries_before;

                let estimate_mean = mean_of(&trial_means);
                let estimate_stderr =
                    unbiased_variance(&trial_means).map(|v| (v / trial_means.len() as f64).sqrt());
                let empirical_var = unbiased_variance(&singles);

                let cols = formula_columns(
                    materialized,
                    &dims,
                    dist,
                    trace_true,
                    built.promised_psd,
                    cfg.eps,
                    dist.field().is_real() || *abar_fixed,
                )?;

                if let (Some(empirical), Some(exact)) = (empirical_var, cols.exact_var) {
                    if let Some(band) = variance_band(exact, cfg.mc_trials) {
                        // The formula is the variance for Gaussian factors but
                        // only an upper bound for Rademacher ones, so the gate
                        // is one-sided there.
                        let violation = if dist.is_gaussian() {
                            (empirical - exact).abs() > band
                        } else {
                            empirical > exact + band
                        };
                        if violation {
                            return Err(CliError::VarianceBand {
                                cell: format!("{dist} l={ell}"),
                                empirical,
                                exact,
                                band,
                            });
                        }
                    }
                }

                let mut row = base_row(dist.to_string(), format!("{}-l{}", dist, ell));
                row.n_samples = ell;
                row.estimate_mean = Some(estimate_mean);
                row.estimate_stderr = estimate_stderr;
                row.empirical_var = empirical_var;
                row.exact_var = cols.exact_var;
                row.upper_bound_var = cols.upper_bound_var;
                row.psd_bound = cols.psd_bound;
                row.required_samples_for_eps = cols.required;
                row.queries_used = queries_used;
                rows.push(row);
            }
            Ok(rows)
        }
        RunMode::Variance => {
            let (materialized, _) = formula_input.as_ref().expect("present outside recover mode");
            let mut sorted = dists.clone();
            sorted.sort_by_key(|d| d.to_string());
            sorted.dedup();
            let mut rows = Vec::with_capacity(sorted.len());
            for dist in sorted {
                let cols = formula_columns(
                    materialized,
                    &dims,
                    dist,
                    trace_true,
                    built.promised_psd,
                    cfg.eps,
                    true,
                )?;
                let mut row = base_row(dist.to_string(), dist.to_string());
                row.exact_var = cols.exact_var;
                row.upper_bound_var = cols.upper_bound_var;
                row.psd_bound = cols.psd_bound;
                row.required_samples_for_eps = cols.required;
                rows.push(row);
            }
            Ok(rows)
        }
        RunMode::Recover => {
            let stream = RngStream::new(cfg.seed, 0);
            let (estimate, queries_used) = if built.kind == "rank_one_seed" {
                let value = rank_one_exact_trace(&built.operator, &stream)?;
                (value, built.operator.query_count())
            } else {
                let rec = exact_kron_recovery(&built.operator, &stream)?;
                (rec.trace(), rec.queries_used)
            };
            let mut row = base_row("real-gaussian".into(), "exact".into());
            row.n_samples = 1;
            row.estimate_mean = Some(estimate);
            row.queries_used = queries_used;
            Ok(vec![row])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MatrixSpec;
    use approx::assert_relative_eq;

    fn config(matrix: MatrixSpec) -> ExperimentConfig {
        ExperimentConfig {
            d: 2,
            k: 2,
            field: "real".into(),
            matrix,
            distributions: vec!["real-gaussian".into()],
            samples: vec![4],
            mc_trials: 50,
            eps: Some(0.1),
            seed: 11,
            output: None,
        }
    }

    #[test]
    fn estimate_rows_carry_formula_columns() {
        let cfg = config(MatrixSpec {
            kind: "all_ones".into(),
            path: None,
            seed: None,
        });
        let rows = run_config(&cfg, RunMode::Estimate).unwrap();
        assert_eq!(rows.len(), 1);
        let row = &rows[0];
        assert_relative_eq!(row.trace_true, 4.0);
        assert_relative_eq!(row.exact_var.unwrap(), 128.0);
        assert_relative_eq!(row.upper_bound_var.unwrap(), 128.0);
        assert_relative_eq!(row.psd_bound.unwrap(), 144.0);
        assert_eq!(row.required_samples_for_eps.unwrap(), 800);
        assert_eq!(row.queries_used, 200);
        assert_eq!(row.n_samples, 4);
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = config(MatrixSpec {
            kind: "wishart_seed".into(),
            path: None,
            seed: Some(3),
        });
        let a = run_config(&cfg, RunMode::Estimate).unwrap();
        let b = run_config(&cfg, RunMode::Estimate).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn recover_mode_rank_one_uses_one_query() {
        let cfg = config(MatrixSpec {
            kind: "rank_one_seed".into(),
            path: None,
            seed: Some(5),
        });
        let rows = run_config(&cfg, RunMode::Recover).unwrap();
        assert_eq!(rows.len(), 1);
        let row = &rows[0];
        assert_eq!(row.queries_used, 1);
        assert_relative_eq!(
            row.estimate_mean.unwrap(),
            row.trace_true,
            max_relative = 1e-10
        );
    }

    #[test]
    fn recover_mode_kron_uses_kd_plus_one() {
        let cfg = config(MatrixSpec {
            kind: "wishart_seed".into(),
            path: None,
            seed: Some(9),
        });
        let rows = run_config(&cfg, RunMode::Recover).unwrap();
        let row = &rows[0];
        assert_eq!(row.queries_used, 5);
        assert_relative_eq!(
            row.estimate_mean.unwrap(),
            row.trace_true,
            max_relative = 1e-8
        );
    }

    #[test]
    fn variance_mode_skips_sampling() {
        let cfg = config(MatrixSpec {
            kind: "all_ones".into(),
            path: None,
            seed: None,
        });
        let rows = run_config(&cfg, RunMode::Variance).unwrap();
        let row = &rows[0];
        assert_eq!(row.queries_used, 0);
        assert!(row.estimate_mean.is_none());
        assert_relative_eq!(row.exact_var.unwrap(), 128.0);
    }

    #[test]
    fn complex_exact_var_needs_transpose_fixed_matrix() {
        let mut cfg = config(MatrixSpec {
            kind: "random_dense_seed".into(),
            path: None,
            seed: Some(2),
        });
        cfg.field = "complex".into();
        cfg.distributions = vec!["complex-gaussian".into()];
        let rows = run_config(&cfg, RunMode::Estimate).unwrap();
        // asymmetric matrix: the exact column stays empty under complex queries
        assert!(rows[0].exact_var.is_none());
        assert!(rows[0].upper_bound_var.is_some());

        let rows = run_config(&cfg, RunMode::Variance).unwrap();
        // formula value still reported in the no-sampling mode
        assert!(rows[0].exact_var.is_some());
    }
}
