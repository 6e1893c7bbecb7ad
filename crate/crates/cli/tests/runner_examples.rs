//! Runner-level checks with library access: the large Monte Carlo cell
//! against the exact variance, and the recovery paths driven through
//! `run_config`.

use approx::assert_relative_eq;
use krontrace_cli::config::{ExperimentConfig, MatrixSpec};
use krontrace_cli::runner::{run_config, RunMode};

fn base_config() -> ExperimentConfig {
    ExperimentConfig {
        d: 2,
        k: 2,
        field: "real".into(),
        matrix: MatrixSpec {
            kind: "all_ones".into(),
            path: None,
            seed: None,
        },
        distributions: vec!["real-gaussian".into()],
        samples: vec![1],
        mc_trials: 16,
        eps: None,
        seed: 2,
        output: None,
    }
}

#[test]
fn all_ones_large_monte_carlo_cell_matches_exact_variance() {
    // 200000 single-sample repetitions: the empirical single-sample variance
    // lands within 5% of the exact value 128 and survives the built-in
    // variance-of-variance gate.
    let mut cfg = base_config();
    cfg.mc_trials = 200_000;
    cfg.eps = Some(0.1);
    let rows = run_config(&cfg, RunMode::Estimate).unwrap();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_relative_eq!(row.exact_var.unwrap(), 128.0);
    let empirical = row.empirical_var.unwrap();
    assert!(
        (empirical - 128.0).abs() <= 0.05 * 128.0,
        "empirical variance {empirical}"
    );
    assert_eq!(row.queries_used, 200_000);
    assert_eq!(row.required_samples_for_eps.unwrap(), 800);
}

#[test]
fn rank_one_recovery_row() {
    let mut cfg = base_config();
    cfg.matrix = MatrixSpec {
        kind: "rank_one_seed".into(),
        path: None,
        seed: Some(14),
    };
    let rows = run_config(&cfg, RunMode::Recover).unwrap();
    let row = &rows[0];
    assert_eq!(row.queries_used, 1);
    assert_relative_eq!(
        row.estimate_mean.unwrap(),
        row.trace_true,
        max_relative = 1e-10
    );
}

#[test]
fn kron_recovery_row_uses_kd_plus_one_queries() {
    let mut cfg = base_config();
    cfg.d = 3;
    cfg.k = 2;
    cfg.matrix = MatrixSpec {
        kind: "wishart_seed".into(),
        path: None,
        seed: Some(15),
    };
    let rows = run_config(&cfg, RunMode::Recover).unwrap();
    let row = &rows[0];
    assert_eq!(row.queries_used, 7); // kd + 1 = 2·3 + 1
    assert_relative_eq!(
        row.estimate_mean.unwrap(),
        row.trace_true,
        max_relative = 1e-8
    );
}

#[test]
fn rows_are_sorted_by_dist_then_samples() {
    let mut cfg = base_config();
    cfg.field = "complex".into();
    cfg.distributions = vec![
        "real-rademacher".into(),
        "complex-gaussian".into(),
        "real-gaussian".into(),
    ];
    cfg.samples = vec![8, 1];
    let rows = run_config(&cfg, RunMode::Estimate).unwrap();
    let keys: Vec<(String, u64)> = rows.iter().map(|r| (r.dist.clone(), r.n_samples)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(rows.len(), 6);
}

#[test]
fn gate_rejects_an_unlucky_cell() {
    // seed 1 puts the 200000-draw empirical variance outside the
    // variance-of-variance band on the heavy-tailed all-ones instance
    let mut cfg = base_config();
    cfg.mc_trials = 200_000;
    cfg.seed = 1;
    let err = run_config(&cfg, RunMode::Estimate).unwrap_err();
    assert!(err.to_string().contains("band"), "unexpected error: {err}");
}
