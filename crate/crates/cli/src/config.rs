//! Experiment configuration: CLI flags and the JSON config file share this
//! schema. `KRONTRACE_BUDGET_DK` in the environment overrides the total
//! dimension cap.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use krontrace::{Dims, QueryDistribution, ScalarField, DEFAULT_TOTAL_DIM_CAP};

use crate::{CliError, Result};

pub const BUDGET_ENV_VAR: &str = "KRONTRACE_BUDGET_DK";

/// Which matrix the experiment probes.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MatrixSpec {
    /// One of: `all_ones`, `wishart_seed`, `rank_one_seed`,
    /// `random_dense_seed`, `random_psd_seed`, `dense_file`,
    /// `kron_factors_file`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl MatrixSpec {
    /// Parse the flag syntax `kind`, `kind:seed`, or `kind:path`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, arg) = match spec.split_once(':') {
            Some((kind, arg)) => (kind, Some(arg)),
            None => (spec, None),
        };
        let kind = kind.trim().to_ascii_lowercase();
        match kind.as_str() {
            "all_ones" => Ok(MatrixSpec {
                kind,
                path: None,
                seed: None,
            }),
            "wishart_seed" | "rank_one_seed" | "random_dense_seed" | "random_psd_seed" => {
                let arg = arg.ok_or_else(|| {
                    CliError::Config(format!("matrix kind {kind} needs a seed, e.g. {kind}:7"))
                })?;
                let seed = arg.trim().parse::<u64>().map_err(|e| {
                    CliError::Config(format!("matrix seed {arg:?} is not an integer: {e}"))
                })?;
                Ok(MatrixSpec {
                    kind,
                    path: None,
                    seed: Some(seed),
                })
            }
            "dense_file" | "kron_factors_file" => {
                let arg = arg
                    .ok_or_else(|| CliError::Config(format!("matrix kind {kind} needs a path")))?;
                Ok(MatrixSpec {
                    kind,
                    path: Some(PathBuf::from(arg)),
                    seed: None,
                })
            }
            other => Err(CliError::Config(format!(
                "unknown matrix kind {other:?}; expected all_ones, wishart_seed, \
                 rank_one_seed, random_dense_seed, random_psd_seed, dense_file, \
                 or kron_factors_file"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OutputSpec {
    pub path: PathBuf,
    /// `csv` or `json`.
    pub format: String,
}

/// One experiment: a matrix, a query-distribution list, a sample-count grid,
/// and a repetition count, all keyed by a single 64-bit seed.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub d: usize,
    pub k: usize,
    /// Field of the oracle run: real runs accept only real distributions,
    /// complex runs accept all four.
    pub field: String,
    pub matrix: MatrixSpec,
    pub distributions: Vec<String>,
    /// Hutchinson sample counts, one grid cell per entry.
    pub samples: Vec<u64>,
    /// Independent repetitions per cell; the single-sample pool has
    /// `mc_trials · ℓ` entries.
    pub mc_trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn scalar_field(&self) -> Result<ScalarField> {
        ScalarField::from_str(&self.field).map_err(CliError::Core)
    }

    pub fn parsed_distributions(&self) -> Result<Vec<QueryDistribution>> {
        let field = self.scalar_field()?;
        let mut out = Vec::with_capacity(self.distributions.len());
        for name in &self.distributions {
            let dist = QueryDistribution::from_str(name).map_err(CliError::Core)?;
            if field.is_real() && !dist.field().is_real() {
                return Err(CliError::Config(format!(
                    "distribution {dist} is complex but the run field is real"
                )));
            }
            out.push(dist);
        }
        if out.is_empty() {
            return Err(CliError::Config("no distributions listed".into()));
        }
        Ok(out)
    }

    /// Total-dimension cap: the environment override or the default 4096.
    pub fn dim_cap() -> Result<u64> {
        match std::env::var(BUDGET_ENV_VAR) {
            Ok(text) => text.trim().parse::<u64>().map_err(|e| {
                CliError::Config(format!("{BUDGET_ENV_VAR}={text:?} is not an integer: {e}"))
            }),
            Err(_) => Ok(DEFAULT_TOTAL_DIM_CAP),
        }
    }

    pub fn dims(&self) -> Result<Dims> {
        Ok(Dims::with_cap(self.d, self.k, Self::dim_cap()?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_spec_parsing() {
        assert_eq!(
            MatrixSpec::parse("all_ones").unwrap(),
            MatrixSpec {
                kind: "all_ones".into(),
                path: None,
                seed: None
            }
        );
        assert_eq!(MatrixSpec::parse("wishart_seed:12").unwrap().seed, Some(12));
        assert_eq!(
            MatrixSpec::parse("dense_file:/tmp/m.mat").unwrap().path,
            Some(PathBuf::from("/tmp/m.mat"))
        );
        assert!(MatrixSpec::parse("wishart_seed").is_err());
        assert!(MatrixSpec::parse("bogus").is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = ExperimentConfig {
            d: 2,
            k: 2,
            field: "real".into(),
            matrix: MatrixSpec {
                kind: "all_ones".into(),
                path: None,
                seed: None,
            },
            distributions: vec!["real-gaussian".into()],
            samples: vec![1, 16],
            mc_trials: 100,
            eps: Some(0.1),
            seed: 42,
            output: None,
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn field_gates_distributions() {
        let mut cfg = ExperimentConfig {
            d: 2,
            k: 2,
            field: "real".into(),
            matrix: MatrixSpec {
                kind: "all_ones".into(),
                path: None,
                seed: None,
            },
            distributions: vec!["complex-gaussian".into()],
            samples: vec![1],
            mc_trials: 1,
            eps: None,
            seed: 0,
            output: None,
        };
        assert!(cfg.parsed_distributions().is_err());
        cfg.field = "complex".into();
        assert!(cfg.parsed_distributions().is_ok());
    }
}
