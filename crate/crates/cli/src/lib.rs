//! Experiment runner behind the `krontrace` command line: configuration
//! parsing, the Monte-Carlo-versus-exact-formula driver, deterministic
//! CSV/JSON emission, and the cross-module invariant battery.

pub mod config;
pub mod emit;
pub mod runner;
pub mod verify;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] krontrace::Error),

    #[error("config: {0}")]
    Config(String),

    #[error(
        "empirical variance {empirical:.6e} deviates from the exact value {exact:.6e} \
         beyond the allowed band {band:.6e} (cell {cell})"
    )]
    VarianceBand {
        cell: String,
        empirical: f64,
        exact: f64,
        band: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;
