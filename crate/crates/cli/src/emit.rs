//! Deterministic result emission.
//!
//! CSV rows follow the fixed 17-column order below with floats printed at 17
//! significant digits, enough for bit-exact round trips and meaningful
//! regression diffs. JSON is an array of objects with identical field names;
//! absent values are empty CSV cells / JSON nulls.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::runner::ResultRow;
use crate::{CliError, Result};

pub const CSV_HEADER: &str = "experiment_id,d,k,field,dist,matrix_kind,seed,n_samples,\
trace_true,estimate_mean,estimate_stderr,empirical_var,exact_var,upper_bound_var,\
psd_bound,required_samples_for_eps,queries_used";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(CliError::Config(format!(
                "unknown output format {other:?}, expected csv or json"
            ))),
        }
    }
}

/// 17 significant digits: always round-trips an f64.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn fmt_opt_u64(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let line = [
            r.experiment_id.clone(),
            r.d.to_string(),
            r.k.to_string(),
            r.field.clone(),
            r.dist.clone(),
            r.matrix_kind.clone(),
            r.seed.to_string(),
            r.n_samples.to_string(),
            fmt_f64(r.trace_true),
            fmt_opt_f64(r.estimate_mean),
            fmt_opt_f64(r.estimate_stderr),
            fmt_opt_f64(r.empirical_var),
            fmt_opt_f64(r.exact_var),
            fmt_opt_f64(r.upper_bound_var),
            fmt_opt_f64(r.psd_bound),
            fmt_opt_u64(r.required_samples_for_eps),
            r.queries_used.to_string(),
        ]
        .join(",");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn rows_to_json(rows: &[ResultRow]) -> Result<String> {
    let mut text = serde_json::to_string_pretty(rows)?;
    text.push('\n');
    Ok(text)
}

/// Write rows to `path` in the requested format.
pub fn emit(rows: &[ResultRow], format: OutputFormat, path: &Path) -> Result<()> {
    let text = match format {
        OutputFormat::Csv => rows_to_csv(rows),
        OutputFormat::Json => rows_to_json(rows)?,
    };
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
