use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use krontrace::variance::{
    adaptive_query_lower_bound, all_ones_lower_bound_samples, psd_worst_case_bound_with_form,
    rankone_variance_budget, wishart_mse, PsdBoundForm,
};
use krontrace::ScalarField;
use krontrace_cli::config::{ExperimentConfig, MatrixSpec, OutputSpec};
use krontrace_cli::emit::{emit, rows_to_csv, rows_to_json, OutputFormat};
use krontrace_cli::runner::{run_config, RunMode};
use krontrace_cli::verify::{verify_suite, Depth};
use krontrace_cli::{CliError, Result};

/// Trace estimation experiments over the Kronecker matrix-vector oracle.
#[derive(Parser)]
#[command(name = "krontrace", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Hutchinson estimator over a (distribution, samples) grid and
    /// compare against the exact formulas.
    Estimate(RunArgs),
    /// Emit exact variance, bounds, and sample-size columns without sampling.
    Variance(RunArgs),
    /// Exact trace recovery: one query for rank-one matrices, kd+1 queries
    /// for Kronecker-structured ones.
    Recover(RunArgs),
    /// Print the closed-form bound and sample-size table for given d, k, eps.
    Bounds(BoundsArgs),
    /// Run the cross-module invariant battery.
    Verify {
        /// fast or full
        #[arg(default_value = "fast")]
        depth: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; when present it takes precedence over the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// real or complex
    #[arg(long, default_value = "real")]
    field: String,
    /// Matrix spec: all_ones, wishart_seed:N, rank_one_seed:N,
    /// random_dense_seed:N, random_psd_seed:N, dense_file:PATH,
    /// kron_factors_file:PATH
    #[arg(long, default_value = "all_ones")]
    matrix: String,
    /// Comma-separated distribution list
    #[arg(long, value_delimiter = ',', default_value = "real-gaussian")]
    dist: Vec<String>,
    /// Comma-separated Hutchinson sample counts
    #[arg(long, value_delimiter = ',', default_value = "1")]
    samples: Vec<u64>,
    #[arg(long, default_value_t = 1000)]
    mc_trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    eps: Option<f64>,
    /// Output file; rows print to stdout as CSV when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Trace value for the PSD worst-case rows
    #[arg(long, default_value_t = 1.0)]
    trace: f64,
    /// Adaptive query count for the hidden-structure MSE row
    #[arg(long, default_value_t = 0)]
    q: usize,
}

impl RunArgs {
    fn into_config(self) -> Result<ExperimentConfig> {
        if let Some(path) = &self.config {
            return ExperimentConfig::from_json_file(path);
        }
        let output = match &self.out {
            Some(path) => Some(OutputSpec {
                path: path.clone(),
                format: self.format.clone(),
            }),
            None => None,
        };
        Ok(ExperimentConfig {
            d: self.d,
            k: self.k,
            field: self.field.clone(),
            matrix: MatrixSpec::parse(&self.matrix)?,
            distributions: self.dist.clone(),
            samples: self.samples.clone(),
            mc_trials: self.mc_trials,
            eps: self.eps,
            seed: self.seed,
            output,
        })
    }
}

fn run_and_emit(args: RunArgs, mode: RunMode) -> Result<()> {
    let cfg = args.into_config()?;
    let rows = run_config(&cfg, mode)?;
    match &cfg.output {
        Some(out) => {
            let format = OutputFormat::from_str(&out.format)?;
            emit(&rows, format, &out.path)?;
            eprintln!("wrote {} row(s) to {}", rows.len(), out.path.display());
        }
        None => {
            let text = match OutputFormat::from_str(
                cfg.output
                    .as_ref()
                    .map(|o| o.format.as_str())
                    .unwrap_or("csv"),
            )? {
                OutputFormat::Csv => rows_to_csv(&rows),
                OutputFormat::Json => rows_to_json(&rows)?,
            };
            print!("{text}");
        }
    }
    Ok(())
}

fn print_bounds(args: BoundsArgs) -> Result<()> {
    let BoundsArgs {
        d,
        k,
        eps,
        trace,
        q,
    } = args;
    println!("quantity,value");
    for field in [ScalarField::Real, ScalarField::Complex] {
        println!(
            "all_ones_lower_bound_samples_{field},{:.16e}",
            all_ones_lower_bound_samples(d, k, eps, field)?
        );
        let budget = rankone_variance_budget(d, k, eps, field)?;
        println!(
            "rankone_budget_leading_{field},{:.16e}",
            budget.leading_order
        );
        println!(
            "rankone_budget_constant1152_{field},{:.16e}",
            budget.paper_constant
        );
        if trace >= 0.0 {
            println!(
                "psd_worst_case_proof_form_{field},{:.16e}",
                psd_worst_case_bound_with_form(trace, k, field, PsdBoundForm::Proof)?
            );
            println!(
                "psd_worst_case_statement_form_{field},{:.16e}",
                psd_worst_case_bound_with_form(trace, k, field, PsdBoundForm::Statement)?
            );
        }
    }
    println!("wishart_mse_q{q},{:.16e}", wishart_mse(d, k, q)?);
    println!(
        "adaptive_query_lower_bound,{:.16e}",
        adaptive_query_lower_bound(k, eps)?
    );
    Ok(())
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Estimate(args) => run_and_emit(args, RunMode::Estimate)?,
        Command::Variance(args) => run_and_emit(args, RunMode::Variance)?,
        Command::Recover(args) => run_and_emit(args, RunMode::Recover)?,
        Command::Bounds(args) => print_bounds(args)?,
        Command::Verify { depth } => {
            let report = verify_suite(Depth::from_str(&depth)?);
            print!("{}", report.render());
            return Ok(report.all_pass());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
