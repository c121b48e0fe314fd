//! Command-line interface for training, benchmarking, and sweeping the
//! CPD feature-learning model.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use cpdfl::als::AlsError;
use cpdfl::bench::{
    preset, run_cv, run_fl, sweep_p, BenchError, ExperimentConfig, PartialExperiment, RunReport,
    SweepRow,
};
use cpdfl::data::{check_against_manifest, load_csv, load_manifest, DataError, TargetColumn};

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Als(#[from] AlsError),
    #[error("invalid --reg value: {0}")]
    BadReg(String),
    #[error("failed to read config file {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to parse config file {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("failed to write CSV {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("failed to serialize report: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Parser, Debug)]
#[command(
    name = "cpdfl",
    version,
    about = "CPD kernel machines with learned Fourier feature weights"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the feature-learning model; report test MSE over restarts.
    Train(RunArgs),
    /// Run the cross-validated single-feature baseline.
    Cv(RunArgs),
    /// Sweep the number of feature maps P, timing both methods.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Input CSV file.
    #[arg(long)]
    data: PathBuf,

    /// Target column: a name from the header, or a zero-based index.
    /// All-digit values are treated as indices.
    #[arg(long)]
    target: String,

    /// The CSV has no header row (columns are addressed by index).
    #[arg(long)]
    no_header: bool,

    /// Start from a named preset (yacht, energy, airfoil, concrete, wine).
    #[arg(long)]
    preset: Option<String>,

    /// JSON config file; its fields override the preset, flags override both.
    #[arg(long)]
    config: Option<PathBuf>,

    /// λ regularizer: l1, l2, or fn.
    #[arg(long)]
    reg: Option<String>,

    /// Constrain λ to be entrywise nonnegative.
    #[arg(long)]
    nonneg: bool,

    /// Core ridge strength α.
    #[arg(long)]
    alpha: Option<f64>,

    /// λ regularization strength β.
    #[arg(long)]
    beta: Option<f64>,

    /// CPD rank R.
    #[arg(long)]
    rank: Option<usize>,

    /// Frequencies per input dimension I (a power of two when quantized).
    #[arg(long)]
    num_freq: Option<usize>,

    /// ALS epochs (full sweeps).
    #[arg(long)]
    epochs: Option<usize>,

    /// Comma-separated θ values (feature maps for train, grid for cv).
    #[arg(long, value_delimiter = ',')]
    thetas: Option<Vec<f64>>,

    /// Base RNG seed; restart t uses seed + t.
    #[arg(long)]
    seed: Option<u64>,

    /// Number of independent restarts (fresh split and init each).
    #[arg(long)]
    restarts: Option<usize>,

    /// Run restarts sequentially on one thread for fair timing.
    #[arg(long)]
    fair_timing: bool,

    /// Stream features instead of caching them (slower, O(NRP) memory).
    #[arg(long)]
    low_mem: bool,

    /// Output path for the JSON run report (a per-restart CSV is written
    /// alongside with extension .csv).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,

    /// Comma-separated ascending P values; defaults to 1..=P for the
    /// configured θ list.
    #[arg(long, value_delimiter = ',')]
    p_values: Option<Vec<usize>>,
}

/// Resolve precedence: defaults <- preset <- config file <- flags.
fn build_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut config = match &args.preset {
        Some(name) => preset(name)?,
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &args.config {
        let body = std::fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
            path: path.clone(),
            source,
        })?;
        let partial: PartialExperiment =
            serde_json::from_str(&body).map_err(|source| CliError::ConfigParse {
                path: path.clone(),
                source,
            })?;
        partial.apply(&mut config);
    }
    if let Some(v) = &args.reg {
        config.train.reg = v.parse().map_err(CliError::BadReg)?;
    }
    if args.nonneg {
        config.train.nonneg = true;
    }
    if let Some(v) = args.alpha {
        config.train.alpha = v;
    }
    if let Some(v) = args.beta {
        config.train.beta = v;
    }
    if let Some(v) = args.rank {
        config.train.rank = v;
    }
    if let Some(v) = args.num_freq {
        config.num_freq = v;
    }
    if let Some(v) = args.epochs {
        config.train.epochs = v;
    }
    if let Some(v) = &args.thetas {
        config.thetas = v.clone();
    }
    if let Some(v) = args.seed {
        config.train.seed = v;
        config.split_seed = v;
    }
    if let Some(v) = args.restarts {
        config.train.restarts = v;
    }
    if args.low_mem {
        config.train.cache_features = false;
    }
    config.train.validate()?;
    Ok(config)
}

/// When running a preset, cross-check the table against the manifest
/// shipped next to the data file (warnings only, never fatal).
fn manifest_warnings(args: &RunArgs, rows: usize, dims: usize) {
    let Some(name) = &args.preset else {
        return;
    };
    let manifest_path = args
        .data
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join("manifest.json");
    if !manifest_path.exists() {
        return;
    }
    match load_manifest(&manifest_path) {
        Ok(manifest) => {
            for warning in check_against_manifest(&manifest, name, rows, dims) {
                eprintln!("warning: {warning}");
            }
        }
        Err(error) => eprintln!(
            "warning: could not read manifest {}: {error}",
            manifest_path.display()
        ),
    }
}

fn write_report(out: &Path, report: &RunReport) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(report)?;
    std::fs::write(out, body).map_err(|source| CliError::Write {
        path: out.to_path_buf(),
        source,
    })?;
    let csv_path = out.with_extension("csv");
    let mut writer = csv::Writer::from_path(&csv_path).map_err(|source| CliError::Csv {
        path: csv_path.clone(),
        source,
    })?;
    let result = (|| -> Result<(), csv::Error> {
        let mut header = vec!["restart".to_string(), "mse".into(), "seconds".into()];
        if report.method == "cv" {
            header.push("selected_theta".into());
        } else {
            let p = report.lambdas.as_ref().map_or(0, |l| l[0].len());
            header.extend((0..p).map(|i| format!("lambda_{i}")));
        }
        writer.write_record(&header)?;
        for t in 0..report.per_restart_mse.len() {
            let mut row = vec![
                t.to_string(),
                report.per_restart_mse[t].to_string(),
                report.per_restart_seconds[t].to_string(),
            ];
            if let Some(thetas) = &report.selected_thetas {
                row.push(thetas[t].to_string());
            }
            if let Some(lambdas) = &report.lambdas {
                row.extend(lambdas[t].iter().map(|v| v.to_string()));
            }
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    })();
    if let Err(error) = result {
        return Err(CliError::Csv {
            path: csv_path,
            source: error,
        });
    }
    println!(
        "report written to {} (per-restart rows in {})",
        out.display(),
        csv_path.display()
    );
    Ok(())
}

fn write_sweep(out: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(out).map_err(|source| CliError::Csv {
        path: out.to_path_buf(),
        source,
    })?;
    let result = (|| -> Result<(), csv::Error> {
        writer.write_record(["P", "time_fl", "time_cv", "mse_fl", "mse_cv"])?;
        for row in rows {
            writer.write_record([
                row.p.to_string(),
                row.time_fl.to_string(),
                row.time_cv.to_string(),
                row.mse_fl.to_string(),
                row.mse_cv.to_string(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    })();
    result.map_err(|source| CliError::Csv {
        path: out.to_path_buf(),
        source,
    })?;
    println!("sweep written to {}", out.display());
    Ok(())
}

fn summarize(report: &RunReport) {
    println!(
        "{}: mean test MSE {:.6} ± {:.6} over {} restarts, total training {:.3} s",
        report.method, report.mean_mse, report.std_mse, report.restarts, report.wall_seconds
    );
    if let Some(thetas) = &report.selected_thetas {
        println!("selected thetas per restart: {thetas:?}");
    }
    if let Some(lambdas) = &report.lambdas {
        let zeros: usize = lambdas
            .iter()
            .flat_map(|l| l.iter())
            .filter(|&&v| v == 0.0)
            .count();
        println!(
            "learned lambdas: {} exact zeros across {} entries",
            zeros,
            lambdas.iter().map(Vec::len).sum::<usize>()
        );
    }
}

fn load_table(args: &RunArgs) -> Result<cpdfl::data::RawTable, CliError> {
    let target: TargetColumn = args.target.parse().expect("infallible");
    let raw = load_csv(&args.data, &target, !args.no_header)?;
    manifest_warnings(args, raw.num_rows(), raw.num_features());
    Ok(raw)
}

fn cmd_train(args: &RunArgs) -> Result<(), CliError> {
    let config = build_config(args)?;
    let raw = load_table(args)?;
    let family = config.family(raw.num_features()).map_err(BenchError::from)?;
    let report = run_fl(
        &raw,
        &config.split_spec(),
        &config.train,
        &family,
        !args.fair_timing,
    )?;
    summarize(&report);
    write_report(&args.out, &report)
}

fn cmd_cv(args: &RunArgs) -> Result<(), CliError> {
    let config = build_config(args)?;
    let raw = load_table(args)?;
    let family = config.family(raw.num_features()).map_err(BenchError::from)?;
    let report = run_cv(
        &raw,
        &config.split_spec(),
        &config.cv_config(),
        &family,
        !args.fair_timing,
    )?;
    summarize(&report);
    write_report(&args.out, &report)
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let config = build_config(&args.run)?;
    let raw = load_table(&args.run)?;
    let family = config.family(raw.num_features()).map_err(BenchError::from)?;
    let p_values = match &args.p_values {
        Some(values) => values.clone(),
        None => (1..=config.thetas.len()).collect(),
    };
    let rows = sweep_p(
        &raw,
        &config.split_spec(),
        &config.cv_config(),
        &family,
        &p_values,
        !args.run.fair_timing,
    )?;
    for row in &rows {
        println!(
            "P={}: FL {:.3} s (MSE {:.6}), CV {:.3} s (MSE {:.6})",
            row.p, row.time_fl, row.mse_fl, row.time_cv, row.mse_cv
        );
    }
    write_sweep(&args.run.out, &rows)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Cv(args) => cmd_cv(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::FAILURE
        }
    }
}
