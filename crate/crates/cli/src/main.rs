//! `ppd-laplace`: run predictive-distribution experiments from the command line.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error (unknown
//! key, bad value), 3 numeric failure inside an engine. Failures also write
//! `error.json` into the output directory.

mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ppd_laplace::experiments::{run_experiment, run_fit, run_ppd, ExperimentConfig, ExperimentKind, RunSummary};
use ppd_laplace::Error;

const THREADS_ENV: &str = "PPD_LAPLACE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "ppd-laplace",
    version,
    about = "Laplace-based posterior predictive experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file with `key = value` lines and optional `[section]` headers.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one config entry; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Root seed; every data, split, init and Monte Carlo stream derives from it
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Accumulation precision of the cancellation study's naive path
    #[arg(long, global = true, value_enum)]
    precision: Option<PrecisionArg>,

    /// Comma-separated engines: ssla, assla, la-mc.
    #[arg(long, global = true)]
    engines: Option<String>,

    /// Comma-separated curvature kinds: dense, ggn, diag, blocked.
    #[arg(long, global = true)]
    curvature: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PrecisionArg {
    Single,
    Double,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Fit the MAP of the configured model and write fit.json.
    Fit,
    /// Normalized predictive grids at `x_test`, one per engine.
    Ppd,
    /// Engines against the closed-form conjugate predictive.
    ValidateConjugate,
    /// Heteroscedastic regression calibration benchmark.
    HeteroBench,
    /// Single- versus double-precision cancellation study.
    Cancellation,
    /// Prior modularity on a one-dimensional linear regression.
    PriorModularity,
    /// Calibration benchmark on a local CSV file.
    CsvBench,
}

impl Command {
    fn default_kind(self) -> ExperimentKind {
        match self {
            Command::Fit | Command::Ppd | Command::ValidateConjugate => ExperimentKind::ConjugateNormal,
            Command::HeteroBench => ExperimentKind::HeteroToy,
            Command::Cancellation => ExperimentKind::Cancellation,
            Command::PriorModularity => ExperimentKind::PriorModularity,
            Command::CsvBench => ExperimentKind::CsvRegression,
        }
    }

    fn accepts(self, kind: ExperimentKind) -> bool {
        match self {
            Command::Fit | Command::Ppd => matches!(
                kind,
                ExperimentKind::ConjugateNormal
                    | ExperimentKind::ConjugatePoisson
                    | ExperimentKind::HeteroToy
                    | ExperimentKind::CsvRegression
            ),
            Command::ValidateConjugate => {
                matches!(kind, ExperimentKind::ConjugateNormal | ExperimentKind::ConjugatePoisson)
            }
            other => other.default_kind() == kind,
        }
    }
}

/// Defaults for the experiment, then config file, then `--set`, then flags.
fn resolve(cli: &Cli) -> ppd_laplace::Result<ExperimentConfig> {
    let mut entries = match &cli.config {
        Some(p) => settings::read_config_file(p)?,
        None => Vec::new(),
    };
    for s in &cli.set {
        entries.push(settings::parse_override(s)?);
    }
    if let Some(seed) = cli.seed {
        entries.push(("seed".into(), seed.to_string()));
    }
    if let Some(p) = cli.precision {
        let v = match p {
            PrecisionArg::Single => "single",
            PrecisionArg::Double => "double",
        };
        entries.push(("precision".into(), v.into()));
    }
    if let Some(e) = &cli.engines {
        entries.push(("engines".into(), e.clone()));
    }
    if let Some(c) = &cli.curvature {
        entries.push(("curvature".into(), c.clone()));
    }
    let kind = match entries.iter().rev().find(|(k, _)| k == "experiment") {
        Some((_, v)) => v.parse()?,
        None => cli.command.default_kind(),
    };
    if !cli.command.accepts(kind) {
        return Err(Error::Config(format!(
            "experiment '{}' does not fit this subcommand",
            kind.as_str()
        )));
    }
    let mut cfg = ExperimentConfig::for_kind(kind);
    for (k, v) in &entries {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn configure_threads() {
    let Ok(v) = std::env::var(THREADS_ENV) else { return };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size the worker pool: {e}");
            }
        }
        _ => log::warn!("ignoring {THREADS_ENV}={v}: expected a positive integer"),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::UnknownKey(_) | Error::Config(_) => 2,
        Error::Numeric { .. } => 3,
        _ => 1,
    }
}

fn error_record(e: &Error) -> serde_json::Value {
    let kind = match e {
        Error::UnknownKey(_) => "unknown-key",
        Error::Config(_) => "config",
        Error::Numeric { .. } => "numeric",
        Error::Domain(_) => "domain",
        Error::Unsupported(_) => "unsupported",
        Error::Ingest { .. } => "ingest",
        Error::Io(_) => "io",
        Error::Csv(_) => "csv",
        Error::Json(_) => "json",
    };
    let mut rec = serde_json::json!({
        "error": kind,
        "exit_code": exit_code(e),
        "message": e.to_string(),
    });
    match e {
        Error::UnknownKey(k) => rec["key"] = k.as_str().into(),
        Error::Numeric {
            module,
            operation,
            detail,
        } => {
            rec["module"] = (*module).into();
            rec["operation"] = (*operation).into();
            rec["context"] = detail.as_str().into();
        }
        Error::Ingest { row, column, .. } => {
            rec["row"] = (*row).into();
            rec["column"] = column.as_str().into();
        }
        _ => {}
    }
    rec
}

fn report_failure(e: &Error, out: &Path) -> ExitCode {
    let rec = error_record(e);
    eprintln!("{rec}");
    if std::fs::create_dir_all(out).is_ok() {
        let path = out.join("error.json");
        if let Err(w) = ppd_laplace::experiments::report::write_atomic(&path, format!("{rec}\n").as_bytes()) {
            log::warn!("could not write {}: {w}", path.display());
        }
    }
    ExitCode::from(exit_code(e))
}

fn run(cli: &Cli, cfg: &ExperimentConfig) -> ppd_laplace::Result<RunSummary> {
    std::fs::create_dir_all(&cli.out)?;
    log::info!("resolved configuration:\n{}", cfg.to_text());
    match cli.command {
        Command::Fit => run_fit(cfg, &cli.out),
        Command::Ppd => run_ppd(cfg, &cli.out),
        _ => run_experiment(cfg, &cli.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    configure_threads();
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => return report_failure(&e, &cli.out),
    };
    match run(&cli, &cfg) {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => report_failure(&e, &cli.out),
    }
}
