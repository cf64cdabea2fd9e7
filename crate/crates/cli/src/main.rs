mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use ctxmaint_core::learners::ModelKind;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or input data; exit code 1.
    Validation(String),
    /// Anything else; exit code 2.
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<ctxmaint_core::Error> for CliError {
    fn from(e: ctxmaint_core::Error) -> Self {
        use ctxmaint_core::Error as E;
        match e {
            E::Csv(_) | E::Json(_) | E::NonConvergence { .. } | E::BootstrapCapExceeded { .. } | E::MissingCover { .. } => {
                CliError::Internal(e.to_string())
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ctxmaint_edgesim::Error> for CliError {
    fn from(e: ctxmaint_edgesim::Error) -> Self {
        use ctxmaint_edgesim::Error as E;
        match e {
            E::Csv(_) => CliError::Internal(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "ctxmaint", version, about = "Context-aware predictive maintenance experiments")]
pub struct Cli {
    /// Root seed; every random draw of the run derives from it.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output format for stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

/// Where rows come from: a CSV file (AI4I or synthetic, detected from the
/// header) or a freshly generated synthetic fleet.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV. Omit to generate a synthetic fleet.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub gen: GenArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Synthetic fleet size.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Risk noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Target share of positive labels.
    #[arg(long, default_value_t = 0.30)]
    pub positive_rate: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Disable SMOTE on training partitions.
    #[arg(long)]
    pub no_smote: bool,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: ctxmaint_core::Error| e.to_string())
}

fn parse_models(s: &str) -> Result<Vec<ModelKind>, String> {
    s.split(',').map(|m| parse_model(m.trim())).collect()
}

fn parse_sigmas(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    StratifiedCv,
    TimeSplit,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic fleet CSV.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one model on a whole dataset and save it.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// logistic, forest, gbdt-level or gbdt-leaf.
        #[arg(long, default_value = "gbdt-leaf", value_parser = parse_model)]
        model: ModelKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a saved model on a dataset.
    Evaluate {
        /// Model file written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare all models under cross-validation or a time split.
    Benchmark {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = ProtocolArg::StratifiedCv)]
        protocol: ProtocolArg,
        /// Comma-separated model kinds.
        #[arg(long, value_parser = parse_models)]
        models: Option<Vec<ModelKind>>,
        #[arg(long, default_value_t = 0.7)]
        train_fraction: f64,
        #[command(flatten)]
        cv: CvArgs,
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        /// Also score each AI4I failure mode separately.
        #[arg(long)]
        per_mode: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Feature-group ablation on synthetic data.
    Ablate {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, default_value = "gbdt-leaf", value_parser = parse_model)]
        model: ModelKind,
        #[command(flatten)]
        cv: CvArgs,
        /// Independent fold assignments averaged per configuration.
        #[arg(long, default_value_t = ctxmaint_core::experiments::DEFAULT_ABLATION_REPEATS)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// F1 and AUC across label-noise levels.
    NoiseSweep {
        #[command(flatten)]
        gen: GenArgs,
        /// Comma-separated noise levels.
        #[arg(long, value_parser = parse_sigmas, default_value = "0,0.25,0.5,1,1.5,2,3")]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        seeds_per_sigma: usize,
        #[arg(long, default_value = "gbdt-leaf", value_parser = parse_model)]
        model: ModelKind,
        #[command(flatten)]
        cv: CvArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Platt scaling and reliability diagrams.
    Calibrate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "gbdt-leaf", value_parser = parse_model)]
        model: ModelKind,
        #[command(flatten)]
        cv: CvArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Days-to-service regression on synthetic data.
    Regress {
        #[arg(long, default_value_t = 1500)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.7)]
        train_fraction: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean |SHAP| feature ranking.
    Explain {
        #[command(flatten)]
        data: DataArgs,
        /// Explain this saved model instead of fitting one.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 15)]
        top: usize,
        /// Write per-row attributions here.
        #[arg(long)]
        shap_csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SMOTE inside folds versus SMOTE before splitting.
    LeakageDemo {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "gbdt-leaf", value_parser = parse_model)]
        model: ModelKind,
        #[command(flatten)]
        cv: CvArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate sensor streams, fuse them and model alert latency.
    EdgeSim {
        /// Scenario JSON; defaults are used when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Simulated seconds.
        #[arg(long, default_value_t = 600.0)]
        duration: f64,
        /// Latency samples per mode.
        #[arg(long, default_value_t = 1000)]
        alerts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the invocation recorded in a manifest and compare output hashes.
    Verify {
        manifest: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .parse_default_env()
        .init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("internal error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
