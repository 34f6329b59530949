mod apps;
mod fit;
mod output;
mod studies;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pdmcount::ModelKind;

#[derive(Parser, Debug)]
#[command(name = "pdmcount", version, about = "Regression for time series of counts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Glm,
    Fmm2,
    Hmm2,
    All,
}

pub fn expand_models(models: &[ModelArg]) -> Vec<ModelKind> {
    let mut out = Vec::new();
    for m in models {
        let kinds: &[ModelKind] = match m {
            ModelArg::Glm => &[ModelKind::Glm],
            ModelArg::Fmm2 => &[ModelKind::Fmm2],
            ModelArg::Hmm2 => &[ModelKind::Hmm2],
            ModelArg::All => &[ModelKind::Glm, ModelKind::Fmm2, ModelKind::Hmm2],
        };
        for k in kinds {
            if !out.contains(k) {
                out.push(*k);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeArg {
    White,
    Ddw,
    Both,
    None,
}

impl SeArg {
    pub fn white(self) -> bool {
        matches!(self, SeArg::White | SeArg::Both)
    }

    pub fn ddw(self) -> bool {
        matches!(self, SeArg::Ddw | SeArg::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Table2,
    Fig2,
    Fig3,
    Fig4,
    Polio,
    Seizure,
}

#[derive(clap::Args, Debug, Clone, serde::Serialize)]
pub struct FitArgs {
    /// CSV with a `y` count column and numeric covariate columns.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "all")]
    pub model: Vec<ModelArg>,
    #[arg(long, value_enum, default_value = "both")]
    pub se: SeArg,
    /// Lag truncation of the White SE.
    #[arg(long, default_value_t = 1)]
    pub ell: usize,
    /// Lag cap of the moment-based SE; defaults to floor(n^(1/3)).
    #[arg(long)]
    pub ddw_max_lag: Option<usize>,
    /// Seeds the random restarts of the mixture fits.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub starts: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Debug, Clone, serde::Serialize)]
pub struct SimulateArgs {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub preset: Option<String>,
    /// JSON simulation config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Child stream (replicate index) to draw.
    #[arg(long, default_value_t = 0)]
    pub replicate: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Debug, Clone, serde::Serialize)]
pub struct StudyArgs {
    #[arg(long, conflicts_with = "design", required_unless_present = "design")]
    pub preset: Option<String>,
    /// JSON study design.
    #[arg(long)]
    pub design: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; all cores when omitted. Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Debug, Clone, serde::Serialize)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::Args, Debug, Clone, serde::Serialize)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub target: Target,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Dataset for the application targets (default data/polio.csv or data/seizure.csv).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit models to a count series and compute robust standard errors.
    Fit(FitArgs),
    /// Draw one series from a preset or config, with its true parameters.
    Simulate(SimulateArgs),
    /// Run a Monte Carlo efficiency study.
    Study(StudyArgs),
    /// Estimate OD, AC1 and SP from GLM residuals and recommend an estimator.
    Diagnose(DiagnoseArgs),
    /// Regenerate one of the reference tables or figures.
    Reproduce(ReproduceArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => fit::run(&a),
        Command::Simulate(a) => studies::simulate(&a),
        Command::Study(a) => studies::study(&a),
        Command::Diagnose(a) => fit::diagnose(&a),
        Command::Reproduce(a) => match a.target {
            Target::Polio => apps::polio(&a),
            Target::Seizure => apps::seizure(&a),
            _ => studies::reproduce(&a),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
