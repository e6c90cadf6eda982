//! `ari`: batch workflows over tracking exports, preference metrics,
//! mixed-model fits and the controller / behaviour simulators.

mod analyze;
mod figure;
mod manifest;
mod preprocess;
mod report;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad invocation (exit 1).
    Usage(anyhow::Error),
    /// Unreadable or invalid input data (exit 2).
    Data(anyhow::Error),
    /// Outputs were written but at least one fit did not converge (exit 3).
    NonConvergence(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::NonConvergence(_) => 3,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

pub type CmdResult = Result<(), Failure>;

pub fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow::anyhow!("{msg}"))
}

#[derive(Parser, Debug)]
#[command(name = "ari", version, about = "Chick-robot interaction analysis pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tracking CSVs -> QC table, exclusions and 1 Hz trajectories.
    Preprocess(PreprocessArgs),
    /// Trajectories -> preference tables, model fits and figures.
    Analyze(AnalyzeArgs),
    /// Run the actuation controller and check the session log for safety.
    SimulateProtocol(SimulateProtocolArgs),
    /// Generate synthetic tracking data with known preferences.
    SimulateChicks(SimulateChicksArgs),
    /// Summarise a preprocess and/or analyze output directory.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    /// Tracking CSV files; the file stem is the chick id.
    pub inputs: Vec<PathBuf>,
    /// Preset name (exp1a, exp1b, exp2, exp3) or layout JSON file.
    #[arg(long)]
    pub layout: String,
    /// JSON file with `pixel_corners`; pixels are taken as millimetres when omitted.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    #[arg(long, default_value_t = ari_core::ingest::DEFAULT_QC_LIKELIHOOD)]
    pub qc_likelihood: f64,
    #[arg(long, default_value_t = ari_core::ingest::DEFAULT_QC_FRACTION)]
    pub qc_fraction: f64,
    #[arg(long, default_value = ari_core::ingest::DEFAULT_KEYPOINT)]
    pub keypoint: String,
    /// Camera frame rate of the recordings.
    #[arg(long, default_value_t = 10.0)]
    pub fps: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Output directory of `preprocess`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub layout: String,
    /// `chick_id,start_side` table; every chick starts on the left when omitted.
    #[arg(long)]
    pub sessions: Option<PathBuf>,
    /// Comma-separated metrics; defaults to every metric the layout supports.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,
    #[arg(long, default_value_t = ari_core::metrics::DEFAULT_BIN_SECONDS)]
    pub bin_seconds: u32,
    #[arg(long, default_value_t = ari_core::betamm::DEFAULT_N_QUAD)]
    pub n_quad: usize,
    /// Drop interpolated seconds before computing the metrics.
    #[arg(long)]
    pub exclude_interpolated: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateProtocolArgs {
    /// Controller configuration JSON; defaults apply to omitted fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Command-injection script (`<seconds> start|stop|side-override <side>`).
    #[arg(long)]
    pub commands: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateChicksArgs {
    #[arg(long)]
    pub layout: String,
    /// Behaviour parameters JSON; defaults apply to omitted fields.
    #[arg(long)]
    pub behavior: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub n_chicks: usize,
    /// Base seed; chick i uses seed + i.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub fps: f64,
    /// Session length; defaults to the layout's.
    #[arg(long)]
    pub session_seconds: Option<f64>,
    #[arg(long, default_value_t = ari_core::metrics::DEFAULT_BIN_SECONDS)]
    pub bin_seconds: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Directories written by `preprocess` or `analyze`.
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Preprocess(a) => preprocess::run(&a),
        Command::Analyze(a) => analyze::run(&a),
        Command::SimulateProtocol(a) => simulate::run_protocol(&a),
        Command::SimulateChicks(a) => simulate::run_chicks(&a),
        Command::Report(a) => report::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(e) | Failure::Data(e) => eprintln!("error: {e:#}"),
                Failure::NonConvergence(msg) => eprintln!("warning: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
