use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod plot;

use config::PipelineConfig;

#[derive(Debug, Parser)]
#[command(
    name = "chorovessel",
    version,
    about = "Choroidal vessel maps: proposal, correction rounds, morphometry and statistics",
    propagate_version = true
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Seed for every stochastic step
    #[arg(long, global = true, default_value_t = 42, display_order = 100)]
    seed: u64,
    /// Worker threads (default: all cores)
    #[arg(long, global = true, display_order = 100)]
    threads: Option<usize>,
    /// JSON file overriding pipeline settings [env: CHOROVESSEL_CONFIG]
    #[arg(long, global = true, display_order = 100)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Vesselness probability map and proposal mask for one image or a directory of PNGs
    Preseg(commands::PresegArgs),
    /// Skeletonize a mask and write its vessel graph as JSON
    Graph(commands::GraphArgs),
    /// Morphometry table (one row per mask) as CSV
    Metrics(commands::MetricsArgs),
    /// Compare predicted masks with reference masks; JSON report and SVG figures
    Eval(commands::EvalArgs),
    /// Per-metric logistic association with the outcome; results CSV and forest plot
    Assoc(commands::AssocArgs),
    /// Synthetic vessel tree with exact ground truth
    Synth(commands::SynthArgs),
    /// Create a correction project from a directory of images
    Init(commands::InitArgs),
    /// Serve a project's HTTP API
    Serve(commands::ServeArgs),
    /// Simulated correction loop over synthetic scenes
    LoopSim(commands::LoopSimArgs),
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<chorovessel_core::Error> for CliError {
    fn from(e: chorovessel_core::Error) -> Self {
        if e.is_input_error() {
            Self::input(e.to_string())
        } else {
            Self::internal(e.to_string())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::internal(e.to_string()))?;
    }
    let cfg = PipelineConfig::load(cli.global.config.as_deref())?;
    let seed = cli.global.seed;
    match cli.command {
        Command::Preseg(a) => commands::preseg(a, &cfg),
        Command::Graph(a) => commands::graph(a, &cfg),
        Command::Metrics(a) => commands::metrics(a, &cfg),
        Command::Eval(a) => commands::eval(a, &cfg, seed),
        Command::Assoc(a) => commands::assoc(a, &cfg),
        Command::Synth(a) => commands::synth(a, seed),
        Command::Init(a) => commands::init(a, &cfg),
        Command::Serve(a) => commands::serve(a),
        Command::LoopSim(a) => commands::loop_sim(a, &cfg, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
