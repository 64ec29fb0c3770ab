//! `asmp`: command-line driver for synthetic scenes, scene graphs,
//! separation, losses and evaluation.

mod eval;
mod graph;
mod losses;
mod report;
mod separate;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use asmp_core::losses::LossWeights;
use asmp_core::motion::{DirectionScheme, DEFAULT_TAU};
use asmp_core::scenegraph::{GraphConfig, DEFAULT_GAMMA};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "asmp", version, about = "Scene-graph audio separation and motion labelling")]
struct Cli {
    #[command(flatten)]
    run: RunConfig,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Oracle,
    Network,
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Seed for every random choice; for `synth` it replaces the spec seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// IoU threshold for context objects.
    #[arg(long, global = true, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    /// Distance percentile used as the RBF bandwidth.
    #[arg(long, global = true, default_value_t = 25.0)]
    pub sigma: f64,
    /// No-motion threshold on the displacement norm.
    #[arg(long, global = true, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    /// Frames per window; must agree with the bundle when given.
    #[arg(long, global = true)]
    pub window_frames: Option<usize>,
    #[arg(long, global = true, default_value_t = 0.05)]
    pub l1: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub l2: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub l3: f64,
    #[arg(long, global = true, default_value_t = 0.05)]
    pub l4: f64,
    /// Direction classes, 10 or 28.
    #[arg(long, global = true, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, global = true, value_enum, default_value_t = Mode::Oracle)]
    pub mode: Mode,
    /// Also emit the two-threshold graphs.
    #[arg(long, global = true)]
    pub multiscale: bool,
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn graph_config(&self) -> CliResult<GraphConfig> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(CliError::Usage(format!("--gamma must be in [0, 1], got {}", self.gamma)));
        }
        if !(0.0..=100.0).contains(&self.sigma) {
            return Err(CliError::Usage(format!("--sigma must be in [0, 100], got {}", self.sigma)));
        }
        if !(0.0..).contains(&self.tau) {
            return Err(CliError::Usage(format!("--tau must be >= 0, got {}", self.tau)));
        }
        Ok(GraphConfig {
            gamma: self.gamma,
            percentile: self.sigma,
            seed: self.seed(),
            ..GraphConfig::default()
        })
    }

    pub fn weights(&self) -> CliResult<LossWeights> {
        let w = LossWeights {
            cons: self.l1,
            cyc: self.l2,
            ortho: self.l3,
            dirpred: self.l4,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn scheme(&self) -> CliResult<DirectionScheme> {
        Ok(DirectionScheme::from_classes(self.classes)?)
    }

    pub fn check_window_frames(&self, bundle_frames: usize) -> CliResult<()> {
        match self.window_frames {
            Some(l) if l != bundle_frames => Err(CliError::Usage(format!(
                "--window-frames {l} disagrees with the bundle's {bundle_frames}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic scene bundle.
    Synth {
        /// Output bundle directory.
        out: PathBuf,
        /// Scene description; a random scene is drawn from the seed when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Object count for random scenes (1 or 2).
        #[arg(long, default_value_t = 2)]
        objects: usize,
    },
    /// Build per-window scene graphs and displacement labels.
    Graph {
        bundle: PathBuf,
        /// Defaults to `<bundle>/graph`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mix two bundles' audio and separate it again.
    Separate {
        bundle_a: PathBuf,
        bundle_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the training losses of a separation.
    Losses {
        separation: PathBuf,
        /// `labels.json` from `graph`, one per video in separation order.
        #[arg(long)]
        labels: Vec<PathBuf>,
        /// Defaults to `<separation>/losses.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a separation and its direction predictions.
    Eval {
        separation: PathBuf,
        /// `labels.json` from `graph`, one per video in separation order.
        #[arg(long)]
        labels: Vec<PathBuf>,
        /// Defaults to `<separation>/metrics.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Core(asmp_core::Error),
    Usage(String),
}

impl From<asmp_core::Error> for CliError {
    fn from(e: asmp_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_missing_input() => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("ASMP_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("ASMP_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let run = &cli.run;
    match cli.command {
        Command::Synth { out, spec, objects } => synth::run(run, spec.as_deref(), objects, &out),
        Command::Graph { bundle, out } => {
            let out = out.unwrap_or_else(|| bundle.join("graph"));
            graph::run(run, &bundle, &out)
        }
        Command::Separate { bundle_a, bundle_b, out } => separate::run(run, &bundle_a, &bundle_b, &out),
        Command::Losses { separation, labels, out } => {
            let out = out.unwrap_or_else(|| separation.join("losses.json"));
            losses::run(run, &separation, &labels, &out)
        }
        Command::Eval { separation, labels, out } => {
            let out = out.unwrap_or_else(|| separation.join("metrics.csv"));
            eval::run(&separation, &labels, &out)
        }
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
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
