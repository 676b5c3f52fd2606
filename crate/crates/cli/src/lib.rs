//! The `crowdcell` command line.

pub mod commands;
pub mod error;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "crowdcell", version, about = "Crowd labelling of red blood cell crops")]
pub struct Cli {
    /// TOML file with optional [segment], [simulate] and [serve] tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory. A run manifest is appended to runs.jsonl in it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment smear images into per-cell crops.
    Segment(SegmentArgs),
    /// Turn a crop or ground-truth manifest into a batch request.
    Batch(BatchArgs),
    /// Run the task service.
    Serve(ServeArgs),
    /// Generate a simulated vote corpus.
    Simulate(SimulateArgs),
    /// Consensus labels and the agreement histogram for a vote file.
    Aggregate(AggregateArgs),
    /// Metrics tables for a vote file against ground truth.
    Report(ReportArgs),
    /// Consensus accuracy expected from independent workers.
    Estimate(EstimateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitKind {
    Checkerboard,
    Circle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolarityArg {
    Dark,
    Bright,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Directory of png, jpeg, tiff or bmp images.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_enum)]
    pub init: Option<InitKind>,
    #[arg(long, value_enum)]
    pub polarity: Option<PolarityArg>,
    /// Components smaller than this many pixels are dropped.
    #[arg(long, default_value_t = crowdcell_core::segmentation::DEFAULT_MIN_AREA)]
    pub min_area: usize,
    /// Margin around each crop, in pixels.
    #[arg(long, default_value_t = 2)]
    pub pad: usize,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// Crop manifest written by `segment` (crops.csv).
    #[arg(long, conflicts_with = "truth", required_unless_present = "truth")]
    pub crops: Option<PathBuf>,
    /// Ground-truth manifest: crop_path,label,source_image_id.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Carry truth labels into the batch so the service can report metrics.
    #[arg(long, requires = "truth")]
    pub include_truth: bool,
    /// Shuffle items with --seed before pairing.
    #[arg(long)]
    pub shuffle: bool,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub reward_usd: Option<f64>,
    #[arg(long)]
    pub lifetime_secs: Option<i64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub image_dir: Option<PathBuf>,
    /// Seconds between background sweeps.
    #[arg(long, default_value_t = 60)]
    pub sweep_secs: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Ground-truth manifest giving the items.
    #[arg(long, group = "items")]
    pub truth: Option<PathBuf>,
    /// Item counts per class, circular,elongated,other.
    #[arg(long, group = "items", value_delimiter = ',')]
    pub counts: Option<Vec<usize>>,
    /// Write the fixed 848-item benchmark corpus instead of simulating.
    #[arg(long, group = "items")]
    pub reference: bool,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Per-class worker accuracy; errors split as in the default worker.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Correlation weight, one value or one per class.
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    /// Calibrate rho per class to these consensus accuracies first.
    #[arg(long, value_delimiter = ',', conflicts_with = "rho")]
    pub calibrate: Option<Vec<f64>>,
    #[arg(long)]
    pub calibration_items: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    pub votes: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub quorum: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NaPolicyArg {
    Exclude,
    CountAsError,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub votes: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub quorum: u32,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
    /// How no-consensus items enter the consensus row.
    #[arg(long, value_enum, default_value_t = NaPolicyArg::Exclude)]
    pub na_policy: NaPolicyArg,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Individual accuracies.
    #[arg(long, required = true, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub k: u32,
    #[arg(long, default_value_t = 3)]
    pub quorum: u32,
}

pub struct Context<'a> {
    pub config: Option<&'a Path>,
    pub config_table: toml::Table,
    pub seed: Option<u64>,
    pub out: Option<&'a Path>,
}

impl Context<'_> {
    /// A table of the config file, empty when absent.
    pub fn section(&self, name: &str) -> Result<toml::Table, CliError> {
        match self.config_table.get(name) {
            None => Ok(toml::Table::new()),
            Some(toml::Value::Table(t)) => Ok(t.clone()),
            Some(_) => Err(CliError::Usage(format!("config: [{name}] must be a table"))),
        }
    }

    pub fn out_dir(&self) -> Result<Option<&Path>, CliError> {
        if let Some(dir) = self.out {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        Ok(self.out)
    }

    /// `--out`, or the current directory for commands that must write files.
    pub fn out_or_cwd(&self) -> Result<PathBuf, CliError> {
        Ok(self.out_dir()?.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")))
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config_table = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    let ctx = Context {
        config: cli.config.as_deref(),
        config_table,
        seed: cli.seed,
        out: cli.out.as_deref(),
    };
    match &cli.command {
        Command::Segment(a) => commands::segment::run(&ctx, a),
        Command::Batch(a) => commands::batch::run(&ctx, a),
        Command::Serve(a) => commands::serve::run(&ctx, a),
        Command::Simulate(a) => commands::simulate::run(&ctx, a),
        Command::Aggregate(a) => commands::aggregate::run(&ctx, a),
        Command::Report(a) => commands::report::run(&ctx, a),
        Command::Estimate(a) => commands::estimate::run(&ctx, a),
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with(args: impl IntoIterator<Item = String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { error::EXIT_USAGE } else { error::EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => error::EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
