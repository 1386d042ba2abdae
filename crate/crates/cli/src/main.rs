//! `semloc`: build tile indexes from semantic maps, localize labelled
//! queries, generate synthetic benchmarks and evaluate retrieval.

mod commands;
mod manifest;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "semloc", version, about = "Semantic cross-view localization against vector maps")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Configuration override `KEY=VALUE`; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tile a map and write its descriptor index.
    BuildIndex(BuildIndexArgs),
    /// Rank the tiles of an index against one query.
    Query(QueryArgs),
    /// Generate a synthetic map, queries and ground-truth manifest.
    Synth(SynthArgs),
    /// Rank every query of a manifest and report recall curves.
    Evaluate(EvaluateArgs),
    /// List the semantic tree's cluster of every tile at each layer.
    TreeLayers(TreeLayersArgs),
}

/// Matching options shared by `query` and `evaluate`.
#[derive(Args)]
struct MatchArgs {
    /// Descriptor origin: cc (camera centre) or ci (image centre).
    #[arg(long)]
    origin: Option<String>,
    /// Query sector mask: auto, full or fov.
    #[arg(long)]
    mask: Option<String>,
    /// Presence term weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Forward cut-off of rectified ground content, meters, or `none`.
    #[arg(long)]
    max_range: Option<String>,
    /// Leave empty tiles out of the ranking.
    #[arg(long)]
    skip_empty: bool,
    /// Use the FFT rotation search.
    #[arg(long)]
    fft: bool,
}

impl MatchArgs {
    fn flags(&self, f: &mut settings::Flags) {
        f.opt("origin", &self.origin)
            .opt("mask", &self.mask)
            .opt("lambda", &self.lambda)
            .opt("max_range", &self.max_range)
            .on("skip_empty", self.skip_empty)
            .on("fft", self.fft);
    }
}

#[derive(Args)]
pub struct BuildIndexArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    /// Also build the semantic tree.
    #[arg(long)]
    tree: bool,
    /// Comma-separated concept names to keep in descriptors.
    #[arg(long)]
    concepts: Option<String>,
    #[arg(long)]
    tile_side: Option<f64>,
    #[arg(long)]
    tile_stride: Option<f64>,
    #[arg(long)]
    sectors: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SearchMode {
    Exhaustive,
    Tree,
}

#[derive(Args)]
pub struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    query: PathBuf,
    /// Full ranking as CSV.
    #[arg(long)]
    ranking: Option<PathBuf>,
    /// Heat map as an ASCII PGM.
    #[arg(long)]
    heat: Option<PathBuf>,
    /// Rows printed to standard output.
    #[arg(long)]
    top_k: Option<usize>,
    /// ssl, presence, ssl+presence or random[@seed].
    #[arg(long)]
    scoring: Option<String>,
    #[arg(long, value_enum, default_value = "exhaustive")]
    search: SearchMode,
    #[command(flatten)]
    matching: MatchArgs,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, short)]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of queries.
    #[arg(long)]
    queries: Option<usize>,
    /// Side of the square map, meters.
    #[arg(long)]
    extent: Option<f64>,
    /// Per-axis standard deviation of segment translation, meters.
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Expected spurious segments per kept segment.
    #[arg(long)]
    spurious: Option<f64>,
    /// verbatim, footprint or camera.
    #[arg(long)]
    style: Option<String>,
    /// District side, meters; 0 mixes every concept everywhere.
    #[arg(long)]
    district_size: Option<f64>,
    #[arg(long)]
    district_keep: Option<f64>,
    /// Restrict camera headings to whole sectors.
    #[arg(long)]
    quantized_heading: bool,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Evaluation configuration `LABEL:SCORING[:ORIGIN[:CONCEPTS]]`;
    /// repeatable. Concepts are comma-separated names.
    #[arg(long = "run", value_name = "SPEC")]
    runs: Vec<String>,
    /// Rank-CDF curve CSV.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Summary CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[command(flatten)]
    matching: MatchArgs,
}

#[derive(Args)]
pub struct TreeLayersArgs {
    #[arg(long)]
    index: PathBuf,
    /// CSV destination; standard output when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SEMLOC_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .with_context(|| format!("SEMLOC_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    init_threads()?;
    let config = cli.config.as_deref();
    match &cli.command {
        Command::BuildIndex(a) => commands::build_index(a, config, &cli.sets),
        Command::Query(a) => commands::query(a, config, &cli.sets),
        Command::Synth(a) => commands::synth(a, config, &cli.sets),
        Command::Evaluate(a) => commands::evaluate(a, config, &cli.sets),
        Command::TreeLayers(a) => commands::tree_layers(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
