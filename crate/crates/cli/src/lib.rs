//! `smartreply`: runs each pipeline stage from files in a work directory.

pub mod config;
mod stages;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use smartreply_core::model::Variant;
use smartreply_core::pipeline::Profile;

pub use config::{load_config, Layout, Manifest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Small,
    PaperScale,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Profile {
        match p {
            ProfileArg::Small => Profile::Small,
            ProfileArg::PaperScale => Profile::PaperScale,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "smartreply", version, about = "Proactive smart-reply pipeline")]
pub struct Cli {
    /// Seed for every random choice of the stage.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// TOML file overriding profile defaults, e.g. `[train]\nepochs = 5`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "small")]
    pub profile: ProfileArg,
    /// Directory holding every stage's inputs and outputs.
    #[arg(long, global = true, default_value = "work")]
    pub workdir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with planted intents.
    Synth(SynthArgs),
    /// Train word vectors and Tf-Idf statistics.
    Embed,
    /// Mine investigative-question candidates into a catalog.
    Mine(MineArgs),
    /// Label every round with the candidates asked next.
    Label,
    /// Train one model variant with a λ grid search.
    Train(TrainArgs),
    /// Benchmark methods over several seeds and write the results table.
    Eval(EvalArgs),
    /// Serve suggestions over HTTP.
    Serve(ServeArgs),
    /// Corpus shape statistics.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub tickets: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    /// JSON list of curation edits applied to the mined clusters.
    #[arg(long)]
    pub edits: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value = "lstm", value_parser = parse_variant)]
    pub variant: Variant,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Fixed λ instead of the grid.
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Comma-separated variants, e.g. `freq,linear,lstm`.
    #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
    pub methods: Option<Vec<Variant>>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Table output; the structured report is written next to it as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "lstm", value_parser = parse_variant)]
    pub variant: Variant,
    #[arg(long, env = "SMARTREPLY_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, env = "SMARTREPLY_CATALOG")]
    pub catalog: Option<PathBuf>,
    #[arg(long, env = "SMARTREPLY_BIND", default_value = "127.0.0.1:8080")]
    pub bind: std::net::SocketAddr,
    /// Idle seconds before a session is evicted.
    #[arg(long, env = "SMARTREPLY_SESSION_TTL", default_value_t = 1800)]
    pub ttl_secs: u64,
    /// Session snapshot restored at start-up and written on shutdown.
    #[arg(long, env = "SMARTREPLY_SNAPSHOT")]
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Corpus to describe instead of the work directory's.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: smartreply_core::Error| e.to_string())
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into());
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .try_init();
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns 0 on success, 2 on usage errors and 1 on failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging();
    match stages::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
