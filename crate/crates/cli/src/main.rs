//! `prockb`: reproducible batch runs of the procedure knowledge-base
//! pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 bad input data, 3 internal error.

mod cmd;
mod config;
mod run;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

/// Misuse of the command line or config file.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Input that parsed but failed a check.
#[derive(Debug)]
pub struct DataError(pub String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

#[derive(Parser)]
#[command(name = "prockb", version, about = "Build and evaluate a hierarchical knowledge base of how-to procedures")]
pub struct Cli {
    /// TOML file of default flag values. Flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads. Defaults to the number of available cores. Outputs
    /// do not depend on this value.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Directory for output files and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a corpus file and report every problem found.
    Validate(cmd::ValidateArgs),
    /// Embed every goal title and step with the built-in hash embedder.
    BuildIndex(cmd::BuildIndexArgs),
    /// Stage-1 top-k candidate goals for steps.
    Retrieve(cmd::RetrieveArgs),
    /// Train the stage-2 reranker on gold links.
    TrainReranker(cmd::TrainArgs),
    /// Link steps to goals with a trained reranker.
    Link(cmd::LinkArgs),
    /// Expand one article into a procedure tree.
    Expand(cmd::ExpandArgs),
    /// Recall@N of stage-1 and reranked candidate lists on gold links.
    EvalLinks(cmd::EvalLinksArgs),
    /// BM25 search over goal titles or whole articles.
    Search(cmd::SearchArgs),
    /// Index video captions and split each goal's videos.
    VrIndex(cmd::VrIndexArgs),
    /// Build video retrieval queries for every goal.
    VrFilter(cmd::VrFilterArgs),
    /// Rank videos with queries and report R@N, P@N and MR.
    VrEval(cmd::VrEvalArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<prockb_core::Error>() {
            return if e.is_data_error() { 2 } else { 1 };
        }
        if cause.is::<UsageError>() {
            return 1;
        }
        if cause.is::<DataError>()
            || cause.is::<std::io::Error>()
            || cause.is::<serde_json::Error>()
            || cause.is::<toml::de::Error>()
        {
            return 2;
        }
    }
    3
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::Validate(a) => cmd::validate(a, out),
        Command::BuildIndex(a) => cmd::build_index(a, out),
        Command::Retrieve(a) => cmd::retrieve(a, out),
        Command::TrainReranker(a) => cmd::train_reranker(a, out),
        Command::Link(a) => cmd::link(a, out),
        Command::Expand(a) => cmd::expand(a, out),
        Command::EvalLinks(a) => cmd::eval_links(a, out),
        Command::Search(a) => cmd::search(a, out),
        Command::VrIndex(a) => cmd::vr_index(a, out),
        Command::VrFilter(a) => cmd::vr_filter(a, out),
        Command::VrEval(a) => cmd::vr_eval(a, out),
    }
}

fn main() -> ExitCode {
    let argv = match config::merge(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be >= 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match std::panic::catch_unwind(|| execute(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(3),
    }
}
