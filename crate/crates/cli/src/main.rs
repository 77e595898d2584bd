//! `evalcards`: taxonomy scaffolding, log analysis, report rendering and
//! synthetic fixture generation.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use output::{CliError, Console};

#[derive(Parser, Debug)]
#[command(
    name = "evalcards",
    version,
    about = "Build component-level evaluation cards from interaction logs and surveys"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write or check a component configuration.
    #[command(subcommand)]
    Taxonomy(TaxonomyCommand),
    /// Compute every metric for one system and write the metrics export.
    Analyze(AnalyzeArgs),
    /// Render one evaluation card per export.
    Render(RenderArgs),
    /// Render a comparison report across two or more exports.
    Compare(CompareArgs),
    /// Generate a synthetic log and survey tree.
    Synth(SynthArgs),
}

#[derive(Subcommand, Debug)]
enum TaxonomyCommand {
    /// Write a configuration skeleton listing every reference functionality.
    Init {
        path: PathBuf,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Resolve a configuration and report its terminal components.
    Validate { path: PathBuf },
}

#[derive(Args, Debug)]
struct ExecArgs {
    /// Run single-threaded.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Component configuration the logs were recorded against.
    #[arg(long)]
    taxonomy: PathBuf,
    /// Directory of `<user>_<task>.jsonl` logs.
    #[arg(long)]
    logs: PathBuf,
    /// Directory holding ratings.csv and sus.csv.
    #[arg(long)]
    surveys: Option<PathBuf>,
    /// Export file to write.
    #[arg(long)]
    out: PathBuf,
    /// Longest interval credited to one record, e.g. `10m`, `90s`, or `off`.
    #[arg(long, default_value = "10m", value_parser = parse_idle_cap)]
    idle_cap: IdleCap,
    /// Count consecutive records in one component as a single visit in the
    /// transition matrices.
    #[arg(long)]
    collapse_repeats: bool,
    /// Sort out-of-order records instead of rejecting the log.
    #[arg(long)]
    sort_timestamps: bool,
    /// Set aside records naming components outside the configuration
    /// instead of rejecting the log.
    #[arg(long)]
    allow_unknown_components: bool,
    /// Overwrite an existing export.
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    exec: ExecArgs,
}

#[derive(Args, Debug)]
struct RenderArgs {
    /// Metrics exports written by `analyze`.
    #[arg(required = true)]
    exports: Vec<PathBuf>,
    /// Directory for the HTML reports.
    #[arg(long)]
    out: PathBuf,
    /// Color heatmaps on a log scale.
    #[arg(long)]
    log_scale: bool,
    /// Overwrite existing reports.
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    exec: ExecArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Metrics exports written by `analyze`.
    #[arg(required = true)]
    exports: Vec<PathBuf>,
    /// HTML file to write.
    #[arg(long)]
    out: PathBuf,
    /// Color heatmaps on a log scale.
    #[arg(long)]
    log_scale: bool,
    /// Overwrite an existing report.
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    exec: ExecArgs,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    taxonomy: PathBuf,
    /// Profile file: archetype, users, tasks, dwell range and seed.
    #[arg(long)]
    profile: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the profile's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace an existing generated tree.
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    exec: ExecArgs,
}

#[derive(Debug, Clone, Copy)]
struct IdleCap(Option<u64>);

fn parse_idle_cap(text: &str) -> Result<IdleCap, String> {
    if matches!(text, "off" | "none") {
        return Ok(IdleCap(None));
    }
    let d: Duration =
        humantime::parse_duration(text).map_err(|e| format!("{e} (try `10m`, `90s` or `off`)"))?;
    let ms = u64::try_from(d.as_millis()).map_err(|_| "duration too long".to_string())?;
    if ms == 0 {
        return Err("idle cap must be positive; use `off` to disable it".into());
    }
    Ok(IdleCap(Some(ms)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let console = Console::from_env();
    let result: Result<(), CliError> = match cli.command {
        Command::Taxonomy(TaxonomyCommand::Init { path, force }) => {
            commands::taxonomy_init(&console, &path, force)
        }
        Command::Taxonomy(TaxonomyCommand::Validate { path }) => {
            commands::taxonomy_validate(&console, &path)
        }
        Command::Analyze(args) => commands::analyze(&console, &args),
        Command::Render(args) => commands::render(&console, &args),
        Command::Compare(args) => commands::compare(&console, &args),
        Command::Synth(args) => commands::synth(&console, &args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            console.error(&e.message);
            ExitCode::from(e.code)
        }
    }
}
