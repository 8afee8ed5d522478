mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use unobstruct::exec::with_jobs;
use unobstruct::{ErrorKind, Execution};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "unobstruct",
    version,
    about = "Obstruction-reasoning datasets, evaluation and rewards"
)]
struct Cli {
    /// TOML file with defaults for every command.
    #[arg(long, global = true, env = "UNOBSTRUCT_CONFIG")]
    config: Option<PathBuf>,

    /// Directory for outputs whose path is not given explicitly.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Worker threads (0 uses every core).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Run every batch on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    /// More log output; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Only print errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic scenes and a scene manifest.
    GenScenes(GenScenesArgs),
    /// Build per-target obstruction graph records.
    BuildGraphs(BuildGraphsArgs),
    /// Render graph records into VQA samples.
    SynthVqa(SynthVqaArgs),
    /// Produce predictions with a reference agent.
    RunAgent(RunAgentArgs),
    /// Score predictions against a VQA manifest.
    Evaluate(EvaluateArgs),
    /// Compute training rewards for predictions.
    Reward(RewardArgs),
    /// Print a saved evaluation report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenScenesArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Number of scenes (ignored when a difficulty bucket is requested).
    #[arg(long, default_value_t = 10)]
    count: u64,
    #[arg(long)]
    min_objects: Option<usize>,
    #[arg(long)]
    max_objects: Option<usize>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    #[arg(long)]
    overlap_bias: Option<f64>,
    #[arg(long, value_enum)]
    shape: Option<Shape>,
    /// Targets wanted in the No-Occ bucket.
    #[arg(long)]
    no_occ: Option<usize>,
    #[arg(long)]
    easy: Option<usize>,
    #[arg(long)]
    medium: Option<usize>,
    #[arg(long)]
    hard: Option<usize>,
    /// Scenes to try before giving up on a bucket.
    #[arg(long, default_value_t = 10_000)]
    max_scenes: u64,
    /// Scene manifest to write; scene files go next to it under `scenes/`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Shape {
    Rectangles,
    ConvexPolygons,
}

#[derive(Debug, Args)]
struct BuildGraphsArgs {
    /// Scene files, or scene manifests (`.jsonl`) written by gen-scenes.
    inputs: Vec<PathBuf>,
    /// Build from a scene-relations file instead of scene masks.
    #[arg(long, conflicts_with = "inputs")]
    relations: Option<PathBuf>,
    /// Graph records to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the scene relations (scene input only); defaults to
    /// `relations.jsonl` next to the graph records.
    #[arg(long)]
    relations_out: Option<PathBuf>,
    #[arg(long)]
    path_cap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SettingArg {
    Som,
    Nlp,
    Both,
}

/// Reasoning cues; unset flags fall back to the config file.
#[derive(Debug, Args)]
struct CueArgs {
    #[arg(long)]
    ratio: Option<bool>,
    #[arg(long)]
    contact_point: Option<bool>,
    #[arg(long)]
    degree_word: Option<bool>,
    #[arg(long)]
    short: Option<bool>,
}

#[derive(Debug, Args)]
struct SynthVqaArgs {
    #[arg(long)]
    graphs: PathBuf,
    #[arg(long, value_enum, default_value_t = SettingArg::Som)]
    setting: SettingArg,
    #[command(flatten)]
    cues: CueArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AgentArg {
    Oracle,
    Corrupted,
}

#[derive(Debug, Args)]
struct RunAgentArgs {
    /// VQA file written by synth-vqa.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = AgentArg::Oracle)]
    agent: AgentArg,
    #[arg(long)]
    noise_seed: Option<u64>,
    #[arg(long)]
    p_drop_path: Option<f64>,
    #[arg(long)]
    p_drop_answer: Option<f64>,
    #[arg(long)]
    p_swap: Option<f64>,
    #[arg(long)]
    p_break_format: Option<f64>,
    #[command(flatten)]
    cues: CueArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    /// Mention resolution radius in pixels.
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Debug, Args)]
struct RewardArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    lambda_fmt: Option<f64>,
    #[arg(long)]
    lambda_task: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// report.json written by evaluate.
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 2,
        ErrorKind::Generation => 3,
        ErrorKind::Io => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "error",
        (false, 0) => "warn",
        (false, 1) => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(exit_code(e.kind()));
            }
        },
        None => RunConfig::default(),
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let jobs = cli.jobs.unwrap_or(cfg.jobs);
    let ctx = commands::Context {
        cfg,
        exec,
        out_dir: cli.out_dir.clone(),
    };
    match with_jobs(jobs, || commands::run(&ctx, cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
