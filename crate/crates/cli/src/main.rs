mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Custom mid-side stereo speech enhancement.
#[derive(Debug, Parser)]
#[command(name = "cmss", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enhance a stereo WAV file.
    Enhance(EnhanceArgs),
    /// Dump the estimated per-band mixing parameters as CSV.
    Analyze(AnalyzeArgs),
    /// Render a synthetic scene and its ground-truth stems.
    Synth(SynthArgs),
    /// Compare processing modes on a synthetic scene.
    Metrics(MetricsArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Debug, Args)]
struct EnhanceArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// cms, ci, standard-mid, standard-ms, cmss-both or alt-center.
    #[arg(long)]
    mode: Option<String>,
    /// Write the processed mid (or the channel downmix for ci) as mono.
    #[arg(long)]
    mono_out: bool,
    /// gate or identity.
    #[arg(long)]
    enhancer: Option<String>,
    /// Run configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the run report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// pcm16, pcm24 or float32.
    #[arg(long)]
    encoding: Option<String>,
    /// Scale the output to -1 dBFS peak when it would exceed it.
    #[arg(long)]
    limiter: bool,
    /// Saturate out-of-range output samples instead of failing.
    #[arg(long)]
    clip: bool,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Scene recipe (TOML).
    #[arg(long)]
    recipe: PathBuf,
    /// Output directory, created if missing.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    encoding: Option<String>,
    #[arg(long)]
    clip: bool,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    recipe: PathBuf,
    /// Comma-separated list of modes.
    #[arg(long, value_delimiter = ',', default_value = "cms,ci")]
    modes: Vec<String>,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    enhancer: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(commands::EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Enhance(args) => commands::enhance(args),
        Command::Analyze(args) => commands::analyze(args),
        Command::Synth(args) => commands::synth(args),
        Command::Metrics(args) => commands::metrics(args),
        Command::Selftest => commands::selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
