use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qcuts3d::Error;

mod config;
mod evaluate;
mod gft_curve;
mod info;
mod phantom;
mod segment;

/// Quantum-cuts segmentation of 3D porous-media volumes.
#[derive(Debug, Parser)]
#[command(name = "qcuts3d", version, about)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG also works.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment a volume into solid and pore.
    Segment(segment::SegmentArgs),
    /// Score a predicted mask and saliency field against labels.
    Evaluate(evaluate::EvaluateArgs),
    /// Write a synthetic sphere pack and its labels.
    Phantom(phantom::PhantomArgs),
    /// Graph Fourier reconstruction error per phase.
    GftCurve(gft_curve::GftCurveArgs),
    /// Build, defaults and raw file summaries.
    Info(info::InfoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Exit status for each error class.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) | Error::Config(_) => 2,
        Error::Format(_) => 3,
        Error::Data(_) | Error::Degenerate(_) | Error::UndefinedMetric(_) | Error::Placement(_) => 4,
        Error::Convergence { .. } => 5,
        Error::Io(_) => 6,
    }
}

/// Writes `text` to `path`, or stdout when no path is given.
pub fn emit(text: &str, path: Option<&PathBuf>) -> qcuts3d::Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn install_pool(threads: config::Threads) -> qcuts3d::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.pool_size())
        .build_global()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match &cli.command {
        Command::Segment(a) => segment::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Phantom(a) => phantom::run(a),
        Command::GftCurve(a) => gft_curve::run(a),
        Command::Info(a) => info::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
