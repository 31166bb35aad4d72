//! `lamina`: numerically construct invariant central laminations of perturbed
//! skew products and run the exceptional-set pipeline built on them — solve
//! leaves, measure contraction, fit regularity, count deviating words, and
//! estimate cover volumes and dimensions.
//!
//! Every run is deterministic given its configuration and seed: reruns are
//! byte-identical. CSV reports open with a `#` metadata block (versions,
//! command, config hash, seed); single-object reports are JSON with the same
//! block under `meta`. The process exits 0 only when every quantitative
//! assertion of the run holds, 1 when an assertion fails, and 2 on
//! operational errors.

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::{geometry, symbolic, Ctx};
use config::ExperimentConfig;
use output::{AssertionFailure, Sink};

#[derive(Debug, Parser)]
#[command(
    name = "lamina",
    version,
    about = "Invariant central laminations and exceptional-set pipelines",
    propagate_version = true
)]
struct Cli {
    /// Configuration file (TOML); built-in defaults apply when absent.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output destination; "-" writes to standard output.
    #[arg(long, global = true, default_value = "-", value_name = "PATH")]
    out: String,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured perturbation size.
    #[arg(long, global = true)]
    rho: Option<f64>,
    /// Worker-thread cap for sweeps; falls back to LAMINA_THREADS, then the
    /// config file, then one worker per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the documented configuration template.
    ConfigTemplate,
    /// Solve one invariant leaf graph and emit its node grid.
    SolveLeaf(geometry::SolveLeafArgs),
    /// Push random leaf pairs through one transform step; verify contraction.
    Contraction(geometry::ContractionArgs),
    /// Build the central curve at a sampled anchor; optionally verify
    /// invariance under the dynamics.
    Central(geometry::CentralArgs),
    /// Conjugate the dynamics with a central leaf pair; emit the induced
    /// fiber map and verify it inverts.
    Conjugate(geometry::ConjugateArgs),
    /// Fit a Hölder exponent to lamination or leaf-family separations.
    HolderFit(geometry::HolderFitArgs),
    /// Exact occurrence-class table of one word length.
    Atypical(symbolic::AtypicalArgs),
    /// Exponent deficit of the deviating counts over word lengths.
    NuCurve(symbolic::NuCurveArgs),
    /// Lebesgue volumes of the deviating cylinder covers.
    CoverVolume(symbolic::CoverVolumeArgs),
    /// Box dimension of an atypical cover from exact box counts.
    BoxDim(symbolic::BoxDimArgs),
    /// Dimension transport of a sampled atypical set through the leaf-value
    /// map: image dimension against the Hölder bound.
    Falconer(geometry::FalconerArgs),
    /// Birkhoff averages along exact doubling orbits: pinned versus random.
    WeakErgodic(symbolic::WeakErgodicArgs),
    /// Composite report: null covers, fractional dimension, typical averages.
    FubiniDemo(symbolic::FubiniDemoArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if is_broken_pipe(&err) => {
            // The reader closed the stream early (e.g. piping into `head`);
            // ordinary termination, not a failure worth reporting.
            ExitCode::SUCCESS
        }
        Err(err) => {
            let assertion = err.is::<AssertionFailure>();
            let kind = if assertion { "assertion" } else { "error" };
            let payload =
                serde_json::json!({ "error": { "kind": kind, "message": format!("{err:#}") } });
            eprintln!("{payload}");
            ExitCode::from(if assertion { 1 } else { 2 })
        }
    }
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        cause
            .downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn run(cli: Cli) -> Result<()> {
    if matches!(cli.command, Command::ConfigTemplate) {
        let mut sink = Sink::open(&cli.out)?;
        sink.write_all(config::TEMPLATE.as_bytes())?;
        return sink.finish();
    }

    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.map.seed = seed;
    }
    if let Some(rho) = cli.rho {
        anyhow::ensure!(rho.is_finite() && rho >= 0.0, "rho must be finite and nonnegative");
        config.map.rho = rho;
    }

    let threads = match cli.threads {
        Some(n) => n,
        None => match std::env::var("LAMINA_THREADS") {
            Ok(text) => text
                .trim()
                .parse::<usize>()
                .with_context(|| format!("LAMINA_THREADS is not a thread count: {text:?}"))?,
            Err(_) => config.run.threads,
        },
    };
    if threads > 0 {
        // A later global build (e.g. in tests) is fine to fail silently: the
        // pool is already running with the earlier width.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }

    let ctx = Ctx { config, out: cli.out.clone() };
    match &cli.command {
        Command::ConfigTemplate => unreachable!("handled above"),
        Command::SolveLeaf(args) => geometry::solve_leaf(&ctx, args),
        Command::Contraction(args) => geometry::contraction(&ctx, args),
        Command::Central(args) => geometry::central(&ctx, args),
        Command::Conjugate(args) => geometry::conjugate(&ctx, args),
        Command::HolderFit(args) => geometry::holder_fit(&ctx, args),
        Command::Atypical(args) => symbolic::atypical(&ctx, args),
        Command::NuCurve(args) => symbolic::nu_curve(&ctx, args),
        Command::CoverVolume(args) => symbolic::cover_volume(&ctx, args),
        Command::BoxDim(args) => symbolic::box_dim(&ctx, args),
        Command::Falconer(args) => geometry::falconer(&ctx, args),
        Command::WeakErgodic(args) => symbolic::weak_ergodic(&ctx, args),
        Command::FubiniDemo(args) => symbolic::fubini_demo(&ctx, args),
    }
}
