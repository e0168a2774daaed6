use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use horolab_cli::config::*;
use horolab_cli::output::{write_artifacts, Manifest, MANIFEST_NAME};
use horolab_cli::{rerun_manifest, run};

#[derive(Parser, Debug)]
#[command(
    name = "horolab",
    version,
    about = "Horocycle flow experiments on the space of unimodular lattices"
)]
struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 picks the number of CPUs). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory for artifacts and the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML file with global keys and one table per command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Draw Haar-random lattices.
    Sample(SampleArgs),
    /// Orbit averages of an observable along the horocycle flow.
    OrbitAverage(OrbitArgs),
    /// Correlation decay and its power-law rate.
    Mixing(MixingArgs),
    /// Orbit-average variances against the bound implied by the fitted rate.
    Variance(VarianceArgs),
    /// Polynomial sub-divergence certificate.
    SubdivCheck(SubdivArgs),
    /// Clustering of good and exceptional sets on nearby pairs.
    ClusteringCheck(ClusteringArgs),
    /// Box-counting dimension of a point cloud.
    CoverDim(CoverArgs),
    /// Scan a region for exceptional points and box-count them.
    ScanExceptional(ScanArgs),
    /// Closed-form dimension bounds over parameter grids.
    Bound(BoundArgs),
    /// Run the invariant suite; exits nonzero on any failure.
    VerifyAll(VerifyArgs),
    /// Re-run a manifest and compare artifact hashes.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn to_command(cmd: Cmd) -> Option<CommandConfig> {
    Some(match cmd {
        Cmd::Sample(a) => CommandConfig::Sample(a),
        Cmd::OrbitAverage(a) => CommandConfig::OrbitAverage(a),
        Cmd::Mixing(a) => CommandConfig::Mixing(a),
        Cmd::Variance(a) => CommandConfig::Variance(a),
        Cmd::SubdivCheck(a) => CommandConfig::SubdivCheck(a),
        Cmd::ClusteringCheck(a) => CommandConfig::ClusteringCheck(a),
        Cmd::CoverDim(a) => CommandConfig::CoverDim(a),
        Cmd::ScanExceptional(a) => CommandConfig::ScanExceptional(a),
        Cmd::Bound(a) => CommandConfig::Bound(a),
        Cmd::VerifyAll(a) => CommandConfig::VerifyAll(a),
        Cmd::Rerun { .. } => return None,
    })
}

fn init_pool(workers: usize) -> Result<usize> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .context("worker pool")?;
    Ok(rayon::current_num_threads())
}

fn main_inner() -> Result<bool> {
    let cli = Cli::parse();
    let file = match &cli.config {
        Some(p) => ConfigFile::parse(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => ConfigFile::default(),
    };
    let workers = cli.workers.or(file.workers).unwrap_or(0);

    if let Cmd::Rerun { manifest } = &cli.command {
        let recorded = Manifest::read(manifest)?;
        init_pool(recorded.workers.max(workers))?;
        let (outcome, mismatches) = rerun_manifest(&recorded)?;
        if let Some(dir) = &cli.out {
            write_artifacts(dir, &recorded.config, &outcome.artifacts)?;
        }
        if mismatches.is_empty() {
            println!(
                "identical: {} artifacts match {}",
                recorded.artifacts.len(),
                manifest.display()
            );
        } else {
            println!("differs: {}", mismatches.join(", "));
        }
        return Ok(mismatches.is_empty());
    }

    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let out = cli.out.clone().or(file.out.clone().map(PathBuf::from));
    let command = merge(&file, to_command(cli.command).expect("rerun handled above"))?;
    let workers = init_pool(workers)?;
    let cfg = RunConfig::new(seed, workers, command);
    let outcome = run(&cfg)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    if let Some(dir) = out {
        let manifest = write_artifacts(&dir, &cfg, &outcome.artifacts)?;
        log::info!(
            "wrote {} artifacts and {MANIFEST_NAME} to {}",
            manifest.artifacts.len(),
            dir.display()
        );
    }
    Ok(outcome.ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match main_inner() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
