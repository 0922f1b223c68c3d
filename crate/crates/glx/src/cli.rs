//! Command line: `glx <experiment> --config <path> [--seed S] [--workers W] [--out DIR]`
//! and `glx merge`.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use glx_core::audit::AuditFlag;

use crate::cache::GreenCache;
use crate::config::{ConfigError, Experiment, RunConfig};
use crate::engine::Engine;
use crate::experiments;
use crate::manifest::RunManifest;
use crate::output::{merge_csv, HashMismatch, OutputDir, MANIFEST_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "glx", version, about = "Extremes of Gaussian interface models on boxes of Z^d")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    /// JSON config merged over configs/defaults.json
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Finite-volume Green matrices and kappa
    Covariance(RunArgs),
    /// Raw field draws
    Sample(RunArgs),
    /// Monte Carlo maxima against the Gumbel law
    Maxima(RunArgs),
    /// Stein-Chen bounds and the law of the exceedance count
    Steinchen(RunArgs),
    /// Kallenberg conditions on cells
    Pointprocess(RunArgs),
    /// Decay, finite-volume and conditional-variance audits
    Audit(RunArgs),
    /// Concatenate CSV outputs that share a config hash
    Merge {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

/// Loads, overrides and validates a config.
pub fn prepare(experiment: Experiment, args: &RunArgs) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(o) = &args.out {
        cfg.out = o.display().to_string();
    }
    cfg.validate(experiment)?;
    Ok(cfg)
}

/// Runs an experiment and writes its manifest; returns the exit code.
pub fn run_experiment(experiment: Experiment, cfg: &RunConfig) -> Result<i32> {
    let start = Instant::now();
    let hash = cfg.hash();
    let mut out = OutputDir::create(std::path::Path::new(&cfg.out), &hash)?;
    let engine = Engine::new(cfg.workers, GreenCache::from_env(), cfg.tolerance)?;
    let outcome = experiments::run(experiment, cfg, &engine, &mut out)?;
    let manifest = RunManifest {
        config_hash: hash.clone(),
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: experiment.to_string(),
        seed: cfg.seed,
        workers: cfg.workers,
        wall_time_s: start.elapsed().as_secs_f64(),
        tolerances: outcome.tolerances.clone(),
        flags: outcome.flags.iter().map(|(k, v)| (k.clone(), v.as_str().to_string())).collect(),
        outputs: out.written().to_vec(),
        config: cfg.clone(),
    };
    out.write_json(MANIFEST_FILE, &manifest)?;
    eprintln!("glx {experiment}: {} files in {} (config_hash {hash})", manifest.outputs.len(), out.root().display());
    for (k, v) in &manifest.flags {
        eprintln!("  {k}: {v}");
    }
    Ok(if outcome.worst() == AuditFlag::Fail { EXIT_NUMERICAL } else { EXIT_OK })
}

/// Exit code for an error: 2 for configuration problems, 3 for numerical
/// failures, 1 otherwise.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() || cause.downcast_ref::<HashMismatch>().is_some() {
            return EXIT_CONFIG;
        }
        if let Some(ce) = cause.downcast_ref::<glx_core::Error>() {
            use glx_core::Error as E;
            return match ce {
                E::InvalidParameter(_) | E::Unsupported(_) | E::Size(_) | E::Partition(_) => EXIT_CONFIG,
                _ => EXIT_NUMERICAL,
            };
        }
    }
    EXIT_OTHER
}

pub fn main_with(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Merge { out, inputs } => merge_csv(&inputs, &out).map(|n| {
            eprintln!("glx merge: {n} rows into {}", out.display());
            EXIT_OK
        }),
        cmd => {
            let (exp, args) = match cmd {
                Command::Covariance(a) => (Experiment::Covariance, a),
                Command::Sample(a) => (Experiment::Sample, a),
                Command::Maxima(a) => (Experiment::Maxima, a),
                Command::Steinchen(a) => (Experiment::Steinchen, a),
                Command::Pointprocess(a) => (Experiment::Pointprocess, a),
                Command::Audit(a) => (Experiment::Audit, a),
                Command::Merge { .. } => unreachable!("handled above"),
            };
            prepare(exp, &args).map_err(anyhow::Error::from).and_then(|cfg| run_experiment(exp, &cfg))
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("glx: error: {e:#}");
            exit_code(&e)
        }
    }
}
