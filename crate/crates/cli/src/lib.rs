//! `optlab`: batch front end for the option-pricing experiments.
//!
//! Every command reads one JSON config (`--config`), writes its files under
//! `--out` and prints a one-object JSON summary on stdout. Work runs on a
//! pool of `--jobs` threads, one by default.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod prepared;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::Value;

pub use error::{CliError, Result};

use config::{BsRun, CompareRun, EvaluateRun, GridRun, McRun, PrepareRun, SynthRun, TrainRun};

#[derive(Debug, Parser)]
#[command(name = "optlab", version, about = "Option pricing with Black-Scholes, MLP, KAN and sequence models")]
pub struct Cli {
    /// JSON config for the command.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads for the parallel paths.
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic quotes, closes and rates.
    Synth,
    /// Build, filter and split features from raw CSVs.
    Prepare,
    /// Train one model on prepared features.
    Train,
    /// Score trained models and the closed-form baseline on the test split.
    Evaluate,
    /// Rank evaluation reports by mse.
    Compare,
    /// Train every point of a hyperparameter grid.
    Grid,
    /// Price a call, or recover its implied vol.
    Bs(BsArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct BsArgs {
    #[arg(long)]
    pub spot: Option<f64>,
    #[arg(long)]
    pub strike: Option<f64>,
    /// Continuously compounded annual rate.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Years to expiry.
    #[arg(long)]
    pub ttm: Option<f64>,
    #[arg(long)]
    pub vol: Option<f64>,
    /// Market price to invert for implied vol.
    #[arg(long)]
    pub price: Option<f64>,
    /// Also price by Monte Carlo with this many paths (needs a seed).
    #[arg(long)]
    pub paths: Option<u64>,
    #[arg(long)]
    pub antithetic: bool,
}

fn load<T: DeserializeOwned>(cli: &Cli) -> Result<(T, PathBuf)> {
    let path = cli.config.clone().ok_or_else(|| CliError::Usage("this command needs --config PATH".into()))?;
    Ok((config::load(&path)?, path))
}

fn out_dir(cli: &Cli) -> Result<&Path> {
    cli.out.as_deref().ok_or_else(|| CliError::Usage("this command needs --out DIR".into()))
}

fn invalid(path: &Path) -> impl FnOnce(String) -> CliError + '_ {
    move |message| CliError::Config { path: path.to_path_buf(), message }
}

fn bs_run(cli: &Cli, args: &BsArgs) -> Result<BsRun> {
    let mut cfg = match &cli.config {
        Some(p) => config::load(p)?,
        None => BsRun::default(),
    };
    let set = |slot: &mut Option<f64>, v: Option<f64>| {
        if v.is_some() {
            *slot = v;
        }
    };
    set(&mut cfg.spot, args.spot);
    set(&mut cfg.strike, args.strike);
    set(&mut cfg.rate, args.rate);
    set(&mut cfg.ttm, args.ttm);
    set(&mut cfg.vol, args.vol);
    set(&mut cfg.price, args.price);
    if let Some(paths) = args.paths {
        let seed = cli.seed.or(cfg.mc.map(|m| m.seed)).ok_or_else(|| CliError::Usage("--paths needs --seed".into()))?;
        cfg.mc = Some(McRun { paths, seed, antithetic: args.antithetic });
    } else if let Some(mc) = cfg.mc.as_mut() {
        mc.seed = cli.seed.unwrap_or(mc.seed);
        mc.antithetic |= args.antithetic;
    }
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Synth => {
            let (mut cfg, path) = load::<SynthRun>(cli)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            cfg.dataset.validate().map_err(|e| invalid(&path)(e.to_string()))?;
            commands::synth::run(&cfg, out_dir(cli)?)
        }
        Command::Prepare => {
            let (mut cfg, path) = load::<PrepareRun>(cli)?;
            cfg.data_dir = config::resolve(&path, &cfg.data_dir);
            commands::prepare::run(&cfg, out_dir(cli)?)
        }
        Command::Train => {
            let (mut cfg, path) = load::<TrainRun>(cli)?;
            cfg.data_dir = config::resolve(&path, &cfg.data_dir);
            cfg.training.seed = cli.seed.unwrap_or(cfg.training.seed);
            cfg.validate().map_err(invalid(&path))?;
            commands::train::run(&cfg, out_dir(cli)?)
        }
        Command::Evaluate => {
            let (mut cfg, path) = load::<EvaluateRun>(cli)?;
            cfg.data_dir = config::resolve(&path, &cfg.data_dir);
            for m in &mut cfg.models {
                m.dir = config::resolve(&path, &m.dir);
            }
            cfg.validate().map_err(invalid(&path))?;
            commands::evaluate::run(&cfg, out_dir(cli)?)
        }
        Command::Compare => {
            let (mut cfg, path) = load::<CompareRun>(cli)?;
            cfg.reports = cfg.reports.iter().map(|r| config::resolve(&path, r)).collect();
            cfg.validate().map_err(invalid(&path))?;
            commands::compare::run(&cfg, out_dir(cli)?)
        }
        Command::Grid => {
            let (mut cfg, path) = load::<GridRun>(cli)?;
            cfg.data_dir = config::resolve(&path, &cfg.data_dir);
            cfg.training.seed = cli.seed.unwrap_or(cfg.training.seed);
            cfg.validate().map_err(invalid(&path))?;
            commands::grid::run(&cfg, out_dir(cli)?)
        }
        Command::Bs(args) => commands::bs::run(&bs_run(cli, args)?),
    }
}

/// Runs the parsed command on a pool of `cli.jobs` threads.
pub fn run(cli: &Cli) -> Result<Value> {
    if cli.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
        pool.install(|| dispatch(cli))
    }
    #[cfg(not(feature = "parallel"))]
    {
        if cli.jobs > 1 {
            eprintln!("warning: built without the `parallel` feature; --jobs {} runs on one thread", cli.jobs);
        }
        dispatch(cli)
    }
}
