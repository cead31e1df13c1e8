//! `compound-minimax`: simulate compound models, run the aggregate, benchmark
//! risk against the minimax rate, and verify the lower-bound constructions.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]
mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use compound_core::FamilyRule;

use crate::config::{parse_grid, Layer, Mode, ModelKind, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "compound-minimax", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a compound model and a noisy sequence observation of it.
    Simulate(Flags),
    /// Run the aggregate (exact or MCMC) on an observation file.
    Estimate(Flags),
    /// Monte-Carlo risk over an ε grid and a log-log rate fit.
    Benchmark(Flags),
    /// Counting, packing, code and function-family checks.
    VerifyBounds(Flags),
}

#[derive(Clone, Debug)]
struct Grid(Vec<f64>);

fn grid(v: &str) -> Result<Grid, String> {
    parse_grid(v).map(Grid)
}

#[derive(Args, Debug)]
struct Flags {
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    /// Maximal support size.
    #[arg(long)]
    s: Option<usize>,
    /// Number of atoms.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// Sobolev radius.
    #[arg(long = "L")]
    radius: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Comma-separated noise levels.
    #[arg(long, value_parser = grid)]
    eps_grid: Option<Grid>,
    /// Largest frequency `|j|_∞` kept.
    #[arg(long)]
    cutoff: Option<u32>,
    #[arg(long)]
    replicates: Option<usize>,
    /// `exact` or `mcmc`.
    #[arg(long)]
    mode: Option<Mode>,
    /// Post-burn-in chain steps.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long, env = "COMPOUND_MINIMAX_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// `disjoint`, `overlap-at-most-one` or `unrestricted`.
    #[arg(long)]
    family_rule: Option<FamilyRule>,
    /// Packing separation.
    #[arg(long)]
    theta: Option<f64>,
    /// Mean of the simulated function.
    #[arg(long)]
    mean: Option<f64>,
    /// `sobolev` or `least-favorable`.
    #[arg(long)]
    model: Option<ModelKind>,
    /// Observation CSV for `estimate`.
    #[arg(long)]
    obs: Option<PathBuf>,
}

impl Flags {
    fn into_config(self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(p) => Layer::from_file(p)?,
            None => Layer::default(),
        };
        let flags = Layer {
            d: self.d,
            s: self.s,
            m: self.m,
            beta: self.beta,
            radius: self.radius,
            epsilon: self.epsilon,
            eps_grid: self.eps_grid.map(|g| g.0),
            cutoff: self.cutoff,
            replicates: self.replicates,
            mode: self.mode,
            steps: self.steps,
            burn_in: self.burn_in,
            seed: self.seed,
            out: self.out,
            threads: self.threads,
            family_rule: self.family_rule,
            theta: self.theta,
            mean: self.mean,
            model: self.model,
            obs: self.obs,
        };
        Ok(RunConfig::resolve(flags.over(file)))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (flags, cmd): (Flags, fn(&RunConfig) -> Result<(), CliError>) = match cli.cmd {
        Cmd::Simulate(f) => (f, commands::simulate),
        Cmd::Estimate(f) => (f, commands::estimate),
        Cmd::Benchmark(f) => (f, commands::benchmark),
        Cmd::VerifyBounds(f) => (f, commands::verify_bounds),
    };
    let cfg = flags.into_config()?;
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(CliError::validation("threads = 0 violates threads >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation(e.to_string()))?;
    }
    cmd(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
