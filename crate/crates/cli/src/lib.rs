//! Configuration, validation suites, h-sweeps and rate fits behind the `qrw` binary.

pub mod config;
pub mod rate;
pub mod suites;
pub mod sweep;

use clap::{Parser, Subcommand};
use qrw_core::fock::FockError;
use qrw_core::linalg::LinalgError;
use qrw_core::testfn::TestFnError;
use qrw_core::{ModelError, WalkError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::PathBuf;
use thiserror::Error;

use config::{Experiment, ExperimentConfig};
use suites::Report;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("rate fit: {0}")]
    Rate(String),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    TestFn(#[from] TestFnError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Csv(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "qrw", about = "Quantum random walk experiments", version)]
pub struct Cli {
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the config output path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the dense engine dimension cap.
    #[arg(long = "dense-cap", global = true)]
    pub dense_cap: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the invariant suites on the configured model.
    Validate { config: PathBuf },
    /// Sweep h and write walk vs oracle records as CSV.
    Sweep { config: PathBuf },
    /// Fit the convergence rate of one quantity in a sweep CSV.
    Rate {
        csv: PathBuf,
        #[arg(long)]
        quantity: String,
    },
    /// Run the single-interval and hybrid-space estimates.
    Lemmas { config: PathBuf },
}

impl Cli {
    fn load(&self, path: &std::path::Path) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(path)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(c) = self.dense_cap {
            cfg.dense_cap = c;
        }
        Ok(cfg)
    }
}

pub fn run_validate(exp: &Experiment) -> Result<Report, CliError> {
    let cfg = &exp.config;
    let vc = &cfg.validate;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let models = [exp.model.clone()];
    let model = &exp.model;
    let mut report = Report::default();
    report.extend(suites::unitary_suite(&models, &vc.h_values)?);
    report.extend(suites::estimate_suite(&models, &vc.h_values)?);
    report.extend(suites::homomorphism_suite(
        &mut rng,
        &models,
        &vc.h_values,
        vc.pairs.max(1),
        cfg.test_hooks.corrupt_beta,
    )?);
    report.extend(suites::defect_suite(&mut rng, &models, &vc.h_values)?);
    report.extend(suites::composition_suite(&mut rng, 3)?);
    let lc = &cfg.lemmas;
    report.extend(suites::lemma_suite(&mut rng, lc.samples, lc.cells, lc.cutoff, &lc.h_values)?);
    report.extend(suites::engine_suite(&mut rng, Some(model), vc.walk_instances, vc.max_walk_steps, cfg.dense_cap)?);
    report.extend(suites::walk_homomorphism_suite(
        &mut rng,
        Some(model),
        vc.walk_instances,
        vc.max_walk_steps,
        cfg.dense_cap,
    )?);
    // The hybrid space grows quickly with d and m; larger models fall back to small random ones.
    let hybrid_model = (model.m() == 1 && model.d() <= 3).then_some(model);
    report.extend(suites::decomposition_suite(&mut rng, hybrid_model, 2)?);
    report.extend(suites::oracle_suite(&mut rng, &models)?);
    Ok(report)
}

pub fn run_lemmas(exp: &Experiment) -> Result<Report, CliError> {
    let cfg = &exp.config;
    let lc = &cfg.lemmas;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = Report::default();
    report.extend(suites::lemma_suite(&mut rng, lc.samples, lc.cells, lc.cutoff, &lc.h_values)?);
    report.extend(suites::composition_suite(&mut rng, 3)?);
    let hybrid_model = (exp.model.m() == 1 && exp.model.d() <= 3).then_some(&exp.model);
    report.extend(suites::decomposition_suite(&mut rng, hybrid_model, 3)?);
    Ok(report)
}

/// Runs one subcommand, writing human-readable output to `out`; returns the exit code.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Validate { config } => {
            let exp = cli.load(config)?.experiment()?;
            let report = run_validate(&exp)?;
            writeln!(out, "{report}")?;
            Ok(if report.pass() { 0 } else { 1 })
        }
        Command::Lemmas { config } => {
            let exp = cli.load(config)?.experiment()?;
            let report = run_lemmas(&exp)?;
            writeln!(out, "{report}")?;
            Ok(if report.pass() { 0 } else { 1 })
        }
        Command::Sweep { config } => {
            let cfg = cli.load(config)?;
            let exp = cfg.experiment()?;
            let outcome = sweep::run_sweep(&exp, cfg.dense_cap)?;
            for flag in &outcome.flags {
                eprintln!("warning: {flag}");
            }
            match &cfg.out {
                Some(path) => {
                    let file = std::fs::File::create(path)?;
                    sweep::write_csv(file, &outcome.records)?;
                    writeln!(out, "wrote {} records to {}", outcome.records.len(), path.display())?;
                }
                None => sweep::write_csv(&mut *out, &outcome.records)?,
            }
            Ok(0)
        }
        Command::Rate { csv, quantity } => {
            if sweep::Quantity::from_tag(quantity).is_none() {
                return Err(CliError::Config(format!("unknown quantity {quantity:?}")));
            }
            let file = std::fs::File::open(csv)?;
            let records = sweep::read_csv(file)?;
            match rate::fit_rate(&records, quantity)? {
                rate::RateFit::Fitted { slope, intercept, r2, points } => {
                    writeln!(out, "{quantity}: slope {slope:.6} intercept {intercept:.6} r2 {r2:.6} ({points} points)")?
                }
                rate::RateFit::Saturated { points } => {
                    writeln!(out, "{quantity}: saturated ({points} points at the noise floor)")?
                }
            }
            Ok(0)
        }
    }
}
