//! `advreg`: generate data, corrupt it, run estimators and the verification
//! harness from the command line.
//!
//! Exit codes: 0 when everything passes, 1 when a report's assertions fail,
//! 2 on usage or input errors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use advreg_core::adversary::{coupling_adversary, oblivious_erasure, sign_flip_replacement};
use advreg_core::harness::constants::REFERENCE_SPECS;
use advreg_core::harness::{
    calibrate_constants, run_coupling_verification, run_forced_error_demo, run_regime_table,
    CalibrationConfig, ExperimentConfig, ForcedErrorConfig, VerifyConfig,
};
use advreg_core::model::{read_jsonl, sample_clean, to_masked, write_jsonl};
use advreg_core::{
    AdversaryConfig, AdversaryMode, CouplingSpec, EstimatorKind, LabeledSample, MaskedSample,
    MetaConfig, RegressionInstance, Regime, RngStream,
};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::Value;

/// Environment variable read when `--threads` is not given.
const THREADS_ENV: &str = "ADVREG_THREADS";

#[derive(Parser, Debug)]
#[command(name = "advreg", version, about = "Regression under coordinate-wise corruption")]
struct Cli {
    /// Root seed of every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when omitted); a directory for `corrupt --adversary coupling`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Trials, runs or draws, depending on the subcommand.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads (falls back to ADVREG_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a clean dataset and write it as JSON lines.
    Generate(GenerateArgs),
    /// Apply a named adversary to a dataset.
    Corrupt(CorruptArgs),
    /// Run an estimator on a dataset and print its output as JSON.
    Estimate(EstimateArgs),
    /// Marginal and disagreement-budget checks of a regime coupling.
    CoupleVerify(VerifyArgs),
    /// Coupling adversary plus the forced-error assertion.
    ForcedError(ForcedArgs),
    /// Run the estimator grid and write one CSV row per (cell, estimator, adversary).
    RegimeTable(TableArgs),
    /// Measure the constants of the disagreement and error bounds.
    Calibrate(CalibrateArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    /// Norm of beta, spread evenly over all coordinates.
    #[arg(long, conflicts_with = "beta")]
    beta_norm: Option<f64>,
    /// Explicit comma-separated beta.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AdversaryArg {
    ObliviousErasure,
    SignFlip,
    Coupling,
}

#[derive(Args, Debug)]
struct CorruptArgs {
    #[arg(long, value_enum)]
    adversary: AdversaryArg,
    #[arg(long)]
    eta: f64,
    /// Clean input dataset (not used by the coupling adversary).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Coupling spec JSON (coupling adversary only).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Samples to draw (coupling adversary only).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value = "erase")]
    mode: String,
    #[arg(long, default_value_t = 0.1)]
    slack: f64,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    alg: String,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// MetaConfig JSON for the unified estimator.
    #[arg(long)]
    meta: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpecArgs {
    /// small-beta, big-eta, interm-eta or small-eta; parameters default to
    /// the reference values.
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "B")]
    big_b: Option<f64>,
    #[arg(long = "E")]
    e: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
}

impl SpecArgs {
    fn spec(&self) -> Result<Option<CouplingSpec>> {
        let Some(name) = &self.regime else {
            return Ok(None);
        };
        let regime: Regime = name.parse().map_err(|e| anyhow!("{e}"))?;
        let base = *REFERENCE_SPECS
            .iter()
            .find(|s| s.regime() == regime)
            .expect("one reference spec per regime");
        let spec = match base {
            CouplingSpec::SmallBeta { d, b, sigma, r } => CouplingSpec::SmallBeta {
                d: self.d.unwrap_or(d),
                b: self.b.unwrap_or(b),
                sigma: self.sigma.unwrap_or(sigma),
                r: self.r.unwrap_or(r),
            },
            CouplingSpec::BigEta { d, s, sigma } => CouplingSpec::BigEta {
                d: self.d.unwrap_or(d),
                s: self.s.unwrap_or(s),
                sigma: self.sigma.unwrap_or(sigma),
            },
            CouplingSpec::IntermEta { d, s, eps, sigma } => CouplingSpec::IntermEta {
                d: self.d.unwrap_or(d),
                s: self.s.unwrap_or(s),
                eps: self.eps.unwrap_or(eps),
                sigma: self.sigma.unwrap_or(sigma),
            },
            CouplingSpec::SmallEta { d, big_b, e, sigma } => CouplingSpec::SmallEta {
                d: self.d.unwrap_or(d),
                big_b: self.big_b.unwrap_or(big_b),
                e: self.e.unwrap_or(e),
                sigma: self.sigma.unwrap_or(sigma),
            },
        };
        Ok(Some(spec))
    }
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// VerifyConfig JSON; overrides the spec flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Draws for the marginal suite (0 skips it).
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Draw with the separation scaled by this factor but check the
    /// unscaled bound.
    #[arg(long, default_value_t = 1.0)]
    corrupt_factor: f64,
}

#[derive(Args, Debug)]
struct ForcedArgs {
    /// big-eta or small-beta demonstration.
    #[arg(long, default_value = "big-eta")]
    regime: String,
    /// ForcedErrorConfig JSON; overrides the other flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "erase")]
    mode: String,
    /// Comma-separated estimators (default: all five).
    #[arg(long, value_delimiter = ',')]
    alg: Option<Vec<String>>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args, Debug)]
struct TableArgs {
    /// ExperimentConfig JSON (default: the acceptance grid).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the per-cell summary JSON here.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 5)]
    estimator_trials: usize,
}

/// Failure of a usage or input kind (exit 2) versus a failed report (exit 1).
enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            if !err.use_stderr() {
                return ExitCode::SUCCESS;
            }
            eprintln!("\n{}", Cli::command().render_usage());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if let Some(t) = flag {
        return Ok(Some(t));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => Ok(Some(
            v.trim()
                .parse()
                .with_context(|| format!("{THREADS_ENV} must be a positive integer, got '{v}'"))?,
        )),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let threads = thread_count(cli.threads)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            bail!("thread count must be at least 1");
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().context("building the thread pool")?;
    pool.install(|| dispatch(&cli))
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Generate(a) => generate(a, cli.seed, out),
        Command::Corrupt(a) => corrupt(a, cli.seed, out),
        Command::Estimate(a) => estimate(a, out),
        Command::CoupleVerify(a) => couple_verify(a, cli, out),
        Command::ForcedError(a) => forced_error(a, cli, out),
        Command::RegimeTable(a) => regime_table(a, cli, out),
        Command::Calibrate(a) => calibrate(a, cli, out),
    }
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))
}

fn read_dataset(path: &Path) -> Result<Vec<MaskedSample>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_jsonl(BufReader::new(file))?)
}

fn outcome(passed: bool) -> Outcome {
    if passed {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn generate(a: &GenerateArgs, seed: u64, out: Option<&Path>) -> Result<Outcome> {
    let beta = match (&a.beta, a.beta_norm) {
        (Some(b), _) => {
            if b.len() != a.d {
                bail!("--beta has {} entries but --d is {}", b.len(), a.d);
            }
            b.clone()
        }
        (None, norm) => vec![norm.unwrap_or(1.0) / (a.d as f64).sqrt(); a.d],
    };
    let inst = RegressionInstance::new(beta, a.sigma)?;
    let data = sample_clean(&inst, a.n, &mut RngStream::new(seed))?;
    let mut w = sink(out)?;
    write_jsonl(&to_masked(&data), &mut w)?;
    w.flush()?;
    Ok(Outcome::Pass)
}

fn corrupt(a: &CorruptArgs, seed: u64, out: Option<&Path>) -> Result<Outcome> {
    let mut rng = RngStream::new(seed);
    if let AdversaryArg::Coupling = a.adversary {
        let spec: CouplingSpec = read_json(a.spec.as_deref().context("--spec is required")?)?;
        let n = a.n.context("--n is required")?;
        let mode: AdversaryMode = a.mode.parse()?;
        let cfg = AdversaryConfig::new(a.eta, a.slack, mode)?;
        let paired = coupling_adversary(&spec, n, &cfg, &mut rng)?;
        let dir = out.context("--out must name a directory for the coupling adversary")?;
        paired.write(dir, "dataset", a.eta, seed)?;
        return Ok(outcome(paired.success));
    }
    let data = read_dataset(a.data.as_deref().context("--data is required")?)?;
    let clean: Vec<LabeledSample> = data
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let x: Option<Vec<f64>> = s.x.iter().copied().collect();
            match (x, s.y) {
                (Some(x), Some(y)) => Ok(LabeledSample { x, y }),
                _ => Err(anyhow!("sample {i} has erased entries; corrupt needs clean data")),
            }
        })
        .collect::<Result<_>>()?;
    let corrupted = match a.adversary {
        AdversaryArg::ObliviousErasure => oblivious_erasure(&clean, a.eta, &mut rng)?,
        AdversaryArg::SignFlip => sign_flip_replacement(&clean, a.eta)?,
        AdversaryArg::Coupling => unreachable!(),
    };
    let mut w = sink(out)?;
    write_jsonl(&corrupted, &mut w)?;
    w.flush()?;
    Ok(Outcome::Pass)
}

fn estimate(a: &EstimateArgs, out: Option<&Path>) -> Result<Outcome> {
    let kind: EstimatorKind = a.alg.parse()?;
    let meta: MetaConfig = match &a.meta {
        Some(p) => read_json(p)?,
        None => MetaConfig::default(),
    };
    let data = read_dataset(&a.data)?;
    let result = kind.run(&data, a.eta, &meta)?;
    write_json(&result, out)?;
    Ok(Outcome::Pass)
}

fn couple_verify(a: &VerifyArgs, cli: &Cli, out: Option<&Path>) -> Result<Outcome> {
    let cfg = match &a.config {
        Some(p) => read_json::<VerifyConfig>(p)?,
        None => {
            let specs = match a.spec.spec()? {
                Some(s) => vec![s],
                None => REFERENCE_SPECS.to_vec(),
            };
            VerifyConfig {
                specs,
                marginal_samples: a.samples,
                budget_trials: cli.trials.unwrap_or(10_000),
                seed: cli.seed,
                separation_factor: a.corrupt_factor,
            }
        }
    };
    let report = run_coupling_verification(&cfg)?;
    write_json(&report, out)?;
    Ok(outcome(report.passed))
}

fn forced_error(a: &ForcedArgs, cli: &Cli, out: Option<&Path>) -> Result<Outcome> {
    let cfg = match &a.config {
        Some(p) => read_json::<ForcedErrorConfig>(p)?,
        None => {
            let mode: AdversaryMode = a.mode.parse()?;
            let runs = cli.trials.unwrap_or(100);
            let mut cfg = match a.regime.as_str() {
                "big-eta" => ForcedErrorConfig::big_eta(runs, cli.seed, mode),
                "small-beta" => ForcedErrorConfig::small_beta(runs, cli.seed, mode),
                other => bail!("forced-error supports big-eta and small-beta, got '{other}'"),
            };
            if let Some(algs) = &a.alg {
                cfg.estimators = algs
                    .iter()
                    .map(|s| s.parse::<EstimatorKind>())
                    .collect::<advreg_core::Result<_>>()?;
            }
            if let Some(n) = a.n {
                cfg.n = n;
            }
            cfg
        }
    };
    let report = run_forced_error_demo(&cfg)?;
    write_json(&report, out)?;
    Ok(outcome(report.passed))
}

fn regime_table(a: &TableArgs, cli: &Cli, out: Option<&Path>) -> Result<Outcome> {
    let mut cfg = match &a.config {
        Some(p) => read_json::<ExperimentConfig>(p)?,
        None => ExperimentConfig::acceptance(),
    };
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if a.config.is_none() {
        cfg.seed = cli.seed;
    }
    let table = run_regime_table(&cfg)?;
    let mut w = sink(out)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    if let Some(p) = &a.summary {
        let summary: Value = serde_json::json!({
            "passed": table.passed,
            "cells": table.cells,
        });
        write_json(&summary, Some(p))?;
    }
    Ok(outcome(table.passed))
}

fn calibrate(a: &CalibrateArgs, cli: &Cli, out: Option<&Path>) -> Result<Outcome> {
    let cfg = CalibrationConfig {
        trials: cli.trials.unwrap_or(10_000),
        estimator_trials: a.estimator_trials,
        seed: cli.seed,
    };
    let report = calibrate_constants(&cfg)?;
    write_json(&report, out)?;
    Ok(outcome(report.passed))
}
