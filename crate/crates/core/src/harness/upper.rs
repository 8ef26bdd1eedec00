//! Upper-bound checks of A1, A2 and A3 with the rate constant frozen at 10.

use serde::{Deserialize, Serialize};

use super::constants::RATE_CONSTANT;
use super::par_indexed;
use super::table::AdversaryKind;
use crate::error::{invalid, Result};
use crate::estimators::{estimation_error, EstimatorKind, MetaConfig};
use crate::model::{norm, sample_clean, RegressionInstance};
use crate::rng::RngStream;
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperCase {
    pub name: String,
    pub estimator: EstimatorKind,
    pub adversary: AdversaryKind,
    pub d: usize,
    pub eta: f64,
    pub sigma: f64,
    pub beta_norm: f64,
    pub n: usize,
}

impl UpperCase {
    /// Rate without constant: `eta d sigma`, `eta sqrt(d) sqrt(|beta|^2 + sigma^2)`
    /// or `|beta|`.
    pub fn rate(&self) -> f64 {
        let df = self.d as f64;
        match self.estimator {
            EstimatorKind::A1 => self.eta * df * self.sigma,
            EstimatorKind::A2 => {
                self.eta * df.sqrt() * (self.beta_norm.powi(2) + self.sigma.powi(2)).sqrt()
            }
            _ => self.beta_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundConfig {
    pub cases: Vec<UpperCase>,
    pub trials: usize,
    pub seed: u64,
}

impl UpperBoundConfig {
    /// A2 under sign flips, A1 under erasures and A3, as in the acceptance
    /// suite.
    pub fn acceptance(trials: usize, seed: u64) -> Self {
        Self {
            cases: vec![
                UpperCase {
                    name: "a2-sign-flip".into(),
                    estimator: EstimatorKind::A2,
                    adversary: AdversaryKind::SignFlipReplacement,
                    d: 50,
                    eta: 0.02,
                    sigma: 1.0,
                    beta_norm: 1.0,
                    n: 100_000,
                },
                UpperCase {
                    name: "a1-erasure".into(),
                    estimator: EstimatorKind::A1,
                    adversary: AdversaryKind::ObliviousErasure,
                    d: 20,
                    eta: 0.002,
                    sigma: 1.0,
                    beta_norm: 100.0,
                    n: 100_000,
                },
                UpperCase {
                    name: "a3-zero".into(),
                    estimator: EstimatorKind::A3,
                    adversary: AdversaryKind::SignFlipReplacement,
                    d: 50,
                    eta: 0.02,
                    sigma: 1.0,
                    beta_norm: 1.0,
                    n: 1000,
                },
            ],
            trials,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperCaseReport {
    pub case: UpperCase,
    pub errors: Vec<f64>,
    pub median_error: f64,
    pub rate: f64,
    /// `median_error / rate`.
    pub constant: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundReport {
    pub seed: u64,
    pub cases: Vec<UpperCaseReport>,
    pub passed: bool,
}

/// Trial `t` of case `k` draws from `RngStream::new(seed).child(k).child(t)`.
/// A3 must equal `|beta|` bitwise on every trial; the others must have
/// median error at most `10 * rate`.
pub fn run_upper_bound_checks(cfg: &UpperBoundConfig) -> Result<UpperBoundReport> {
    if cfg.trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let root = RngStream::new(cfg.seed);
    let meta = MetaConfig::default();
    let mut cases = Vec::with_capacity(cfg.cases.len());
    for (k, case) in cfg.cases.iter().enumerate() {
        let beta = vec![case.beta_norm / (case.d as f64).sqrt(); case.d];
        let true_norm = norm(&beta);
        let inst = RegressionInstance::new(beta.clone(), case.sigma)?;
        let errors = par_indexed(cfg.trials, &root.child(k as u64), |_, mut rng| {
            let clean = sample_clean(&inst, case.n, &mut rng)?;
            let data = case.adversary.apply(&clean, case.eta, &mut rng)?;
            let out = case.estimator.run(&data, case.eta, &meta)?;
            estimation_error(&out.beta_hat, &beta)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        let median_error = median(&errors);
        let rate = case.rate();
        let (threshold, passed) = if case.estimator == EstimatorKind::A3 {
            (true_norm, errors.iter().all(|&e| e == true_norm))
        } else {
            let t = RATE_CONSTANT * rate;
            (t, median_error <= t)
        };
        cases.push(UpperCaseReport {
            case: case.clone(),
            errors,
            median_error,
            rate,
            constant: if rate > 0.0 { median_error / rate } else { 0.0 },
            threshold,
            passed,
        });
    }
    let passed = cases.iter().all(|c| c.passed);
    Ok(UpperBoundReport {
        seed: cfg.seed,
        cases,
        passed,
    })
}
