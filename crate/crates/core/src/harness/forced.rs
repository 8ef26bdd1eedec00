//! Forced-error demonstration: when the coupling adversary makes the two
//! datasets identical, every estimator is at least half the separation away
//! from one of the two regressors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::par_indexed;
use super::table::lower_bound_rate;
use crate::adversary::{budget, coupling_adversary, AdversaryConfig, AdversaryMode};
use crate::coupling::CouplingSpec;
use crate::error::{invalid, Error, Result};
use crate::estimators::{estimation_error, EstimatorKind, MetaConfig};
use crate::model::norm;
use crate::rng::RngStream;

fn default_slack() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcedErrorConfig {
    pub spec: CouplingSpec,
    pub eta: f64,
    pub n: usize,
    pub runs: usize,
    pub seed: u64,
    pub mode: AdversaryMode,
    #[serde(default = "default_slack")]
    pub slack_c: f64,
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub meta: MetaConfig,
}

impl ForcedErrorConfig {
    /// Big-eta demonstration: `d = 100`, `eta = 0.45`, `n = 1000`.
    pub fn big_eta(runs: usize, seed: u64, mode: AdversaryMode) -> Self {
        Self {
            spec: CouplingSpec::BigEta {
                d: 100,
                s: 1.0,
                sigma: 0.0,
            },
            eta: 0.45,
            n: 1000,
            runs,
            seed,
            mode,
            slack_c: default_slack(),
            estimators: EstimatorKind::ALL.to_vec(),
            meta: MetaConfig::default(),
        }
    }

    /// Small-beta demonstration: `d = 100`, `eta = 0.01`, `sigma = 1`,
    /// `b = eta sqrt(d) sigma / 2`, `n = 10^4`.
    pub fn small_beta(runs: usize, seed: u64, mode: AdversaryMode) -> Self {
        let (d, eta, sigma) = (100usize, 0.01, 1.0);
        Self {
            spec: CouplingSpec::SmallBeta {
                d,
                b: eta * (d as f64).sqrt() * sigma / 2.0,
                sigma,
                r: 0.0,
            },
            eta,
            n: 10_000,
            runs,
            seed,
            mode,
            slack_c: default_slack(),
            estimators: EstimatorKind::ALL.to_vec(),
            meta: MetaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorForcedSummary {
    pub estimator: String,
    /// Successful runs on which the estimator was defined.
    pub evaluated_runs: usize,
    /// Successful runs on which it reported a regime or singularity error.
    pub not_applicable_runs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub not_applicable_reason: Option<String>,
    /// Runs with `max(err0, err1) < separation / 2`; must be zero.
    pub violations: usize,
    /// Smallest `max(err0, err1)` over evaluated runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_forced_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcedErrorReport {
    pub spec: CouplingSpec,
    pub eta: f64,
    pub n: usize,
    pub seed: u64,
    pub mode: AdversaryMode,
    pub runs: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub budget_cap: usize,
    pub max_edits: usize,
    /// Erased entries summed over successful runs (zero in replace mode).
    pub erased_entries: usize,
    pub separation: f64,
    pub half_separation: f64,
    /// Lower-bound rate of the regime tables at `(eta, |beta0|, sigma)`.
    pub omega_prediction: f64,
    /// Smallest forced error over all estimators and successful runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realized_lower_bound: Option<f64>,
    pub estimators: Vec<EstimatorForcedSummary>,
    /// Budget respected and no forced-error violation.
    pub passed: bool,
}

struct RunOutcome {
    success: bool,
    max_edits: usize,
    erased: usize,
    /// Per estimator: `Ok(Some(max error))`, `Ok(None)` on failed runs,
    /// `Err(reason)` when not applicable.
    forced: Vec<std::result::Result<Option<f64>, String>>,
}

/// Run `r` draws its adversary from `RngStream::new(seed).child(r)`.
pub fn run_forced_error_demo(cfg: &ForcedErrorConfig) -> Result<ForcedErrorReport> {
    if cfg.runs == 0 {
        return Err(invalid("runs must be at least 1"));
    }
    if cfg.estimators.is_empty() {
        return Err(invalid("no estimators given"));
    }
    let adv = AdversaryConfig::new(cfg.eta, cfg.slack_c, cfg.mode)?;
    let pair = cfg.spec.hypothesis_pair()?;
    let separation = pair.separation();
    let half = separation / 2.0;
    let outcomes = par_indexed(cfg.runs, &RngStream::new(cfg.seed), |_, mut rng| {
        let out = coupling_adversary(&cfg.spec, cfg.n, &adv, &mut rng)?;
        let max_edits = out.max_edits();
        if !out.success {
            return Ok(RunOutcome {
                success: false,
                max_edits,
                erased: 0,
                forced: vec![Ok(None); cfg.estimators.len()],
            });
        }
        let data = &out.dataset0;
        let mut forced = Vec::with_capacity(cfg.estimators.len());
        for kind in &cfg.estimators {
            match kind.run(data, cfg.eta, &cfg.meta) {
                Ok(est) => {
                    let e0 = estimation_error(&est.beta_hat, &pair.beta0)?;
                    let e1 = estimation_error(&est.beta_hat, &pair.beta1)?;
                    forced.push(Ok(Some(e0.max(e1))));
                }
                Err(e @ (Error::Regime(_) | Error::Singular(_))) => forced.push(Err(e.to_string())),
                Err(e) => return Err(e),
            }
        }
        Ok(RunOutcome {
            success: true,
            max_edits,
            erased: out.erased_entries(),
            forced,
        })
    })
    .into_iter()
    .collect::<Result<Vec<RunOutcome>>>()?;

    let successes = outcomes.iter().filter(|o| o.success).count();
    let max_edits = outcomes.iter().map(|o| o.max_edits).max().unwrap_or(0);
    let budget_cap = budget(cfg.eta, cfg.n);
    let erased_entries = outcomes.iter().filter(|o| o.success).map(|o| o.erased).sum();
    let mut estimators = Vec::with_capacity(cfg.estimators.len());
    for (e, kind) in cfg.estimators.iter().enumerate() {
        let mut evaluated = 0;
        let mut not_applicable = 0;
        let mut reasons: BTreeMap<String, ()> = BTreeMap::new();
        let mut violations = 0;
        let mut min_forced: Option<f64> = None;
        for o in outcomes.iter().filter(|o| o.success) {
            match &o.forced[e] {
                Ok(Some(v)) => {
                    evaluated += 1;
                    if *v < half {
                        violations += 1;
                    }
                    min_forced = Some(min_forced.map_or(*v, |m| m.min(*v)));
                }
                Ok(None) => {}
                Err(reason) => {
                    not_applicable += 1;
                    reasons.insert(reason.clone(), ());
                }
            }
        }
        estimators.push(EstimatorForcedSummary {
            estimator: kind.tag().to_string(),
            evaluated_runs: evaluated,
            not_applicable_runs: not_applicable,
            not_applicable_reason: reasons.into_keys().next(),
            violations,
            min_forced_error: min_forced,
        });
    }
    let realized_lower_bound = estimators
        .iter()
        .filter_map(|s| s.min_forced_error)
        .reduce(f64::min);
    let passed = max_edits <= budget_cap && estimators.iter().all(|s| s.violations == 0);
    Ok(ForcedErrorReport {
        spec: cfg.spec,
        eta: cfg.eta,
        n: cfg.n,
        seed: cfg.seed,
        mode: cfg.mode,
        runs: cfg.runs,
        successes,
        success_rate: successes as f64 / cfg.runs as f64,
        budget_cap,
        max_edits,
        erased_entries,
        separation,
        half_separation: half,
        omega_prediction: lower_bound_rate(
            cfg.eta,
            cfg.spec.d(),
            norm(&pair.beta0),
            cfg.spec.sigma(),
        ),
        realized_lower_bound,
        estimators,
        passed,
    })
}
