//! Coupling verification: exactness of the univariate maximal coupling, the
//! sum-conditioned budget, marginal laws of every regime coupling and their
//! disagreement budgets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::constants::{disagreement_bound, small_eta_rate};
use super::{par_indexed, Check};
use crate::coupling::{
    estimate_disagreements, maximal_coupling_univariate, sum_conditioned_coupling, CoupledPair,
    CouplingSpec, DisagreementStats, RegimeCoupler,
};
use crate::error::{invalid, Result};
use crate::gaussian::{normal_cdf, tv_exact_univariate_equal_var, UnivariateGaussian};
use crate::model::dot;
use crate::rng::RngStream;
use crate::stats::{ks_critical_value, ks_statistic, Running};

/// Draws per parallel work unit; chunk `c` uses `root.child(c)`.
const CHUNK: usize = 1024;

/// Family-wise level of each KS suite.
pub const KS_ALPHA: f64 = 0.01;

fn default_factor() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub specs: Vec<CouplingSpec>,
    /// Draws for the marginal suite; 0 skips it.
    pub marginal_samples: usize,
    /// Draws for the budget suite; 0 skips it.
    pub budget_trials: usize,
    pub seed: u64,
    /// Draw from each spec with its separation multiplied by this factor
    /// while checking against the unscaled spec's bound. Values above 1
    /// violate the premise and must fail the budget suite.
    #[serde(default = "default_factor")]
    pub separation_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecReport {
    pub spec: CouplingSpec,
    pub drawn: CouplingSpec,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disagreements: Option<DisagreementStats>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub specs: Vec<SpecReport>,
    pub passed: bool,
}

/// Runs the marginal and budget suites for every spec. Spec `k` draws from
/// `RngStream::new(seed).child(k)`, marginal draws from its child 0 and
/// budget draws from its child 1.
pub fn run_coupling_verification(cfg: &VerifyConfig) -> Result<VerificationReport> {
    if cfg.specs.is_empty() {
        return Err(invalid("no coupling specs given"));
    }
    if !(cfg.separation_factor > 0.0) {
        return Err(invalid("separation factor must be positive"));
    }
    let root = RngStream::new(cfg.seed);
    let mut specs = Vec::with_capacity(cfg.specs.len());
    for (k, spec) in cfg.specs.iter().enumerate() {
        let drawn = spec.scaled_separation(cfg.separation_factor);
        let stream = root.child(k as u64);
        let mut checks = Vec::new();
        if cfg.marginal_samples > 0 {
            checks.extend(marginal_checks(&drawn, cfg.marginal_samples, &stream.child(0))?);
        }
        let mut disagreements = None;
        if cfg.budget_trials > 0 {
            let stats = estimate_disagreements(&drawn, cfg.budget_trials, &stream.child(1))?;
            checks.extend(budget_checks(spec, &stats));
            disagreements = Some(stats);
        }
        let passed = checks.iter().all(|c| c.passed);
        specs.push(SpecReport {
            spec: *spec,
            drawn,
            checks,
            disagreements,
            passed,
        });
    }
    let passed = specs.iter().all(|s| s.passed);
    Ok(VerificationReport {
        seed: cfg.seed,
        specs,
        passed,
    })
}

/// Budget checks of `stats` against the bound for `claimed`; each allows
/// three standard errors.
pub fn budget_checks(claimed: &CouplingSpec, stats: &DisagreementStats) -> Vec<Check> {
    let bound = disagreement_bound(claimed);
    let mut out = vec![
        Check::at_most(
            "mean-disagreements",
            stats.mean_coord_disagreements,
            bound + 3.0 * stats.std_error,
        )
        .with_detail(format!("bound {bound}, std error {}", stats.std_error)),
        Check::at_most("label-disagreement-rate", stats.label_disagreement_rate, 0.0),
    ];
    if let (CouplingSpec::SmallEta { e, sigma, .. }, Some(rate), Some(se)) =
        (claimed, stats.aux_event_rate, stats.aux_event_std_error)
    {
        out.push(
            Check::at_most("second-half-label-disagreement", rate, e / sigma + 3.0 * se)
                .with_detail(format!("bound {}, std error {se}", e / sigma)),
        );
    }
    out
}

/// Zero-separation variants of the reference specs: `b = 0`, `eps = 0` and
/// `E = 1e-9`. The first two must produce no disagreements at all.
pub fn zero_parameter_specs(specs: &[CouplingSpec]) -> Vec<CouplingSpec> {
    specs
        .iter()
        .filter_map(|s| match *s {
            CouplingSpec::SmallBeta { d, sigma, r, .. } => Some(CouplingSpec::SmallBeta {
                d,
                b: 0.0,
                sigma,
                r,
            }),
            CouplingSpec::IntermEta { d, s, sigma, .. } => Some(CouplingSpec::IntermEta {
                d,
                s,
                eps: 0.0,
                sigma,
            }),
            CouplingSpec::SmallEta { d, big_b, sigma, .. } => Some(CouplingSpec::SmallEta {
                d,
                big_b,
                e: 1e-9,
                sigma,
            }),
            CouplingSpec::BigEta { .. } => None,
        })
        .collect()
}

/// Zero-separation check: exactly zero disagreements when the separation is
/// exactly zero, otherwise at most the (vanishing) budget bound.
pub fn zero_checks(spec: &CouplingSpec, trials: usize, seed: u64) -> Result<Vec<Check>> {
    let stats = estimate_disagreements(spec, trials, &RngStream::new(seed))?;
    let name = format!("zero-separation-{}", spec.regime().tag());
    let limit = match *spec {
        CouplingSpec::SmallEta {
            d, big_b, e, sigma, ..
        } => small_eta_rate(d, big_b, e, sigma),
        _ => 0.0,
    };
    Ok(vec![Check::at_most(name, stats.mean_coord_disagreements, limit)])
}

/// `N(0, 1)` against `N(1, 1)`: disagreement rate within `0.005` of the exact
/// total variation and `x < x'` on every disagreeing draw.
pub fn maximal_coupling_checks(draws: usize, seed: u64) -> Result<Vec<Check>> {
    let p = UnivariateGaussian::new(0.0, 1.0)?;
    let q = UnivariateGaussian::new(1.0, 1.0)?;
    let tv = tv_exact_univariate_equal_var(&p, &q)?;
    let chunks = draws.div_ceil(CHUNK);
    let counts = par_indexed(chunks, &RngStream::new(seed), |c, mut rng| {
        let len = CHUNK.min(draws - c * CHUNK);
        let (mut differ, mut wrong_sign) = (0usize, 0usize);
        for _ in 0..len {
            let (x, xp) = maximal_coupling_univariate(&p, &q, &mut rng).expect("valid inputs");
            if x != xp {
                differ += 1;
                if x >= xp {
                    wrong_sign += 1;
                }
            }
        }
        (differ, wrong_sign)
    });
    let differ: usize = counts.iter().map(|c| c.0).sum();
    let wrong: usize = counts.iter().map(|c| c.1).sum();
    let rate = differ as f64 / draws as f64;
    Ok(vec![
        Check::at_most("maximal-coupling-rate-error", (rate - tv).abs(), 0.005)
            .with_detail(format!("rate {rate}, exact {tv}")),
        Check::at_most("maximal-coupling-sign-violations", wrong as f64, 0.0),
    ])
}

/// Sum-conditioned coupling at `(d, t, t')`: mean disagreements at most
/// `1 + |t - t'|` plus three standard errors, and none at all when `t = t'`.
pub fn sum_conditioned_checks(
    d: usize,
    t: f64,
    tprime: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<Check>> {
    let root = RngStream::new(seed);
    let count = |a: f64, b: f64, stream: RngStream| -> Result<Vec<usize>> {
        let chunks = trials.div_ceil(CHUNK);
        let parts = par_indexed(chunks, &stream, |c, mut rng| {
            let len = CHUNK.min(trials - c * CHUNK);
            (0..len)
                .map(|_| {
                    let (x, xp) = sum_conditioned_coupling(d, a, b, &mut rng)?;
                    Ok(x.iter().zip(&xp).filter(|(u, v)| u != v).count())
                })
                .collect::<Result<Vec<usize>>>()
        });
        parts.into_iter().try_fold(Vec::new(), |mut acc, p| {
            acc.extend(p?);
            Ok(acc)
        })
    };
    let mut run = Running::default();
    for k in count(t, tprime, root.child(0))? {
        run.push(k as f64);
    }
    let bound = 1.0 + (t - tprime).abs();
    let equal_max = count(t, t, root.child(1))?.into_iter().max().unwrap_or(0);
    Ok(vec![
        Check::at_most(
            "sum-conditioned-mean",
            run.mean(),
            bound + 3.0 * run.std_error(),
        )
        .with_detail(format!("bound {bound}, std error {}", run.std_error())),
        Check::at_most("sum-conditioned-equal-targets-max", equal_max as f64, 0.0),
    ])
}

/// Columns of one side of `n` coupled draws, labels last.
struct Columns {
    cols: Vec<Vec<f64>>,
}

/// Marginal suite for one spec at `n` draws: per-coordinate, label and
/// residual KS tests for both sides (Bonferroni over all of them), the
/// cross-moment `E[y x] = beta`, and label equality.
pub fn marginal_checks(spec: &CouplingSpec, n: usize, root: &RngStream) -> Result<Vec<Check>> {
    if n < 2 {
        return Err(invalid("marginal suite needs at least two draws"));
    }
    let coupler = RegimeCoupler::new(*spec)?;
    let pair = spec.hypothesis_pair()?;
    let d = spec.d();
    let sigma = spec.sigma();
    let chunks = n.div_ceil(CHUNK);
    let mut sides = [
        Columns {
            cols: vec![Vec::with_capacity(n); d + 1],
        },
        Columns {
            cols: vec![Vec::with_capacity(n); d + 1],
        },
    ];
    let mut residuals = [Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut labels_equal = 0usize;
    let betas = [&pair.beta0, &pair.beta1];
    // batches bound peak memory at a few chunks of pairs
    let batch = rayon::current_num_threads().max(1) * 4;
    let mut start = 0;
    while start < chunks {
        let end = (start + batch).min(chunks);
        let drawn: Vec<Vec<CoupledPair>> = (start..end)
            .into_par_iter()
            .map(|c| {
                let mut rng = root.child(c as u64);
                let len = CHUNK.min(n - c * CHUNK);
                (0..len).map(|_| coupler.draw(&mut rng)).collect()
            })
            .collect();
        for p in drawn.into_iter().flatten() {
            if p.sample0.y.to_bits() == p.sample1.y.to_bits() {
                labels_equal += 1;
            }
            for (k, s) in [&p.sample0, &p.sample1].into_iter().enumerate() {
                for j in 0..d {
                    sides[k].cols[j].push(s.x[j]);
                }
                sides[k].cols[d].push(s.y);
                residuals[k].push(s.y - dot(betas[k], &s.x));
            }
        }
        start = end;
    }
    let tests = 2 * (d + 1 + usize::from(sigma > 0.0));
    let crit = ks_critical_value(n, KS_ALPHA / tests as f64);
    let mut out = Vec::new();
    for (k, side) in sides.iter_mut().enumerate() {
        let beta = betas[k];
        let label_sd = (dot(beta, beta) + sigma * sigma).sqrt();
        let moment = cross_moment_distance(&side.cols, beta);
        let ks: Vec<f64> = side
            .cols
            .par_iter_mut()
            .enumerate()
            .map(|(j, col)| {
                let sd = if j == d { label_sd } else { 1.0 };
                ks_statistic(col, |x| normal_cdf(x / sd))
            })
            .collect();
        let coord_max = ks[..d].iter().copied().fold(0.0, f64::max);
        out.push(Check::at_most(format!("ks-coordinates-side{k}"), coord_max, crit));
        out.push(Check::at_most(format!("ks-label-side{k}"), ks[d], crit));
        out.push(moment.with_name(k));
        let res = &mut residuals[k];
        if sigma > 0.0 {
            let stat = ks_statistic(res, |x| normal_cdf(x / sigma));
            out.push(Check::at_most(format!("ks-noise-side{k}"), stat, crit));
        } else {
            let worst = res.iter().fold(0.0, |m: f64, r| m.max(r.abs()));
            out.push(Check::at_most(
                format!("noiseless-residual-side{k}"),
                worst,
                1e-9 * (1.0 + label_sd),
            ));
        }
    }
    out.push(Check::at_least(
        "label-equality",
        labels_equal as f64 / n as f64,
        1.0,
    ));
    Ok(out)
}

struct Moment {
    dist: f64,
    threshold: f64,
}

impl Moment {
    fn with_name(self, side: usize) -> Check {
        Check::at_most(format!("cross-moment-side{side}"), self.dist, self.threshold)
    }
}

/// `|mean(y x) - beta|` against three times the root of the summed squared
/// standard errors of the coordinate means.
fn cross_moment_distance(cols: &[Vec<f64>], beta: &[f64]) -> Moment {
    let d = beta.len();
    let y = &cols[d];
    let mut dist2 = 0.0;
    let mut se2 = 0.0;
    for j in 0..d {
        let mut run = Running::default();
        for (x, yy) in cols[j].iter().zip(y) {
            run.push(x * yy);
        }
        dist2 += (run.mean() - beta[j]).powi(2);
        se2 += run.std_error().powi(2);
    }
    Moment {
        dist: dist2.sqrt(),
        threshold: 3.0 * se2.sqrt(),
    }
}
