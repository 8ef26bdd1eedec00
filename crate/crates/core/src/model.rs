//! The clean linear model, masked datasets, and the hypothesis pairs used by
//! the lower-bound constructions.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::UnivariateGaussian;
use crate::rng::RngStream;

/// `y = beta' X + xi` with `X ~ N(0, I_d)` and `xi ~ N(0, sigma^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionInstance {
    pub beta: Vec<f64>,
    pub sigma: f64,
}

impl RegressionInstance {
    pub fn new(beta: Vec<f64>, sigma: f64) -> Result<Self> {
        if beta.is_empty() {
            return Err(invalid("dimension must be positive"));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(invalid("regressor has non-finite entries"));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { beta, sigma })
    }

    pub fn d(&self) -> usize {
        self.beta.len()
    }

    pub fn beta_norm(&self) -> f64 {
        norm(&self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl LabeledSample {
    pub fn to_masked(&self) -> MaskedSample {
        MaskedSample {
            x: self.x.iter().map(|&v| Some(v)).collect(),
            y: Some(self.y),
        }
    }
}

/// A sample after the adversary: `None` marks an erased entry.
///
/// Serializes as `{"x": [number | null, ...], "y": number | null}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedSample {
    pub x: Vec<Option<f64>>,
    pub y: Option<f64>,
}

impl MaskedSample {
    pub fn is_complete(&self) -> bool {
        self.y.is_some() && self.x.iter().all(Option::is_some)
    }

    pub fn erased_count(&self) -> usize {
        self.x.iter().filter(|v| v.is_none()).count() + usize::from(self.y.is_none())
    }
}

pub fn to_masked(data: &[LabeledSample]) -> Vec<MaskedSample> {
    data.iter().map(LabeledSample::to_masked).collect()
}

/// Which lower-bound construction a hypothesis pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    SmallBeta,
    BigEta,
    IntermEta,
    SmallEta,
}

impl Regime {
    pub fn tag(self) -> &'static str {
        match self {
            Regime::SmallBeta => "small-beta",
            Regime::BigEta => "big-eta",
            Regime::IntermEta => "interm-eta",
            Regime::SmallEta => "small-eta",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small-beta" => Ok(Regime::SmallBeta),
            "big-eta" => Ok(Regime::BigEta),
            "interm-eta" | "medium-eta" => Ok(Regime::IntermEta),
            "small-eta" => Ok(Regime::SmallEta),
            other => Err(invalid(format!("unknown regime '{other}'"))),
        }
    }
}

/// Two regressors of equal norm that no estimator can tell apart once the
/// adversary has acted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisPair {
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    pub sigma: f64,
    pub regime: Regime,
}

impl HypothesisPair {
    pub fn separation(&self) -> f64 {
        distance(&self.beta0, &self.beta1)
    }

    pub fn instance0(&self) -> RegressionInstance {
        RegressionInstance {
            beta: self.beta0.clone(),
            sigma: self.sigma,
        }
    }

    pub fn instance1(&self) -> RegressionInstance {
        RegressionInstance {
            beta: self.beta1.clone(),
            sigma: self.sigma,
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sample_clean(
    inst: &RegressionInstance,
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<LabeledSample>> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    Ok((0..n).map(|_| draw_clean(inst, rng)).collect())
}

pub(crate) fn draw_clean(inst: &RegressionInstance, rng: &mut RngStream) -> LabeledSample {
    let x: Vec<f64> = (0..inst.d()).map(|_| rng.normal()).collect();
    let noise = if inst.sigma > 0.0 {
        inst.sigma * rng.normal()
    } else {
        0.0
    };
    let y = dot(&inst.beta, &x) + noise;
    LabeledSample { x, y }
}

/// Marginal law of the label: `N(0, |beta|^2 + sigma^2)`.
pub fn label_distribution(inst: &RegressionInstance) -> UnivariateGaussian {
    UnivariateGaussian {
        mean: 0.0,
        variance: inst.beta.iter().map(|b| b * b).sum::<f64>() + inst.sigma * inst.sigma,
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        Err(invalid("dimension must be positive"))
    } else {
        Ok(())
    }
}

fn check_even(d: usize) -> Result<()> {
    check_dim(d)?;
    if d % 2 != 0 {
        return Err(invalid(format!("dimension must be even, got {d}")));
    }
    Ok(())
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

/// `beta0 = (r, b/sqrt d, ..., b/sqrt d)` and `beta1` with the last `d - 1`
/// entries negated. With `r = 0` every coordinate carries `b/sqrt d` and
/// `beta1 = -beta0`.
pub fn make_small_beta_pair(d: usize, b: f64, sigma: f64, r: f64) -> Result<HypothesisPair> {
    check_dim(d)?;
    check_nonneg("b", b)?;
    check_nonneg("sigma", sigma)?;
    check_nonneg("r", r)?;
    if r > 0.0 && d < 2 {
        return Err(invalid("the shifted construction needs d >= 2"));
    }
    let c = b / (d as f64).sqrt();
    let start = usize::from(r > 0.0);
    let mut beta0 = vec![c; d];
    let mut beta1 = vec![-c; d];
    if start == 1 {
        beta0[0] = r;
        beta1[0] = r;
    }
    Ok(HypothesisPair {
        beta0,
        beta1,
        sigma,
        regime: Regime::SmallBeta,
    })
}

/// `beta = s 1_d` against `-beta`.
pub fn make_big_eta_pair(d: usize, s: f64) -> Result<HypothesisPair> {
    check_dim(d)?;
    check_nonneg("s", s)?;
    Ok(HypothesisPair {
        beta0: vec![s; d],
        beta1: vec![-s; d],
        sigma: 0.0,
        regime: Regime::BigEta,
    })
}

/// `s (eps, ..., eps, 1, ..., 1)` against `s (-eps, ..., -eps, 1, ..., 1)`.
pub fn make_interm_eta_pair(d: usize, s: f64, eps: f64) -> Result<HypothesisPair> {
    check_even(d)?;
    check_nonneg("s", s)?;
    if !(0.0..=1.0).contains(&eps) {
        return Err(invalid(format!("eps must lie in [0, 1], got {eps}")));
    }
    let h = d / 2;
    let beta0 = (0..d).map(|i| if i < h { s * eps } else { s }).collect();
    let beta1 = (0..d).map(|i| if i < h { -s * eps } else { s }).collect();
    Ok(HypothesisPair {
        beta0,
        beta1,
        sigma: 0.0,
        regime: Regime::IntermEta,
    })
}

/// Scale `s` giving `|s (eps, ..., 1, ...)| = target` in dimension `d`.
pub fn interm_scale_for_norm(d: usize, eps: f64, target: f64) -> Result<f64> {
    check_even(d)?;
    check_nonneg("target norm", target)?;
    Ok(target / (d as f64 * (1.0 + eps * eps) / 2.0).sqrt())
}

/// `eps = (eta - 2 / ((1 - c') d)) sqrt(d) / C`.
pub fn interm_epsilon(eta: f64, d: usize, cprime: f64, big_c: f64) -> Result<f64> {
    check_dim(d)?;
    if !(cprime > 0.0 && cprime < 0.25) {
        return Err(invalid(format!("c' must lie in (0, 0.25), got {cprime}")));
    }
    if !(big_c > 0.0) {
        return Err(invalid("C must be positive"));
    }
    let df = d as f64;
    let threshold = 2.0 / ((1.0 - cprime) * df);
    if eta < threshold {
        return Err(Error::Regime(format!(
            "eta = {eta} is below 2/((1-c')d) = {threshold}"
        )));
    }
    let eps = (eta - threshold) * df.sqrt() / big_c;
    if eps > 1.0 {
        return Err(Error::Regime(format!(
            "eps = {eps} exceeds 1; eta = {eta} is above the medium regime for C = {big_c}"
        )));
    }
    Ok(eps)
}

/// `beta = (B/sqrt d 1_{d/2}, E/sqrt d 1_{d/2})` against the same vector with
/// the second half negated.
pub fn make_small_eta_pair(d: usize, big_b: f64, e: f64) -> Result<HypothesisPair> {
    check_even(d)?;
    check_nonneg("B", big_b)?;
    if !(e >= 0.0 && e < 1.0) {
        return Err(invalid(format!("E must lie in [0, 1), got {e}")));
    }
    let h = d / 2;
    let sd = (d as f64).sqrt();
    let beta0 = (0..d).map(|i| if i < h { big_b / sd } else { e / sd }).collect();
    let beta1 = (0..d).map(|i| if i < h { big_b / sd } else { -e / sd }).collect();
    Ok(HypothesisPair {
        beta0,
        beta1,
        sigma: 0.0,
        regime: Regime::SmallEta,
    })
}

/// `E = min(eta d sigma, eta sqrt(d) B) / (2 C)`; must come out below one.
pub fn small_eta_e(eta: f64, d: usize, sigma: f64, big_b: f64, big_c: f64) -> Result<f64> {
    check_dim(d)?;
    check_nonneg("eta", eta)?;
    check_nonneg("sigma", sigma)?;
    check_nonneg("B", big_b)?;
    if !(big_c > 0.0) {
        return Err(invalid("C must be positive"));
    }
    let df = d as f64;
    let e = (eta * df * sigma).min(eta * df.sqrt() * big_b) / (2.0 * big_c);
    if e >= 1.0 {
        return Err(Error::Regime(format!("E = {e} is not below 1")));
    }
    Ok(e)
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write>(samples: &[MaskedSample], mut out: W) -> Result<()> {
    for s in samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a JSON-lines dataset, skipping blank lines.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<MaskedSample>> {
    let mut out = Vec::new();
    let mut dim = None;
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: MaskedSample = serde_json::from_str(&line)?;
        match dim {
            None => dim = Some(s.x.len()),
            Some(d) if d != s.x.len() => {
                return Err(invalid(format!(
                    "line {}: sample has {} covariates, expected {d}",
                    lineno + 1,
                    s.x.len()
                )))
            }
            _ => {}
        }
        if s.x.iter().flatten().chain(s.y.iter()).any(|v| !v.is_finite()) {
            return Err(invalid(format!("line {}: non-finite value", lineno + 1)));
        }
        out.push(s);
    }
    Ok(out)
}
