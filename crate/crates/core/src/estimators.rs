//! Estimators for regression under coordinate-wise corruption.
//!
//! * `A1`: least squares on complete rows with iterative residual trimming,
//!   error `O(eta d sigma)` when `eta (d + 1)` is small.
//! * `A2`: coordinate-wise trimmed means of `y x_j`, error
//!   `O(eta sqrt(d) sqrt(|beta|^2 + sigma^2))`.
//! * `A3`: the zero vector, error `|beta|`.
//! * the unified selector, which picks among the three from the data.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Error, Result};
use crate::model::{norm, MaskedSample};

/// A1 is defined only while `eta (d + 1)` stays below this.
pub const A1_MAX_CORRUPTION: f64 = 0.49;
/// Residual-trimming passes of A1.
pub const A1_ITERATIONS: usize = 20;
/// Fewest usable products per column for A2.
pub const A2_MIN_SAMPLES: usize = 10;
/// A2 trims `2 eta` inflated by this factor.
pub const TRIM_MARGIN: f64 = 1.5;
/// Default ceiling for every trim fraction.
pub const DEFAULT_TRIM_CAP: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    A1,
    A2,
    A3,
    #[serde(rename = "OLS")]
    Ols,
}

impl Branch {
    pub fn tag(self) -> &'static str {
        match self {
            Branch::A1 => "A1",
            Branch::A2 => "A2",
            Branch::A3 => "A3",
            Branch::Ols => "OLS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutput {
    pub beta_hat: Vec<f64>,
    pub chosen_branch: Branch,
    pub sigma_hat: Option<f64>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl EstimatorOutput {
    fn plain(beta_hat: Vec<f64>, branch: Branch) -> Self {
        Self {
            beta_hat,
            chosen_branch: branch,
            sigma_hat: None,
            diagnostics: BTreeMap::new(),
        }
    }
}

/// Constants of the unified selector.
///
/// `c` gates A1 (`c e1 < e2`), `c_prime` gates A2 (`|beta_2| > c' e2`).
/// `c_dprime` is carried for completeness of the ordering `c < c' < c''`.
/// `trim_fraction` caps every trim fraction used inside the estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    pub c: f64,
    pub c_prime: f64,
    pub c_dprime: f64,
    pub trim_fraction: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            c: 0.75,
            c_prime: 2.0,
            c_dprime: 4.0,
            trim_fraction: DEFAULT_TRIM_CAP,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c < self.c_prime && self.c_prime < self.c_dprime) {
            return Err(invalid("meta constants must satisfy 0 < C < C' < C''"));
        }
        if !(self.trim_fraction > 0.0 && self.trim_fraction < 0.5) {
            return Err(invalid("trim cap must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    A1,
    A2,
    A3,
    Unified,
    Ols,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::A1,
        EstimatorKind::A2,
        EstimatorKind::A3,
        EstimatorKind::Unified,
        EstimatorKind::Ols,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            EstimatorKind::A1 => "A1",
            EstimatorKind::A2 => "A2",
            EstimatorKind::A3 => "A3",
            EstimatorKind::Unified => "unified",
            EstimatorKind::Ols => "OLS-drop-missing",
        }
    }

    pub fn run(self, data: &[MaskedSample], eta: f64, cfg: &MetaConfig) -> Result<EstimatorOutput> {
        match self {
            EstimatorKind::A1 => estimator_a1(data, eta),
            EstimatorKind::A2 => a2_with_cap(data, eta, cfg.trim_fraction),
            EstimatorKind::A3 => Ok(estimator_a3(dim_of(data)?)),
            EstimatorKind::Unified => unified_estimator(data, eta, cfg),
            EstimatorKind::Ols => ols_drop_missing(data),
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a1" => Ok(EstimatorKind::A1),
            "a2" => Ok(EstimatorKind::A2),
            "a3" => Ok(EstimatorKind::A3),
            "unified" | "meta" => Ok(EstimatorKind::Unified),
            "ols" | "ols-drop-missing" => Ok(EstimatorKind::Ols),
            other => Err(invalid(format!("unknown estimator '{other}'"))),
        }
    }
}

fn dim_of(data: &[MaskedSample]) -> Result<usize> {
    let d = data
        .first()
        .map(|s| s.x.len())
        .ok_or_else(|| invalid("empty dataset"))?;
    if d == 0 {
        return Err(invalid("samples have no covariates"));
    }
    if data.iter().any(|s| s.x.len() != d) {
        return Err(invalid("samples differ in dimension"));
    }
    Ok(d)
}

fn trim_count(eps: f64, n: usize) -> usize {
    (eps * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Mean after sorting and dropping `k` values from each end.
fn trimmed_mean_k(values: &mut [f64], k: usize) -> f64 {
    values.sort_by(f64::total_cmp);
    let kept = &values[k..values.len() - k];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Drops the `ceil(eps n)` smallest and largest values and averages the rest.
pub fn trimmed_mean(values: &[f64], eps: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("trimmed mean of an empty list"));
    }
    if !(0.0..0.5).contains(&eps) {
        return Err(invalid(format!("trim fraction must lie in [0, 0.5), got {eps}")));
    }
    let k = trim_count(eps, values.len());
    if 2 * k >= values.len() {
        return Err(invalid(format!(
            "trimming {k} from each end leaves nothing of {} values",
            values.len()
        )));
    }
    let mut v = values.to_vec();
    Ok(trimmed_mean_k(&mut v, k))
}

/// Trim fraction `min(2 eta (1 + margin), cap)` used by A2 and the scale
/// estimates.
pub fn a2_trim(eta: f64, cap: f64) -> f64 {
    (2.0 * eta * TRIM_MARGIN).min(cap)
}

/// Trimmed mean whose trim count is clipped so that at least one value
/// survives.
fn robust_mean(values: &mut [f64], eps: f64) -> f64 {
    let n = values.len();
    let k = trim_count(eps, n).min((n - 1) / 2);
    trimmed_mean_k(values, k)
}

/// Mean of a chi-square(1) variable after symmetric trimming of fraction
/// `eps` in each tail. Uses `x f_1(x) = f_3(x)`.
fn chi2_trimmed_mean(eps: f64) -> f64 {
    if eps <= 0.0 {
        return 1.0;
    }
    let c1 = ChiSquared::new(1.0).expect("valid dof");
    let c3 = ChiSquared::new(3.0).expect("valid dof");
    let lo = c1.inverse_cdf(eps);
    let hi = c1.inverse_cdf(1.0 - eps);
    (c3.cdf(hi) - c3.cdf(lo)) / (1.0 - 2.0 * eps)
}

/// Trimmed second moment of a centred Gaussian, rescaled to be consistent
/// for its variance.
fn robust_variance(values: &mut [f64], eps: f64) -> f64 {
    for v in values.iter_mut() {
        *v *= *v;
    }
    let n = values.len();
    let k = trim_count(eps, n).min((n - 1) / 2);
    let raw = trimmed_mean_k(values, k);
    raw / chi2_trimmed_mean(k as f64 / n as f64)
}

pub fn estimator_a3(d: usize) -> EstimatorOutput {
    EstimatorOutput::plain(vec![0.0; d], Branch::A3)
}

/// `beta_j` = trimmed mean of `y x_j` over rows where both are present.
pub fn estimator_a2(data: &[MaskedSample], eta: f64) -> Result<EstimatorOutput> {
    a2_with_cap(data, eta, DEFAULT_TRIM_CAP)
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid(format!("eta must lie in [0, 1], got {eta}")));
    }
    Ok(())
}

fn a2_with_cap(data: &[MaskedSample], eta: f64, cap: f64) -> Result<EstimatorOutput> {
    check_eta(eta)?;
    let d = dim_of(data)?;
    let trim = a2_trim(eta, cap);
    let beta_hat = (0..d)
        .into_par_iter()
        .map(|j| {
            let mut prods: Vec<f64> = data
                .iter()
                .filter_map(|s| Some(s.y? * s.x[j]?))
                .collect();
            if prods.len() < A2_MIN_SAMPLES {
                return Err(invalid(format!(
                    "column {j} has {} usable samples, need {A2_MIN_SAMPLES}",
                    prods.len()
                )));
            }
            Ok(robust_mean(&mut prods, trim))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut out = EstimatorOutput::plain(beta_hat, Branch::A2);
    out.diagnostics.insert("trim_fraction".into(), trim);
    Ok(out)
}

fn complete_rows(data: &[MaskedSample]) -> Vec<(Vec<f64>, f64)> {
    data.iter()
        .filter_map(|s| {
            let x: Option<Vec<f64>> = s.x.iter().copied().collect();
            Some((x?, s.y?))
        })
        .collect()
}

fn least_squares(rows: &[(Vec<f64>, f64)], active: &[usize], d: usize) -> Result<Vec<f64>> {
    if active.len() < d {
        return Err(Error::Singular(format!(
            "{} rows cannot determine {d} coefficients",
            active.len()
        )));
    }
    let mut xtx = DMatrix::<f64>::zeros(d, d);
    let mut xty = DVector::<f64>::zeros(d);
    for &i in active {
        let (x, y) = &rows[i];
        for a in 0..d {
            xty[a] += x[a] * y;
            for b in 0..=a {
                xtx[(a, b)] += x[a] * x[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            xtx[(b, a)] = xtx[(a, b)];
        }
    }
    let chol = xtx
        .cholesky()
        .ok_or_else(|| Error::Singular("normal equations are not positive definite".into()))?;
    Ok(chol.solve(&xty).iter().copied().collect())
}

fn residual(x: &[f64], y: f64, beta: &[f64]) -> f64 {
    y - x.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
}

/// Least squares on complete rows, then up to [`A1_ITERATIONS`] passes of
/// "drop the `ceil(eps m)` largest absolute residuals and refit" with
/// `eps = eta (d + 1)`.
pub fn estimator_a1(data: &[MaskedSample], eta: f64) -> Result<EstimatorOutput> {
    check_eta(eta)?;
    let d = dim_of(data)?;
    let eps = eta * (d as f64 + 1.0);
    if eps >= A1_MAX_CORRUPTION {
        return Err(Error::Regime(format!(
            "eta (d + 1) = {eps} is not below {A1_MAX_CORRUPTION}"
        )));
    }
    let rows = complete_rows(data);
    let m = rows.len();
    let k = trim_count(eps, m);
    let mut active: Vec<usize> = (0..m).collect();
    let mut beta = least_squares(&rows, &active, d)?;
    let mut passes = 0;
    if k > 0 {
        for _ in 0..A1_ITERATIONS {
            passes += 1;
            let mut order: Vec<(f64, usize)> = rows
                .iter()
                .enumerate()
                .map(|(i, (x, y))| (residual(x, *y, &beta).abs(), i))
                .collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut next: Vec<usize> = order[..m - k].iter().map(|p| p.1).collect();
            next.sort_unstable();
            if next == active {
                break;
            }
            active = next;
            beta = least_squares(&rows, &active, d)?;
        }
    }
    let mut out = EstimatorOutput::plain(beta, Branch::A1);
    out.diagnostics.insert("active_rows".into(), active.len() as f64);
    out.diagnostics.insert("complete_rows".into(), m as f64);
    out.diagnostics.insert("passes".into(), passes as f64);
    Ok(out)
}

/// Ordinary least squares on the rows with no erased entry.
pub fn ols_drop_missing(data: &[MaskedSample]) -> Result<EstimatorOutput> {
    let d = dim_of(data)?;
    let rows = complete_rows(data);
    let active: Vec<usize> = (0..rows.len()).collect();
    let beta = least_squares(&rows, &active, d)?;
    let mut out = EstimatorOutput::plain(beta, Branch::Ols);
    out.diagnostics.insert("complete_rows".into(), rows.len() as f64);
    Ok(out)
}

/// Noise level from residuals `y - beta_ref' x` on complete rows: a trimmed
/// mean of squared residuals (trim `min(3 eta, cap)`), rescaled so that it is
/// unbiased for Gaussian residuals, then square-rooted.
pub fn sigma_hat_residual(data: &[MaskedSample], beta_ref: &[f64], eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let d = dim_of(data)?;
    if beta_ref.len() != d {
        return Err(invalid("reference regressor has the wrong length"));
    }
    let mut res: Vec<f64> = complete_rows(data)
        .iter()
        .map(|(x, y)| residual(x, *y, beta_ref))
        .collect();
    if res.is_empty() {
        return Err(invalid("no complete samples"));
    }
    Ok(robust_variance(&mut res, a2_trim(eta, DEFAULT_TRIM_CAP)).sqrt())
}

/// Picks among A1, A2 and zero.
///
/// * `e1 = (eta d + sqrt(d/m1)) sigma_hat` over the `m1` complete rows
///   (A1's error scale),
/// * `e2 = (eta sqrt(d) + sqrt(d/m)) S` with `S^2` a trimmed estimate of
///   `E[y^2] = |beta|^2 + sigma^2` over the `m` observed labels.
///
/// Returns A1 if it is enabled and `c e1 < e2`, else A2 if
/// `|beta_2| > c' e2`, else zero.
pub fn unified_estimator(data: &[MaskedSample], eta: f64, cfg: &MetaConfig) -> Result<EstimatorOutput> {
    cfg.validate()?;
    check_eta(eta)?;
    let d = dim_of(data)?;
    let df = d as f64;
    let a1 = if eta * (df + 1.0) < A1_MAX_CORRUPTION {
        match estimator_a1(data, eta) {
            Ok(o) => Some(o),
            Err(Error::Singular(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let a2 = a2_with_cap(data, eta, cfg.trim_fraction)?;
    let beta_ref = a1.as_ref().map_or(&a2.beta_hat, |o| &o.beta_hat);
    let sigma_hat = sigma_hat_residual(data, beta_ref, eta).ok();

    let mut labels: Vec<f64> = data.iter().filter_map(|s| s.y).collect();
    if labels.is_empty() {
        return Err(invalid("no observed labels"));
    }
    let m = labels.len() as f64;
    let scale = robust_variance(&mut labels, a2_trim(eta, cfg.trim_fraction)).sqrt();
    let e2 = (eta * df.sqrt() + (df / m).sqrt()) * scale;
    let complete = a1
        .as_ref()
        .and_then(|o| o.diagnostics.get("complete_rows").copied())
        .unwrap_or(0.0);
    let e1 = sigma_hat
        .filter(|_| complete > 0.0)
        .map(|s| (eta * df + (df / complete).sqrt()) * s);
    let norm2 = norm(&a2.beta_hat);

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("e2".to_string(), e2);
    diagnostics.insert("label_scale".to_string(), scale);
    diagnostics.insert("a2_norm".to_string(), norm2);
    diagnostics.insert("a1_enabled".to_string(), f64::from(u8::from(a1.is_some())));
    if let Some(e1) = e1 {
        diagnostics.insert("e1".to_string(), e1);
    }

    let (beta_hat, branch) = match (a1, e1) {
        (Some(a1), Some(e1)) if cfg.c * e1 < e2 => (a1.beta_hat, Branch::A1),
        _ if norm2 > cfg.c_prime * e2 => (a2.beta_hat, Branch::A2),
        _ => (vec![0.0; d], Branch::A3),
    };
    Ok(EstimatorOutput {
        beta_hat,
        chosen_branch: branch,
        sigma_hat,
        diagnostics,
    })
}

/// Euclidean distance between an estimate and the truth.
pub fn estimation_error(beta_hat: &[f64], beta: &[f64]) -> Result<f64> {
    if beta_hat.len() != beta.len() {
        return Err(invalid(format!(
            "length mismatch: {} vs {}",
            beta_hat.len(),
            beta.len()
        )));
    }
    Ok(crate::model::distance(beta_hat, beta))
}
