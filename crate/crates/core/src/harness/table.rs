//! Regime table: which of A1/A2/A3 wins where, and whether the unified
//! estimator keeps up.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{oblivious_erasure, sign_flip_replacement};
use crate::error::{invalid, Error, Result};
use crate::estimators::{
    estimation_error, Branch, EstimatorKind, MetaConfig, A1_MAX_CORRUPTION,
};
use crate::model::{sample_clean, LabeledSample, MaskedSample, RegressionInstance};
use crate::rng::RngStream;
use crate::stats::{iqr, median};

/// Lower edge of the medium-eta row, `0.49/d`.
pub fn small_eta_limit(d: usize) -> f64 {
    0.49 / d as f64
}

/// Lower edge of the big-eta row, `4/sqrt(d)`.
pub fn big_eta_limit(d: usize) -> f64 {
    4.0 / (d as f64).sqrt()
}

/// Required distance (as a factor) from every boundary for a cell to count
/// as interior.
pub const INTERIOR_FACTOR: f64 = 4.0;

/// Allowed slack of the predicted winner over the best of three.
pub const WINNER_BAND: f64 = 2.0;

/// Allowed slack of the unified estimator over the best of three.
pub const UNIFIED_BAND: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaRow {
    SmallEta,
    MediumEta,
    BigEta,
}

impl EtaRow {
    pub fn of(eta: f64, d: usize) -> Self {
        if eta >= big_eta_limit(d) {
            EtaRow::BigEta
        } else if eta >= small_eta_limit(d) {
            EtaRow::MediumEta
        } else {
            EtaRow::SmallEta
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            EtaRow::SmallEta => "small-eta",
            EtaRow::MediumEta => "medium-eta",
            EtaRow::BigEta => "big-eta",
        }
    }
}

/// Best algorithm of the three according to the regime tables.
pub fn predicted_winner(eta: f64, d: usize, beta_norm: f64, sigma: f64) -> Branch {
    let sd = (d as f64).sqrt();
    match EtaRow::of(eta, d) {
        EtaRow::BigEta => Branch::A3,
        _ if beta_norm < eta * sd * sigma => Branch::A3,
        EtaRow::SmallEta if beta_norm >= sd * sigma => Branch::A1,
        _ => Branch::A2,
    }
}

/// Lower-bound rate of the cell, without constants.
pub fn lower_bound_rate(eta: f64, d: usize, beta_norm: f64, sigma: f64) -> f64 {
    let df = d as f64;
    let sd = df.sqrt();
    match EtaRow::of(eta, d) {
        EtaRow::BigEta => beta_norm,
        _ if beta_norm < eta * sd * sigma => beta_norm,
        _ if beta_norm < sigma => eta * sd * sigma,
        EtaRow::SmallEta if beta_norm >= sd * sigma => eta * df * sigma,
        _ => eta * sd * beta_norm,
    }
}

/// Upper-bound rate of one estimator, without constants. A1 is infinite
/// where it is not defined; the unified estimator gets the best of the
/// three.
pub fn upper_bound_rate(kind: EstimatorKind, eta: f64, d: usize, beta_norm: f64, sigma: f64) -> f64 {
    let df = d as f64;
    let a1 = if eta * (df + 1.0) < A1_MAX_CORRUPTION {
        eta * df * sigma
    } else {
        f64::INFINITY
    };
    let a2 = eta * df.sqrt() * (beta_norm * beta_norm + sigma * sigma).sqrt();
    let a3 = beta_norm;
    match kind {
        EstimatorKind::A1 => a1,
        EstimatorKind::A2 => a2,
        EstimatorKind::A3 => a3,
        EstimatorKind::Unified => a1.min(a2).min(a3),
        EstimatorKind::Ols => f64::INFINITY,
    }
}

fn far(a: f64, b: f64) -> bool {
    a >= INTERIOR_FACTOR * b || b >= INTERIOR_FACTOR * a
}

/// At least [`INTERIOR_FACTOR`] away from every eta and `|beta|` boundary
/// of the tables.
pub fn is_interior(eta: f64, d: usize, beta_norm: f64, sigma: f64) -> bool {
    let sd = (d as f64).sqrt();
    if !far(eta, small_eta_limit(d)) || !far(eta, big_eta_limit(d)) {
        return false;
    }
    match EtaRow::of(eta, d) {
        EtaRow::BigEta => true,
        EtaRow::MediumEta => far(beta_norm, eta * sd * sigma) && far(beta_norm, sigma),
        EtaRow::SmallEta => {
            far(beta_norm, eta * sd * sigma) && far(beta_norm, sigma) && far(beta_norm, sd * sigma)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub d: usize,
    pub eta: f64,
    pub n: usize,
    /// `|beta| / sigma` of each cell in the row.
    pub beta_ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub rows: Vec<GridRow>,
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub meta: MetaConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(invalid("grid has no rows"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(invalid("sigma must be positive"));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        self.meta.validate()?;
        for row in &self.rows {
            if row.d == 0 || row.n < 2 {
                return Err(invalid("every row needs d >= 1 and n >= 2"));
            }
            if !(0.0..1.0).contains(&row.eta) {
                return Err(invalid(format!("eta must lie in [0, 1), got {}", row.eta)));
            }
            if row.beta_ratios.is_empty()
                || row.beta_ratios.iter().any(|r| !(*r >= 0.0) || !r.is_finite())
            {
                return Err(invalid("beta ratios must be finite and >= 0"));
            }
        }
        Ok(())
    }

    fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for row in &self.rows {
            for &ratio in &row.beta_ratios {
                out.push(Cell {
                    d: row.d,
                    eta: row.eta,
                    n: row.n,
                    beta_norm: ratio * self.sigma,
                    sigma: self.sigma,
                });
            }
        }
        out
    }

    /// The grid used by the acceptance suite: one row per eta regime.
    pub fn acceptance() -> Self {
        let ratios = vec![0.002, 0.9, 3.0, 100.0];
        Self {
            rows: vec![
                GridRow {
                    d: 400,
                    eta: 0.8,
                    n: 5000,
                    beta_ratios: ratios.clone(),
                },
                GridRow {
                    d: 100,
                    eta: 0.02,
                    n: 50_000,
                    beta_ratios: ratios.clone(),
                },
                GridRow {
                    d: 10,
                    eta: 0.01,
                    n: 100_000,
                    beta_ratios: ratios,
                },
            ],
            sigma: 1.0,
            trials: 5,
            seed: 20_240_601,
            meta: MetaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    d: usize,
    eta: f64,
    n: usize,
    beta_norm: f64,
    sigma: f64,
}

impl Cell {
    fn beta(&self) -> Vec<f64> {
        vec![self.beta_norm / (self.d as f64).sqrt(); self.d]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryKind {
    ObliviousErasure,
    SignFlipReplacement,
}

impl AdversaryKind {
    pub const ALL: [AdversaryKind; 2] = [
        AdversaryKind::ObliviousErasure,
        AdversaryKind::SignFlipReplacement,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            AdversaryKind::ObliviousErasure => "oblivious-erasure",
            AdversaryKind::SignFlipReplacement => "sign-flip-replacement",
        }
    }

    pub fn apply(
        self,
        data: &[LabeledSample],
        eta: f64,
        rng: &mut RngStream,
    ) -> Result<Vec<MaskedSample>> {
        match self {
            AdversaryKind::ObliviousErasure => oblivious_erasure(data, eta, rng),
            AdversaryKind::SignFlipReplacement => sign_flip_replacement(data, eta),
        }
    }
}

/// Estimators compared in every cell, in CSV order.
pub const TABLE_ESTIMATORS: [EstimatorKind; 4] = [
    EstimatorKind::A1,
    EstimatorKind::A2,
    EstimatorKind::A3,
    EstimatorKind::Unified,
];

/// One CSV row: a (cell, estimator, adversary) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub regime: String,
    pub d: usize,
    pub eta: f64,
    pub beta_norm: f64,
    pub sigma: f64,
    pub n: usize,
    pub seed: u64,
    pub estimator: String,
    pub adversary: String,
    pub error_median: f64,
    pub error_iqr: f64,
    pub bound_upper: f64,
    pub bound_lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub index: usize,
    pub d: usize,
    pub eta: f64,
    pub n: usize,
    pub beta_norm: f64,
    pub predicted: Branch,
    pub interior: bool,
    /// Worst median error over the two adversaries, per estimator tag.
    pub errors: BTreeMap<String, f64>,
    pub best: Branch,
    pub best_error: f64,
    /// `None` on boundary cells.
    pub winner_ok: Option<bool>,
    pub unified_ratio: f64,
    pub unified_ok: bool,
    /// How often the unified estimator took each branch, over all trials
    /// and both adversaries.
    pub unified_branches: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeTable {
    pub records: Vec<ResultRecord>,
    pub cells: Vec<CellSummary>,
    pub passed: bool,
}

impl RegimeTable {
    /// CSV with the fixed header, one row per record.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Errors of one trial, `[adversary][estimator]`; `None` where the
/// estimator is not defined for the cell.
struct TrialErrors {
    errors: [[Option<f64>; 4]; 2],
    unified_branch: [Branch; 2],
}

fn run_trial(cell: &Cell, meta: &MetaConfig, mut rng: RngStream) -> Result<TrialErrors> {
    let beta = cell.beta();
    let inst = RegressionInstance::new(beta.clone(), cell.sigma)?;
    let clean = sample_clean(&inst, cell.n, &mut rng)?;
    let mut errors = [[None; 4]; 2];
    let mut unified_branch = [Branch::A3; 2];
    for (a, adv) in AdversaryKind::ALL.into_iter().enumerate() {
        let data = adv.apply(&clean, cell.eta, &mut rng)?;
        for (e, kind) in TABLE_ESTIMATORS.into_iter().enumerate() {
            match kind.run(&data, cell.eta, meta) {
                Ok(out) => {
                    errors[a][e] = Some(estimation_error(&out.beta_hat, &beta)?);
                    if kind == EstimatorKind::Unified {
                        unified_branch[a] = out.chosen_branch;
                    }
                }
                Err(Error::Regime(_)) | Err(Error::Singular(_)) => {}
                Err(err) => return Err(err),
            }
        }
    }
    Ok(TrialErrors {
        errors,
        unified_branch,
    })
}

fn branch_of(kind: EstimatorKind) -> Branch {
    match kind {
        EstimatorKind::A1 => Branch::A1,
        EstimatorKind::A2 => Branch::A2,
        EstimatorKind::A3 => Branch::A3,
        EstimatorKind::Unified | EstimatorKind::Ols => unreachable!("not one of the three"),
    }
}

/// Runs every (cell, trial) pair in parallel; trial `t` of cell `k` uses
/// `RngStream::new(seed).child(k).child(t)`.
pub fn run_regime_table(cfg: &ExperimentConfig) -> Result<RegimeTable> {
    cfg.validate()?;
    let cells = cfg.cells();
    let root = RngStream::new(cfg.seed);
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|k| (0..cfg.trials).map(move |t| (k, t)))
        .collect();
    let results: Vec<TrialErrors> = jobs
        .par_iter()
        .map(|&(k, t)| run_trial(&cells[k], &cfg.meta, root.child(k as u64).child(t as u64)))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for (k, cell) in cells.iter().enumerate() {
        let trials = &results[k * cfg.trials..(k + 1) * cfg.trials];
        let predicted = predicted_winner(cell.eta, cell.d, cell.beta_norm, cell.sigma);
        let regime = format!(
            "{}:{}",
            EtaRow::of(cell.eta, cell.d).tag(),
            predicted.tag()
        );
        let lower = lower_bound_rate(cell.eta, cell.d, cell.beta_norm, cell.sigma);
        let mut worst: BTreeMap<String, f64> = BTreeMap::new();
        for (e, kind) in TABLE_ESTIMATORS.into_iter().enumerate() {
            for (a, adv) in AdversaryKind::ALL.into_iter().enumerate() {
                let errs: Vec<f64> = trials.iter().filter_map(|t| t.errors[a][e]).collect();
                if errs.is_empty() {
                    continue;
                }
                let med = median(&errs);
                let entry = worst.entry(kind.tag().to_string()).or_insert(0.0);
                *entry = entry.max(med);
                records.push(ResultRecord {
                    regime: regime.clone(),
                    d: cell.d,
                    eta: cell.eta,
                    beta_norm: cell.beta_norm,
                    sigma: cell.sigma,
                    n: cell.n,
                    seed: cfg.seed,
                    estimator: kind.tag().to_string(),
                    adversary: adv.tag().to_string(),
                    error_median: med,
                    error_iqr: iqr(&errs),
                    bound_upper: upper_bound_rate(kind, cell.eta, cell.d, cell.beta_norm, cell.sigma),
                    bound_lower: lower,
                });
            }
        }
        let (best, best_error) = TABLE_ESTIMATORS[..3]
            .iter()
            .filter_map(|&kind| worst.get(kind.tag()).map(|&e| (branch_of(kind), e)))
            .fold((Branch::A3, f64::INFINITY), |acc, (b, e)| {
                if e < acc.1 {
                    (b, e)
                } else {
                    acc
                }
            });
        let interior = is_interior(cell.eta, cell.d, cell.beta_norm, cell.sigma);
        let predicted_error = worst
            .get(predicted.tag())
            .copied()
            .unwrap_or(f64::INFINITY);
        let winner_ok = interior.then(|| predicted_error <= WINNER_BAND * best_error);
        let unified_error = worst
            .get(EstimatorKind::Unified.tag())
            .copied()
            .unwrap_or(f64::INFINITY);
        let unified_ratio = if best_error > 0.0 {
            unified_error / best_error
        } else if unified_error == 0.0 {
            1.0
        } else {
            f64::INFINITY
        };
        let mut unified_branches = BTreeMap::new();
        for t in trials {
            for b in t.unified_branch {
                *unified_branches.entry(b.tag().to_string()).or_insert(0) += 1;
            }
        }
        summaries.push(CellSummary {
            index: k,
            d: cell.d,
            eta: cell.eta,
            n: cell.n,
            beta_norm: cell.beta_norm,
            predicted,
            interior,
            errors: worst,
            best,
            best_error,
            winner_ok,
            unified_ratio,
            unified_ok: unified_ratio <= UNIFIED_BAND,
            unified_branches,
        });
    }
    let passed = summaries
        .iter()
        .all(|s| s.unified_ok && s.winner_ok != Some(false));
    Ok(RegimeTable {
        records,
        cells: summaries,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicted_winners_match_table_examples() {
        assert_eq!(predicted_winner(0.2, 400, 1.0, 1.0), Branch::A3);
        assert_eq!(predicted_winner(0.001, 100, 500.0, 1.0), Branch::A1);
        assert_eq!(predicted_winner(0.01, 100, 1.0, 1.0), Branch::A2);
        assert_eq!(predicted_winner(0.01, 100, 0.01, 1.0), Branch::A3);
    }

    #[test]
    fn lower_bounds_per_region() {
        let (d, s) = (100, 1.0);
        assert_eq!(lower_bound_rate(0.5, d, 7.0, s), 7.0);
        assert_eq!(lower_bound_rate(0.01, d, 0.05, s), 0.05);
        assert!((lower_bound_rate(0.01, d, 0.5, s) - 0.1).abs() < 1e-12);
        assert!((lower_bound_rate(0.01, d, 5.0, s) - 0.5).abs() < 1e-12);
        assert!((lower_bound_rate(0.001, d, 50.0, s) - 0.1).abs() < 1e-12);
        assert!((lower_bound_rate(0.001, d, 5.0, s) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn interior_cells_of_acceptance_grid() {
        let cfg = ExperimentConfig::acceptance();
        let flags: Vec<bool> = cfg
            .cells()
            .iter()
            .map(|c| is_interior(c.eta, c.d, c.beta_norm, c.sigma))
            .collect();
        assert_eq!(
            flags,
            vec![true, true, true, true, true, false, false, true, true, false, false, true]
        );
    }

    #[test]
    fn upper_rate_of_unified_is_the_minimum() {
        let u = upper_bound_rate(EstimatorKind::Unified, 0.001, 100, 500.0, 1.0);
        assert!((u - 0.1).abs() < 1e-12);
        assert!(upper_bound_rate(EstimatorKind::A1, 0.1, 100, 1.0, 1.0).is_infinite());
    }

    #[test]
    fn small_table_runs_and_has_fixed_header() {
        let cfg = ExperimentConfig {
            rows: vec![GridRow {
                d: 4,
                eta: 0.01,
                n: 2000,
                beta_ratios: vec![0.001, 50.0],
            }],
            sigma: 1.0,
            trials: 3,
            seed: 9,
            meta: MetaConfig::default(),
        };
        let table = run_regime_table(&cfg).unwrap();
        // 2 cells x 4 estimators x 2 adversaries
        assert_eq!(table.records.len(), 16);
        assert!(table.records.iter().all(|r| r.error_median >= 0.0));
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "regime,d,eta,beta_norm,sigma,n,seed,estimator,adversary,error_median,error_iqr,bound_upper,bound_lower"
        );
        let a3 = table
            .records
            .iter()
            .find(|r| r.estimator == "A3")
            .unwrap();
        assert_eq!(a3.error_median, a3.beta_norm);
    }

    #[test]
    fn table_is_thread_count_invariant() {
        let cfg = ExperimentConfig {
            rows: vec![GridRow {
                d: 6,
                eta: 0.02,
                n: 500,
                beta_ratios: vec![0.5, 5.0],
            }],
            sigma: 1.0,
            trials: 4,
            seed: 10,
            meta: MetaConfig::default(),
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    let t = run_regime_table(&cfg).unwrap();
                    let mut buf = Vec::new();
                    t.write_csv(&mut buf).unwrap();
                    buf
                })
        };
        assert_eq!(run(1), run(4));
    }
}
