//! Adversaries with a per-column budget of `floor(eta n)` edits.
//!
//! [`coupling_adversary`] is the budgeted adversary that makes the datasets
//! of two hypotheses identical by editing the coordinates on which a coupling
//! disagrees. The other two are stress adversaries for estimator benches.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coupling::{permute_within_blocks, CouplingSpec, RegimeCoupler};
use crate::error::{invalid, Result};
use crate::model::{write_jsonl, LabeledSample, MaskedSample};
use crate::rng::RngStream;

/// `floor(eta n)`, robust to `eta n` landing a hair below an integer.
pub fn budget(eta: f64, n: usize) -> usize {
    (eta * n as f64 + 1e-9).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdversaryMode {
    Erase,
    Replace,
}

impl std::str::FromStr for AdversaryMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erase" => Ok(AdversaryMode::Erase),
            "replace" => Ok(AdversaryMode::Replace),
            other => Err(invalid(format!("unknown adversary mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub eta: f64,
    /// Slack `c` in the premise `E[disagreements] <= eta d (1 - c)`.
    pub slack_c: f64,
    pub mode: AdversaryMode,
}

impl AdversaryConfig {
    pub fn new(eta: f64, slack_c: f64, mode: AdversaryMode) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(invalid(format!("eta must lie in [0, 1], got {eta}")));
        }
        if !(slack_c > 0.0 && slack_c < 1.0) {
            return Err(invalid(format!("slack c must lie in (0, 1), got {slack_c}")));
        }
        Ok(Self { eta, slack_c, mode })
    }

    /// Expected disagreements per sample the adversary can absorb with high
    /// probability: `eta d (1 - c)`.
    pub fn disagreement_allowance(&self, d: usize) -> f64 {
        self.eta * d as f64 * (1.0 - self.slack_c)
    }
}

/// Remaining edits per covariate column and for the label column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetState {
    pub per_coordinate_remaining: Vec<usize>,
    pub label_remaining: usize,
}

impl BudgetState {
    pub fn new(d: usize, eta: f64, n: usize) -> Self {
        let b = budget(eta, n);
        Self {
            per_coordinate_remaining: vec![b; d],
            label_remaining: b,
        }
    }

    /// Spends one unit on column `j` (`j == d` is the label). Returns `false`
    /// when the column is exhausted.
    fn spend(&mut self, j: usize) -> bool {
        let slot = if j == self.per_coordinate_remaining.len() {
            &mut self.label_remaining
        } else {
            &mut self.per_coordinate_remaining[j]
        };
        if *slot == 0 {
            false
        } else {
            *slot -= 1;
            true
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedMaskedDataset {
    pub dataset0: Vec<MaskedSample>,
    pub dataset1: Vec<MaskedSample>,
    pub success: bool,
    pub budget_final: BudgetState,
    /// Edits per column, label last.
    pub edits_per_coordinate: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryManifest {
    pub success: bool,
    pub eta: f64,
    pub n: usize,
    pub seed: u64,
    pub edits_per_coordinate: Vec<usize>,
}

impl PairedMaskedDataset {
    pub fn identical(&self) -> bool {
        self.dataset0.len() == self.dataset1.len()
            && self.dataset0.iter().zip(&self.dataset1).all(|(a, b)| {
                a.y.map(f64::to_bits) == b.y.map(f64::to_bits)
                    && a.x.len() == b.x.len()
                    && a.x
                        .iter()
                        .zip(&b.x)
                        .all(|(p, q)| p.map(f64::to_bits) == q.map(f64::to_bits))
            })
    }

    pub fn erased_entries(&self) -> usize {
        self.dataset0
            .iter()
            .chain(&self.dataset1)
            .map(MaskedSample::erased_count)
            .sum()
    }

    pub fn max_edits(&self) -> usize {
        self.edits_per_coordinate.iter().copied().max().unwrap_or(0)
    }

    /// Writes `<stem>0.jsonl`, `<stem>1.jsonl` and `<stem>manifest.json`
    /// inside `dir`.
    pub fn write(&self, dir: &Path, stem: &str, eta: f64, seed: u64) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let open = |name: String| -> Result<std::io::BufWriter<std::fs::File>> {
            Ok(std::io::BufWriter::new(std::fs::File::create(dir.join(name))?))
        };
        write_jsonl(&self.dataset0, open(format!("{stem}0.jsonl"))?)?;
        write_jsonl(&self.dataset1, open(format!("{stem}1.jsonl"))?)?;
        let manifest = AdversaryManifest {
            success: self.success,
            eta,
            n: self.dataset0.len(),
            seed,
            edits_per_coordinate: self.edits_per_coordinate.clone(),
        };
        let mut out = open(format!("{stem}manifest.json"))?;
        serde_json::to_writer_pretty(&mut out, &manifest)?;
        std::io::Write::write_all(&mut out, b"\n")?;
        Ok(())
    }
}

/// Draws `n` coupled pairs, permutes each within its constant-coefficient
/// blocks, and edits every disagreeing entry while the column budget lasts.
///
/// Erase mode sets both sides to `None`; replace mode copies side 1's value
/// into side 0. `success` is `false` iff some disagreement met an exhausted
/// budget; such entries are left as drawn.
pub fn coupling_adversary(
    spec: &CouplingSpec,
    n: usize,
    cfg: &AdversaryConfig,
    rng: &mut RngStream,
) -> Result<PairedMaskedDataset> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let coupler = RegimeCoupler::new(*spec)?;
    let d = spec.d();
    let blocks = spec.blocks();
    let mut state = BudgetState::new(d, cfg.eta, n);
    let mut edits = vec![0usize; d + 1];
    let mut success = true;
    let mut dataset0 = Vec::with_capacity(n);
    let mut dataset1 = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pair = coupler.draw(rng);
        permute_within_blocks(&mut pair, &blocks, rng);
        let mut s0 = pair.sample0.to_masked();
        let mut s1 = pair.sample1.to_masked();
        for j in 0..=d {
            let (a, b) = if j == d {
                (&mut s0.y, &mut s1.y)
            } else {
                (&mut s0.x[j], &mut s1.x[j])
            };
            if a.map(f64::to_bits) == b.map(f64::to_bits) {
                continue;
            }
            if state.spend(j) {
                edits[j] += 1;
                match cfg.mode {
                    AdversaryMode::Erase => {
                        *a = None;
                        *b = None;
                    }
                    AdversaryMode::Replace => *a = *b,
                }
            } else {
                success = false;
            }
        }
        dataset0.push(s0);
        dataset1.push(s1);
    }
    let out = PairedMaskedDataset {
        dataset0,
        dataset1,
        success,
        budget_final: state,
        edits_per_coordinate: edits,
    };
    let cap = budget(cfg.eta, n);
    assert!(out.max_edits() <= cap, "column budget exceeded");
    debug_assert!(!out.success || out.identical());
    Ok(out)
}

/// Entries of each column (label last) that differ between `clean` and
/// `corrupted`, counting erasures.
pub fn column_edit_counts(clean: &[LabeledSample], corrupted: &[MaskedSample]) -> Vec<usize> {
    let d = clean.first().map_or(0, |s| s.x.len());
    let mut counts = vec![0usize; d + 1];
    for (c, m) in clean.iter().zip(corrupted) {
        for j in 0..d {
            if m.x[j].map(f64::to_bits) != Some(c.x[j].to_bits()) {
                counts[j] += 1;
            }
        }
        if m.y.map(f64::to_bits) != Some(c.y.to_bits()) {
            counts[d] += 1;
        }
    }
    counts
}

/// Erases every entry independently with probability `eta`, then restores
/// uniformly chosen erasures in any column that exceeds `floor(eta n)`.
pub fn oblivious_erasure(
    data: &[LabeledSample],
    eta: f64,
    rng: &mut RngStream,
) -> Result<Vec<MaskedSample>> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid(format!("eta must lie in [0, 1], got {eta}")));
    }
    let n = data.len();
    let mut out: Vec<MaskedSample> = data.iter().map(LabeledSample::to_masked).collect();
    if n == 0 || eta == 0.0 {
        return Ok(out);
    }
    let d = data[0].x.len();
    let mut erased: Vec<Vec<usize>> = vec![Vec::new(); d + 1];
    for (i, s) in out.iter_mut().enumerate() {
        for j in 0..d {
            if rng.uniform() < eta {
                s.x[j] = None;
                erased[j].push(i);
            }
        }
        if rng.uniform() < eta {
            s.y = None;
            erased[d].push(i);
        }
    }
    let cap = budget(eta, n);
    for (j, rows) in erased.iter_mut().enumerate() {
        if rows.len() <= cap {
            continue;
        }
        rng.shuffle(rows);
        for &i in &rows[cap..] {
            if j == d {
                out[i].y = Some(data[i].y);
            } else {
                out[i].x[j] = Some(data[i].x[j]);
            }
        }
    }
    Ok(out)
}

/// For each coordinate `j`, negates `x_j` on the `floor(eta n)` samples with
/// the largest `|y x_j|` (ties broken by sample index). Labels are untouched.
pub fn sign_flip_replacement(data: &[LabeledSample], eta: f64) -> Result<Vec<MaskedSample>> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid(format!("eta must lie in [0, 1], got {eta}")));
    }
    let n = data.len();
    let mut out: Vec<MaskedSample> = data.iter().map(LabeledSample::to_masked).collect();
    let k = budget(eta, n);
    if n == 0 || k == 0 {
        return Ok(out);
    }
    let d = data[0].x.len();
    let mut order: Vec<usize> = (0..n).collect();
    for j in 0..d {
        let score = |i: usize| (data[i].y * data[i].x[j]).abs();
        order.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
        for &i in &order[..k] {
            out[i].x[j] = Some(-data[i].x[j]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_clean, RegressionInstance};
    use proptest::prelude::*;

    fn cfg(eta: f64, mode: AdversaryMode) -> AdversaryConfig {
        AdversaryConfig::new(eta, 0.1, mode).unwrap()
    }

    #[test]
    fn budget_floor() {
        assert_eq!(budget(0.45, 1000), 450);
        assert_eq!(budget(0.1, 10), 1);
        assert_eq!(budget(0.29, 100), 29);
        assert_eq!(budget(0.0, 100), 0);
        assert_eq!(budget(1.0, 7), 7);
    }

    #[test]
    fn zero_separation_needs_no_edits() {
        let spec = CouplingSpec::SmallBeta { d: 10, b: 0.0, sigma: 1.0, r: 0.0 };
        let out =
            coupling_adversary(&spec, 200, &cfg(0.1, AdversaryMode::Erase), &mut RngStream::new(1))
                .unwrap();
        assert!(out.success);
        assert_eq!(out.max_edits(), 0);
        assert!(out.identical());
        assert_eq!(out.erased_entries(), 0);
    }

    #[test]
    fn big_eta_succeeds_and_respects_budget() {
        let spec = CouplingSpec::BigEta { d: 100, s: 1.0, sigma: 0.0 };
        let c = cfg(0.45, AdversaryMode::Erase);
        let mut ok = 0;
        for seed in 0..10 {
            let out = coupling_adversary(&spec, 1000, &c, &mut RngStream::new(seed)).unwrap();
            assert!(out.max_edits() <= 450);
            if out.success {
                ok += 1;
                assert!(out.identical());
            }
        }
        assert!(ok >= 9);
    }

    #[test]
    fn replace_mode_success_has_no_erasures() {
        let spec = CouplingSpec::BigEta { d: 20, s: 1.0, sigma: 0.0 };
        let out = coupling_adversary(
            &spec,
            500,
            &cfg(0.45, AdversaryMode::Replace),
            &mut RngStream::new(2),
        )
        .unwrap();
        assert!(out.success);
        assert!(out.identical());
        assert_eq!(out.erased_entries(), 0);
    }

    #[test]
    fn tiny_budget_fails() {
        let spec = CouplingSpec::BigEta { d: 20, s: 1.0, sigma: 0.0 };
        let out = coupling_adversary(
            &spec,
            500,
            &cfg(0.01, AdversaryMode::Erase),
            &mut RngStream::new(3),
        )
        .unwrap();
        assert!(!out.success);
        assert!(out.max_edits() <= 5);
        assert!(!out.identical());
    }

    #[test]
    fn label_budget_untouched() {
        let spec = CouplingSpec::IntermEta { d: 20, s: 1.0, eps: 0.3, sigma: 0.0 };
        let out = coupling_adversary(
            &spec,
            300,
            &cfg(0.3, AdversaryMode::Erase),
            &mut RngStream::new(4),
        )
        .unwrap();
        assert_eq!(out.budget_final.label_remaining, 90);
        assert_eq!(out.edits_per_coordinate[20], 0);
    }

    #[test]
    fn oblivious_examples() {
        let inst = RegressionInstance::new(vec![1.0, -1.0, 0.5], 1.0).unwrap();
        let data = sample_clean(&inst, 10_000, &mut RngStream::new(5)).unwrap();
        let same = oblivious_erasure(&data, 0.0, &mut RngStream::new(6)).unwrap();
        assert_eq!(same, crate::model::to_masked(&data));
        let all = oblivious_erasure(&data, 1.0, &mut RngStream::new(6)).unwrap();
        assert!(all.iter().all(|s| s.y.is_none() && s.x.iter().all(Option::is_none)));
        let some = oblivious_erasure(&data, 0.1, &mut RngStream::new(6)).unwrap();
        let counts = column_edit_counts(&data, &some);
        assert!(counts.iter().all(|&c| c <= 1000), "{counts:?}");
        assert!(counts.iter().all(|&c| c > 900), "{counts:?}");
    }

    #[test]
    fn sign_flip_examples() {
        let inst = RegressionInstance::new(vec![1.0], 0.5).unwrap();
        let data = sample_clean(&inst, 10, &mut RngStream::new(7)).unwrap();
        assert_eq!(sign_flip_replacement(&data, 0.0).unwrap(), crate::model::to_masked(&data));
        for eta in [0.1, 0.25, 0.5] {
            let out = sign_flip_replacement(&data, eta).unwrap();
            let flipped = data
                .iter()
                .zip(&out)
                .filter(|(c, m)| m.x[0] == Some(-c.x[0]) && c.x[0] != 0.0)
                .count();
            assert_eq!(flipped, (10.0 * eta + 1e-9).floor() as usize);
            assert!(data.iter().zip(&out).all(|(c, m)| m.y == Some(c.y)));
        }
    }

    #[test]
    fn sign_flip_biases_cross_moment_down() {
        let d = 5;
        let inst = RegressionInstance::new(vec![0.5; d], 1.0).unwrap();
        let data = sample_clean(&inst, 10_000, &mut RngStream::new(8)).unwrap();
        let out = sign_flip_replacement(&data, 0.05).unwrap();
        for j in 0..d {
            let clean: f64 = data.iter().map(|s| s.y * s.x[j]).sum::<f64>();
            let attacked: f64 = out.iter().map(|s| s.y.unwrap() * s.x[j].unwrap()).sum::<f64>();
            assert!(attacked < clean);
        }
    }

    #[test]
    fn manifest_round_trip() {
        let spec = CouplingSpec::BigEta { d: 4, s: 1.0, sigma: 0.0 };
        let out =
            coupling_adversary(&spec, 50, &cfg(0.45, AdversaryMode::Erase), &mut RngStream::new(9))
                .unwrap();
        let dir = std::env::temp_dir().join(format!("advreg-manifest-{}", std::process::id()));
        out.write(&dir, "pair_", 0.45, 9).unwrap();
        let text = std::fs::read_to_string(dir.join("pair_manifest.json")).unwrap();
        let m: AdversaryManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(m.n, 50);
        assert_eq!(m.edits_per_coordinate, out.edits_per_coordinate);
        let back = crate::model::read_jsonl(std::io::BufReader::new(
            std::fs::File::open(dir.join("pair_0.jsonl")).unwrap(),
        ))
        .unwrap();
        assert_eq!(back, out.dataset0);
        std::fs::remove_dir_all(dir).ok();
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn hard_budget_for_every_adversary(seed in any::<u64>(), eta in 0.0f64..0.6, n in 1usize..300) {
            let inst = RegressionInstance::new(vec![1.0, 2.0, -0.5], 1.0).unwrap();
            let data = sample_clean(&inst, n, &mut RngStream::new(seed)).unwrap();
            let cap = budget(eta, n);
            let obl = oblivious_erasure(&data, eta, &mut RngStream::new(seed ^ 1)).unwrap();
            prop_assert!(column_edit_counts(&data, &obl).iter().all(|&c| c <= cap));
            let flip = sign_flip_replacement(&data, eta).unwrap();
            prop_assert!(column_edit_counts(&data, &flip).iter().all(|&c| c <= cap));
            let spec = CouplingSpec::IntermEta { d: 6, s: 1.0, eps: 0.5, sigma: 0.0 };
            for mode in [AdversaryMode::Erase, AdversaryMode::Replace] {
                let out = coupling_adversary(&spec, n, &cfg(eta, mode), &mut RngStream::new(seed)).unwrap();
                prop_assert!(out.max_edits() <= cap);
                if out.success {
                    prop_assert!(out.identical());
                }
            }
        }
    }
}
