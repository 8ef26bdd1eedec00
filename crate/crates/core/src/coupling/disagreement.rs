//! Monte Carlo estimates of coordinate disagreements under a coupling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::regime::{permute_within_blocks, CouplingSpec, RegimeCoupler};
use crate::error::{invalid, Result};
use crate::rng::RngStream;

pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementStats {
    pub mean_coord_disagreements: f64,
    pub label_disagreement_rate: f64,
    pub per_coordinate_rates: Vec<f64>,
    pub trials: usize,
    /// Standard error of `mean_coord_disagreements`.
    pub std_error: f64,
    /// Small-eta only: rate of the `y2 != y2'` event and its standard error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_event_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_event_std_error: Option<f64>,
}

impl DisagreementStats {
    /// Raw per-coordinate disagreement counts.
    pub fn per_coordinate_counts(&self) -> Vec<u64> {
        self.per_coordinate_rates
            .iter()
            .map(|r| (r * self.trials as f64).round() as u64)
            .collect()
    }
}

#[derive(Clone)]
struct Tally {
    per_coord: Vec<u64>,
    total: u64,
    total_sq: u64,
    labels: u64,
    aux: u64,
    has_aux: bool,
}

impl Tally {
    fn new(d: usize) -> Self {
        Self {
            per_coord: vec![0; d],
            total: 0,
            total_sq: 0,
            labels: 0,
            aux: 0,
            has_aux: false,
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.per_coord.iter_mut().zip(&other.per_coord) {
            *a += b;
        }
        self.total += other.total;
        self.total_sq += other.total_sq;
        self.labels += other.labels;
        self.aux += other.aux;
        self.has_aux |= other.has_aux;
        self
    }
}

/// Trials per parallel work item. Counts are integers, so the reduction is
/// exact and independent of scheduling.
const CHUNK: usize = 256;

fn run(spec: &CouplingSpec, trials: usize, rng: &RngStream, permute: bool) -> Result<DisagreementStats> {
    if trials < MIN_TRIALS {
        return Err(invalid(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    let coupler = RegimeCoupler::new(*spec)?;
    let d = spec.d();
    let blocks = spec.blocks();
    let chunks = trials.div_ceil(CHUNK);
    let tally = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut t = Tally::new(d);
            for i in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut r = rng.child(i as u64);
                let mut draw = coupler.draw_detailed(&mut r);
                if permute {
                    permute_within_blocks(&mut draw.pair, &blocks, &mut r);
                }
                let mut count = 0u64;
                for (j, (a, b)) in draw.pair.sample0.x.iter().zip(&draw.pair.sample1.x).enumerate() {
                    if a != b {
                        t.per_coord[j] += 1;
                        count += 1;
                    }
                }
                t.total += count;
                t.total_sq += count * count;
                t.labels += u64::from(draw.pair.label_disagrees());
                if let Some(flag) = draw.aux_event {
                    t.has_aux = true;
                    t.aux += u64::from(flag);
                }
            }
            t
        })
        .reduce(|| Tally::new(d), Tally::merge);

    let n = trials as f64;
    let mean = tally.total as f64 / n;
    let var = (tally.total_sq as f64 - n * mean * mean).max(0.0) / (n - 1.0);
    let (aux_event_rate, aux_event_std_error) = if tally.has_aux {
        let p = tally.aux as f64 / n;
        (Some(p), Some((p * (1.0 - p) / n).sqrt()))
    } else {
        (None, None)
    };
    Ok(DisagreementStats {
        mean_coord_disagreements: mean,
        label_disagreement_rate: tally.labels as f64 / n,
        per_coordinate_rates: tally.per_coord.iter().map(|&c| c as f64 / n).collect(),
        trials,
        std_error: (var / n).sqrt(),
        aux_event_rate,
        aux_event_std_error,
    })
}

/// Draws `trials` coupled pairs (trial `i` from `rng.child(i)`) and tallies
/// disagreements.
pub fn estimate_disagreements(
    spec: &CouplingSpec,
    trials: usize,
    rng: &RngStream,
) -> Result<DisagreementStats> {
    run(spec, trials, rng, false)
}

/// As [`estimate_disagreements`], with every draw permuted uniformly within
/// the spec's constant-coefficient blocks (what the adversary sees).
pub fn estimate_disagreements_permuted(
    spec: &CouplingSpec,
    trials: usize,
    rng: &RngStream,
) -> Result<DisagreementStats> {
    run(spec, trials, rng, true)
}
