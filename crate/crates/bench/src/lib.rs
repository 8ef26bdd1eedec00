//! Shared fixtures for the benchmarks in `benches/`.

use advreg_core::adversary::oblivious_erasure;
use advreg_core::model::sample_clean;
use advreg_core::{MaskedSample, RegressionInstance, RngStream};

/// `n` samples with `beta = (1, ..., 1)` and unit noise, erased at rate `eta`.
pub fn erased_dataset(d: usize, n: usize, eta: f64, seed: u64) -> Vec<MaskedSample> {
    let inst = RegressionInstance::new(vec![1.0; d], 1.0).expect("valid instance");
    let mut rng = RngStream::new(seed);
    let clean = sample_clean(&inst, n, &mut rng).expect("n > 0");
    oblivious_erasure(&clean, eta, &mut rng).expect("eta in range")
}
