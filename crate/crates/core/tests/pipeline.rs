//! End-to-end runs through the public API: sample, corrupt, estimate.

use advreg_core::adversary::{coupling_adversary, oblivious_erasure, sign_flip_replacement};
use advreg_core::coupling::RegimeCoupler;
use advreg_core::estimators::estimation_error;
use advreg_core::model::sample_clean;
use advreg_core::{
    AdversaryConfig, AdversaryMode, CouplingSpec, EstimatorKind, MetaConfig, RegressionInstance,
    RngStream,
};
use proptest::prelude::*;

#[test]
fn a2_recovers_beta_under_sign_flips() {
    let inst = RegressionInstance::new(vec![0.5; 8], 1.0).unwrap();
    let mut rng = RngStream::new(11);
    let clean = sample_clean(&inst, 40_000, &mut rng).unwrap();
    let data = sign_flip_replacement(&clean, 0.01).unwrap();
    let out = EstimatorKind::A2.run(&data, 0.01, &MetaConfig::default()).unwrap();
    let err = estimation_error(&out.beta_hat, &inst.beta).unwrap();
    // rate (eta sqrt(d) + sqrt(d/n)) sqrt(|beta|^2 + sigma^2), constant 10
    let rate = (0.01 * 8f64.sqrt() + (8.0f64 / 40_000.0).sqrt()) * 3f64.sqrt();
    assert!(err < 10.0 * rate, "error {err} vs rate {rate}");
}

#[test]
fn a1_is_accurate_on_erased_noisy_data() {
    let inst = RegressionInstance::new(vec![10.0; 5], 0.5).unwrap();
    let mut rng = RngStream::new(12);
    let clean = sample_clean(&inst, 20_000, &mut rng).unwrap();
    let data = oblivious_erasure(&clean, 0.005, &mut rng).unwrap();
    let out = EstimatorKind::A1.run(&data, 0.005, &MetaConfig::default()).unwrap();
    let err = estimation_error(&out.beta_hat, &inst.beta).unwrap();
    assert!(err < 0.1, "error {err}");
}

#[test]
fn coupling_adversary_output_is_identical_in_replace_mode() {
    let spec = CouplingSpec::BigEta { d: 30, s: 1.0, sigma: 0.0 };
    let cfg = AdversaryConfig::new(0.45, 0.1, AdversaryMode::Replace).unwrap();
    let pair = coupling_adversary(&spec, 500, &cfg, &mut RngStream::new(13)).unwrap();
    assert!(pair.success);
    assert_eq!(pair.dataset0, pair.dataset1);
    assert!(pair.dataset0.iter().all(|s| s.is_complete()));
}

#[test]
fn seeds_reproduce_datasets() {
    let inst = RegressionInstance::new(vec![1.0, -2.0], 1.0).unwrap();
    let a = sample_clean(&inst, 100, &mut RngStream::new(5)).unwrap();
    let b = sample_clean(&inst, 100, &mut RngStream::new(5)).unwrap();
    let c = sample_clean(&inst, 100, &mut RngStream::new(6)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn erasure_never_exceeds_budget(seed in any::<u64>(), eta in 0.0f64..0.2, d in 1usize..6) {
        let inst = RegressionInstance::new(vec![1.0; d], 1.0).unwrap();
        let mut rng = RngStream::new(seed);
        let clean = sample_clean(&inst, 200, &mut rng).unwrap();
        let data = oblivious_erasure(&clean, eta, &mut rng).unwrap();
        let cap = (eta * 200.0).floor() as usize;
        for j in 0..d {
            let erased = data.iter().filter(|s| s.x[j].is_none()).count();
            prop_assert!(erased <= cap);
        }
        prop_assert!(data.iter().filter(|s| s.y.is_none()).count() <= cap);
    }

    #[test]
    fn a3_is_always_zero(seed in any::<u64>(), d in 1usize..8) {
        let inst = RegressionInstance::new(vec![3.0; d], 1.0).unwrap();
        let clean = sample_clean(&inst, 10, &mut RngStream::new(seed)).unwrap();
        let data = sign_flip_replacement(&clean, 0.1).unwrap();
        let out = EstimatorKind::A3.run(&data, 0.1, &MetaConfig::default()).unwrap();
        prop_assert_eq!(out.beta_hat, vec![0.0; d]);
    }

    #[test]
    fn big_eta_pairs_share_labels(seed in any::<u64>(), d in 2usize..40) {
        let coupler = RegimeCoupler::new(CouplingSpec::BigEta { d, s: 1.0, sigma: 0.0 }).unwrap();
        let pair = coupler.draw(&mut RngStream::new(seed));
        prop_assert!(!pair.label_disagrees());
        prop_assert_eq!(pair.sample0.x.len(), d);
    }
}
