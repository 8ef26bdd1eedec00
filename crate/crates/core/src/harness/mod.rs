//! Experiment runners: coupling verification, forced-error demonstrations,
//! regime tables, upper-bound checks and constant calibration.
//!
//! Every runner splits its randomness as `RngStream::new(seed).child(i)` per
//! trial (or per chunk of trials) and collects results in index order, so
//! reports are byte-identical for any number of worker threads.

pub mod calibrate;
pub mod constants;
pub mod forced;
pub mod table;
pub mod upper;
pub mod verify;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::RngStream;

pub use calibrate::{calibrate_constants, CalibrationConfig, CalibrationReport};
pub use forced::{run_forced_error_demo, ForcedErrorConfig, ForcedErrorReport};
pub use table::{run_regime_table, ExperimentConfig, GridRow, RegimeTable, ResultRecord};
pub use upper::{run_upper_bound_checks, UpperBoundConfig, UpperBoundReport};
pub use verify::{run_coupling_verification, VerificationReport, VerifyConfig};

/// One named pass/fail measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes when `value <= threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
            detail: None,
        }
    }

    /// Passes when `value >= threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value >= threshold,
            value,
            threshold,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

/// Runs `f(i, stream_i)` for `i in 0..count` with `stream_i = root.child(i)`
/// and returns the results in index order.
pub fn par_indexed<T, F>(count: usize, root: &RngStream, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, RngStream) -> T + Sync + Send,
{
    (0..count)
        .into_par_iter()
        .map(|i| f(i, root.child(i as u64)))
        .collect()
}
