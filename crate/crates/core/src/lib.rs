//! Gaussian linear regression when an adversary may erase or replace up to an
//! `eta` fraction of every covariate column and of the labels.
//!
//! The crate provides
//! * the estimators `A1` (robust least squares), `A2` (trimmed cross moments),
//!   `A3` (zero) and a unified selector among them ([`estimators`]);
//! * executable couplings behind the matching lower bounds ([`coupling`]) and
//!   the budgeted adversary that turns them into identical datasets
//!   ([`adversary`]);
//! * a harness that runs all of the above on parameter grids ([`harness`]).

pub mod adversary;
pub mod coupling;
pub mod error;
pub mod estimators;
pub mod gaussian;
pub mod harness;
pub mod model;
pub mod rng;
pub mod stats;

pub use adversary::{AdversaryConfig, AdversaryMode, BudgetState, PairedMaskedDataset};
pub use coupling::{CoupledPair, CouplingSpec, DisagreementStats};
pub use error::{Error, Result};
pub use estimators::{Branch, EstimatorKind, EstimatorOutput, MetaConfig};
pub use gaussian::{MultivariateGaussian, UnivariateGaussian};
pub use model::{HypothesisPair, LabeledSample, MaskedSample, RegressionInstance, Regime};
pub use rng::RngStream;
