//! Couplings between Gaussians and between labeled examples drawn under the
//! two hypotheses of each lower-bound construction.

mod chain;
mod disagreement;
mod regime;

pub use chain::{
    hybrid_coupling, maximal_coupling_univariate, one_step_coupling, sum_conditioned_coupling,
    HybridCoupler,
};
pub use disagreement::{
    estimate_disagreements, estimate_disagreements_permuted, DisagreementStats, MIN_TRIALS,
};
pub use regime::{
    draw_big_eta_pair, draw_interm_eta_pair, draw_small_beta_pair, draw_small_eta_pair,
    permute_within_blocks, CoupledPair, CouplingSpec, DetailedDraw, RegimeCoupler,
};
