//! Loss terms: task and reconstruction MSE, squared MMD, the causal
//! constraint penalty and the triplet loss.

mod cacm;
mod causal;
mod contrastive;
mod losses;
mod mmd;

pub use cacm::{
    cacm_penalty, cacm_penalty_grad, CacmSpace, ConstraintValue, PenaltyBatch, PenaltyBreakdown,
    SkippedConstraint,
};
pub use causal::{CausalSpec, CausalTag, ConstraintClass, GraphVariant};
pub use contrastive::{
    contrastive_grad, contrastive_hinge, contrastive_loss, sample_pairs, PairIndex, Triple, TripletGrad,
};
pub use losses::{mse, task_losses, total_loss, LossComponents, LossWeights};
pub use mmd::{median_bandwidth, mmd2, mmd2_grad, Bandwidth, KernelSpec, MmdEstimator};
