//! K-armed Bayesian linear bandit.
//!
//! Each arm's reward is `x^T theta_k + noise`, with a Gaussian-Gamma
//! (Normal-Gamma) conjugate prior on `(theta_k, noise precision)`. Arms are
//! chosen by Thompson sampling or UCB; the analytics submodule explains
//! the learned policy in terms of the context traits.

mod analytics;
mod model;
mod policy;
mod snapshot;

pub use analytics::{
    best_arm_confidence, sensitivity, soft_threshold, softmax_jacobian, BestArm, SensitivityCategory,
    SensitivityEntry, SensitivityReport, DEFAULT_LAMBDA_FACTOR,
};
pub use model::{ArmPosterior, BanditModel, Prior, CONTROL_ARM};
pub use policy::{
    arm_probability, argmax, sample_scores, sample_theta, softmax, thompson_sample_arm, ucb_scores, ucb_select,
    Decision, ProbabilityMethod, ThompsonMethod,
};
pub use snapshot::{
    decision_header, read_decisions, read_decisions_from, write_decisions, LoggedDecision, SNAPSHOT_VERSION,
};
