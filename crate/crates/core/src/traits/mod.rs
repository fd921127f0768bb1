//! Purchase, nudge and login logs and everything computed from them:
//! recency, purchase cadence, bandit contexts, rewards and cohort rules.

mod context;
mod events;
pub mod files;

pub use context::{
    compute_context, compute_contexts, compute_reward, eligible_cohort, min_max_in_place, CohortRules,
    ContextSpec, ContextVector, RewardObservation, TraitKind,
};
pub use events::{
    ArmLabel, Day, Interaction, ItemId, LoginEvent, LoginLog, Logs, NudgeEvent, NudgeLog, NudgePair,
    PurchaseEvent, PurchaseLog, UserId,
};

/// A month, wherever windows are given in months.
pub const DAYS_PER_MONTH: i64 = 30;
