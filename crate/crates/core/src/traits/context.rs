//! Dynamic traits, bandit contexts, rewards and cohort eligibility.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::events::{Day, Interaction, LoginLog, Logs, PurchaseLog, UserId};
use crate::error::{Error, Result};

/// One supported trait. Windowed traits look at `(t - window, t]`; traits
/// derived from the nudge log only see nudges sent strictly before `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraitKind {
    /// Constant 1, lets each arm learn its own baseline reward.
    Intercept,
    /// Days since the last nudge, capped and divided by the cap.
    DaysSinceLastNudge,
    DaysWithOrder { window: i64 },
    Expenditure { window: i64 },
    LoginDays { window: i64 },
    DaysBetweenLogins { window: i64 },
    InAppTime { window: i64 },
    DaysSinceFirstLogin,
    OpenedNudges { window: i64 },
}

impl TraitKind {
    /// Parses a trait name such as `days_with_order_30d` or one of the
    /// short aliases (`purchase_frequency`, `login_frequency`, ...).
    pub fn parse(name: &str) -> Result<Self> {
        let kind = match name {
            "intercept" => TraitKind::Intercept,
            "days_since_last_nudge" | "normalized_days_since_last_nudge" => TraitKind::DaysSinceLastNudge,
            "days_since_first_login" => TraitKind::DaysSinceFirstLogin,
            "purchase_frequency" => TraitKind::DaysWithOrder { window: 30 },
            "baseline_expenditure_normalized" | "baseline_expenditure" => TraitKind::Expenditure { window: 90 },
            "login_frequency" => TraitKind::LoginDays { window: 60 },
            "in_app_time" => TraitKind::InAppTime { window: 30 },
            _ => {
                let (stem, window) = split_window(name)
                    .ok_or_else(|| Error::config(format!("unknown trait {name:?}")))?;
                match stem {
                    "days_with_order" => TraitKind::DaysWithOrder { window },
                    "expenditure" => TraitKind::Expenditure { window },
                    "login_days" => TraitKind::LoginDays { window },
                    "days_between_logins" => TraitKind::DaysBetweenLogins { window },
                    "in_app_time" => TraitKind::InAppTime { window },
                    "opened_nudges" => TraitKind::OpenedNudges { window },
                    _ => return Err(Error::config(format!("unknown trait {name:?}"))),
                }
            }
        };
        Ok(kind)
    }

    fn min_max_scaled(self) -> bool {
        !matches!(self, TraitKind::Intercept | TraitKind::DaysSinceLastNudge)
    }
}

/// `"expenditure_90d"` -> `("expenditure", 90)`.
fn split_window(name: &str) -> Option<(&str, i64)> {
    let rest = name.strip_suffix('d')?;
    let cut = rest.rfind('_')?;
    let window: i64 = rest[cut + 1..].parse().ok()?;
    (window > 0).then_some((&rest[..cut], window))
}

/// Named trait list plus the cap used for "days since last nudge".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextSpec {
    pub traits: Vec<String>,
    /// Usually the experiment length in days.
    pub nudge_cap_days: i64,
}

impl ContextSpec {
    pub fn new(traits: &[&str], nudge_cap_days: i64) -> Self {
        Self { traits: traits.iter().map(|s| s.to_string()).collect(), nudge_cap_days }
    }

    pub fn dim(&self) -> usize {
        self.traits.len()
    }

    pub fn kinds(&self) -> Result<Vec<TraitKind>> {
        if self.nudge_cap_days < 1 {
            return Err(Error::config("nudge_cap_days must be at least 1"));
        }
        if self.traits.is_empty() {
            return Err(Error::config("context needs at least one trait"));
        }
        self.traits.iter().map(|t| TraitKind::parse(t)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextVector {
    pub user_id: UserId,
    pub day: Day,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

fn raw_trait(logs: &Logs, kind: TraitKind, user: &UserId, t: Day, cap: i64) -> f64 {
    match kind {
        TraitKind::Intercept => 1.0,
        TraitKind::DaysSinceLastNudge => {
            let days = logs.nudges.last_before(user, t).map_or(cap, |d| (t - d).min(cap));
            days as f64 / cap as f64
        }
        TraitKind::DaysWithOrder { window } => logs.purchases.order_days_between(user, t - window, t) as f64,
        TraitKind::Expenditure { window } => logs.purchases.revenue_between(user, t - window, t),
        TraitKind::LoginDays { window } => logs.logins.login_days_between(user, t - window, t).len() as f64,
        TraitKind::DaysBetweenLogins { window } => {
            let days = logs.logins.login_days_between(user, t - window, t);
            match (days.first(), days.last()) {
                (Some(&a), Some(&b)) if days.len() >= 2 => (b - a) as f64 / (days.len() - 1) as f64,
                _ => window as f64,
            }
        }
        TraitKind::InAppTime { window } => logs.logins.session_seconds_between(user, t - window, t),
        TraitKind::DaysSinceFirstLogin => logs
            .logins
            .first_login(user)
            .filter(|&d| d <= t)
            .map_or(0.0, |d| (t - d) as f64),
        TraitKind::OpenedNudges { window } => logs
            .nudges
            .before(user, t)
            .filter(|e| e.day > t - window && e.interaction == Interaction::Opened)
            .count() as f64,
    }
}

/// Contexts for every member of `cohort` at day `t`. Count and amount traits
/// are min-max scaled over the cohort (zero range maps to 0).
pub fn compute_contexts(
    logs: &Logs,
    t: Day,
    spec: &ContextSpec,
    cohort: &BTreeSet<UserId>,
) -> Result<BTreeMap<UserId, ContextVector>> {
    let kinds = spec.kinds()?;
    let users: Vec<&UserId> = cohort.iter().collect();
    let mut columns: Vec<Vec<f64>> = kinds
        .iter()
        .map(|&k| users.iter().map(|u| raw_trait(logs, k, u, t, spec.nudge_cap_days)).collect())
        .collect();
    for (kind, col) in kinds.iter().zip(columns.iter_mut()) {
        if kind.min_max_scaled() {
            min_max_in_place(col);
        }
    }
    Ok(users
        .iter()
        .enumerate()
        .map(|(row, &u)| {
            let values = columns.iter().map(|c| c[row]).collect();
            (u.clone(), ContextVector { user_id: u.clone(), day: t, names: spec.traits.clone(), values })
        })
        .collect())
}

/// Context of a single cohort member; normalization still uses the cohort.
pub fn compute_context(
    logs: &Logs,
    user: &UserId,
    t: Day,
    spec: &ContextSpec,
    cohort: &BTreeSet<UserId>,
) -> Result<ContextVector> {
    if !cohort.contains(user) {
        return Err(Error::input(format!("user {user} is not in the cohort")));
    }
    let mut all = compute_contexts(logs, t, spec, cohort)?;
    Ok(all.remove(user).expect("cohort member"))
}

pub fn min_max_in_place(col: &mut [f64]) {
    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    for v in col.iter_mut() {
        *v = if range > 0.0 { ((*v - lo) / range).clamp(0.0, 1.0) } else { 0.0 };
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardObservation {
    pub user_id: UserId,
    pub decision_day: Day,
    pub reward: f64,
}

/// `ln(1 + revenue)` over `(decision_day, decision_day + window_days]`.
pub fn compute_reward(log: &PurchaseLog, user: &UserId, decision_day: Day, window_days: i64) -> Result<RewardObservation> {
    if window_days < 1 {
        return Err(Error::config("reward window must be at least one day"));
    }
    let spend = log.revenue_between(user, decision_day, decision_day + window_days);
    Ok(RewardObservation { user_id: user.clone(), decision_day, reward: spend.ln_1p() })
}

/// Eligibility rules. `None` disables a login rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortRules {
    /// Must have logged in within `(t - days, t]`.
    pub login_recency_days: Option<i64>,
    /// Window for the average-login-frequency rule.
    pub login_frequency_window_days: Option<i64>,
    pub min_logins_per_week: f64,
    /// Trailing window for the spender ranking.
    pub spend_window_days: i64,
    /// Percentage (0-100) of top spenders to exclude.
    pub exclude_top_spender_pct: f64,
}

impl Default for CohortRules {
    fn default() -> Self {
        Self {
            login_recency_days: Some(40),
            login_frequency_window_days: Some(60),
            min_logins_per_week: 1.0,
            spend_window_days: 90,
            exclude_top_spender_pct: 20.0,
        }
    }
}

impl CohortRules {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.exclude_top_spender_pct) {
            return Err(Error::config("exclude_top_spender_pct must be in [0, 100]"));
        }
        if self.spend_window_days < 1 {
            return Err(Error::config("spend_window_days must be positive"));
        }
        if self.login_recency_days.is_some_and(|d| d < 1) || self.login_frequency_window_days.is_some_and(|d| d < 1) {
            return Err(Error::config("login windows must be positive"));
        }
        if !(self.min_logins_per_week >= 0.0) {
            return Err(Error::config("min_logins_per_week must be non-negative"));
        }
        Ok(())
    }

    /// No login requirement and no spender exclusion.
    pub fn open() -> Self {
        Self {
            login_recency_days: None,
            login_frequency_window_days: None,
            min_logins_per_week: 0.0,
            spend_window_days: 90,
            exclude_top_spender_pct: 0.0,
        }
    }
}

/// Users eligible at day `t`. The spender ranking is taken over every user
/// seen in either log, independently of the login rules.
pub fn eligible_cohort(purchases: &PurchaseLog, logins: &LoginLog, t: Day, rules: &CohortRules) -> Result<BTreeSet<UserId>> {
    rules.validate()?;
    let universe: BTreeSet<&UserId> = purchases.users().chain(logins.users()).collect();

    let mut ranked: Vec<(&UserId, f64)> = universe
        .iter()
        .map(|&u| (u, purchases.revenue_between(u, t - rules.spend_window_days, t)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let n_excluded = ((ranked.len() as f64) * rules.exclude_top_spender_pct / 100.0 + 1e-9).floor() as usize;
    let excluded: BTreeSet<&UserId> = ranked.iter().take(n_excluded).map(|x| x.0).collect();

    Ok(universe
        .into_iter()
        .filter(|u| !excluded.contains(u))
        .filter(|u| match rules.login_recency_days {
            Some(days) => logins.last_login_at_or_before(u, t).is_some_and(|d| d > t - days),
            None => true,
        })
        .filter(|u| match rules.login_frequency_window_days {
            Some(w) => {
                let needed = rules.min_logins_per_week * w as f64 / 7.0;
                logins.login_days_between(u, t - w, t).len() as f64 + 1e-9 >= needed
            }
            None => true,
        })
        .cloned()
        .collect())
}
