//! The full analysis of one experiment's logs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::assignment::{assignment_metrics, AssignmentMetrics};
use super::groups::{members, Group, GroupMap};
use super::lmm::{backward_eliminate, Elimination, LmmDesign, LmmOptions, Term, WeeklyObservation};
use super::series::{daily_series_tests, median_split, stratified_tests, DailyPanel, SeriesResult, StratumResult};
use super::success::{success_analysis, SuccessBreakdown};
use super::ttest::{check_alpha, DEFAULT_ALPHA};
use crate::bandit::{LoggedDecision, CONTROL_ARM};
use crate::error::{Error, Result};
use crate::traits::{ArmLabel, Day, Logs, NudgeEvent, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub alpha: f64,
    /// Days before the start used for the baseline expenditure.
    pub baseline_days: i64,
    pub lmm: LmmOptions,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { alpha: DEFAULT_ALPHA, baseline_days: 90, lmm: LmmOptions::default() }
    }
}

/// Experiment window: decision points at `start_day + 7 (w - 1)` for
/// `w = 1..=n_weeks`; week `w` covers days `(start + 7(w-1), start + 7w]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start_day: Day,
    pub n_weeks: u32,
}

impl Window {
    pub fn last_day(&self) -> Day {
        self.start_day + 7 * self.n_weeks as Day
    }

    pub fn week_of(&self, day: Day) -> Option<u32> {
        if day <= self.start_day || day > self.last_day() {
            return None;
        }
        Some(((day - self.start_day - 1) / 7) as u32 + 1)
    }

    /// Week whose decision point precedes `day` (nudges sent at the start day
    /// belong to week 1).
    pub fn decision_week(&self, day: Day) -> Option<u32> {
        if day < self.start_day || day >= self.last_day() {
            return None;
        }
        Some(((day - self.start_day) / 7) as u32 + 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub alpha: f64,
    pub window: Window,
    /// Daily-series tests of each intervention group against pure control.
    pub ttests: BTreeMap<String, SeriesResult>,
    /// Same, split into top and bottom baseline spenders.
    pub strata: BTreeMap<String, BTreeMap<String, StratumResult>>,
    pub lmm: Option<Elimination>,
    pub assignment: Option<AssignmentMetrics>,
    /// Keyed by intervention group.
    pub success: BTreeMap<String, SuccessBreakdown>,
    pub warnings: Vec<String>,
}

/// Min-max normalised revenue over `(start - days, start]`.
pub fn baseline_expenditure(logs: &Logs, users: &BTreeSet<UserId>, start: Day, days: i64) -> BTreeMap<UserId, f64> {
    let mut raw: BTreeMap<UserId, f64> =
        users.iter().map(|u| (u.clone(), logs.purchases.revenue_between(u, start - days, start))).collect();
    let lo = raw.values().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.values().copied().fold(f64::NEG_INFINITY, f64::max);
    for v in raw.values_mut() {
        *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.0 };
    }
    raw
}

/// Weekly revenue rows for every grouped user.
pub fn weekly_panel(logs: &Logs, groups: &GroupMap, window: Window, baseline: &BTreeMap<UserId, f64>) -> Vec<WeeklyObservation> {
    let n = window.n_weeks as usize;
    let mut revenue: BTreeMap<&UserId, Vec<f64>> = groups.keys().map(|u| (u, vec![0.0; n])).collect();
    for e in logs.purchases.events() {
        if let (Some(w), Some(row)) = (window.week_of(e.day), revenue.get_mut(&e.user_id)) {
            row[w as usize - 1] += e.revenue;
        }
    }
    let mut nudged: BTreeMap<(&UserId, u32), ArmLabel> = BTreeMap::new();
    for e in logs.nudges.events() {
        if e.pair.is_none() {
            continue;
        }
        if let Some(w) = window.decision_week(e.day) {
            nudged.insert((&e.user_id, w), e.arm_label);
        }
    }
    let mut out = Vec::with_capacity(groups.len() * n);
    for (u, &g) in groups {
        for w in 1..=window.n_weeks {
            out.push(WeeklyObservation {
                user: u.clone(),
                week: w,
                y: revenue[u][w as usize - 1],
                baseline: baseline.get(u).copied().unwrap_or(0.0),
                group: g,
                nudged: nudged.get(&(u, w)).copied(),
            });
        }
    }
    out
}

fn nudge_arms_used(nudges: &[NudgeEvent]) -> BTreeSet<ArmLabel> {
    nudges.iter().filter(|n| n.pair.is_some()).map(|n| n.arm_label).collect()
}

/// Terms of the full weekly model for the data at hand; terms whose column
/// would be identically zero are left out.
pub fn full_terms(obs: &[WeeklyObservation], arms: &BTreeSet<ArmLabel>) -> Vec<Term> {
    let candidates = if arms.len() > 1 {
        Term::per_arm(&arms.iter().copied().collect::<Vec<_>>())
    } else {
        Term::standard()
    };
    candidates.into_iter().filter(|t| obs.iter().any(|o| t.value(o) != 0.0)).collect()
}

pub struct AnalysisInput<'a> {
    pub logs: &'a Logs,
    pub groups: &'a GroupMap,
    pub window: Window,
    pub decisions: Option<&'a [LoggedDecision]>,
}

/// Daily t-tests, stratified tests, mixed model with backward elimination,
/// assignment metrics and success analysis.
pub fn analyze(input: &AnalysisInput<'_>, opts: &AnalysisOptions) -> Result<ImpactReport> {
    check_alpha(opts.alpha)?;
    let AnalysisInput { logs, groups, window, decisions } = *input;
    let mut warnings = Vec::new();
    let control = members(groups, Group::PureControl);
    if control.len() < 2 {
        return Err(Error::degenerate(format!("{} pure-control users; the t-tests need at least 2", control.len())));
    }
    let all_users: BTreeSet<UserId> = groups.keys().cloned().collect();
    let baseline = baseline_expenditure(logs, &all_users, window.start_day, opts.baseline_days);
    let panel = DailyPanel::from_purchases(&logs.purchases, &all_users, window.start_day + 1, window.last_day());

    let mut ttests = BTreeMap::new();
    let mut strata = BTreeMap::new();
    for g in [Group::Adaptive, Group::NonAdaptive] {
        let treated = members(groups, g);
        if treated.is_empty() {
            continue;
        }
        if treated.len() < 2 {
            warnings.push(format!("{g}: fewer than 2 users, t-tests skipped"));
            continue;
        }
        ttests.insert(g.as_str().to_string(), daily_series_tests(&panel, &treated, &control, opts.alpha)?);
        let scores: BTreeMap<UserId, f64> =
            treated.iter().chain(&control).map(|u| (u.clone(), baseline[u])).collect();
        strata.insert(g.as_str().to_string(), stratified_tests(&panel, &treated, &control, &median_split(&scores), opts.alpha)?);
    }
    if ttests.is_empty() {
        return Err(Error::degenerate("no intervention group with at least 2 users"));
    }

    let lmm = if window.n_weeks < 2 {
        warnings.push("mixed model skipped: needs at least 2 weeks".into());
        None
    } else {
        let obs = weekly_panel(logs, groups, window, &baseline);
        let terms = full_terms(&obs, &nudge_arms_used(logs.nudges.events()));
        let fitted = LmmDesign::from_weekly(&obs, &terms).and_then(|d| backward_eliminate(&d, opts.alpha, &opts.lmm));
        match fitted {
            Ok(e) => Some(e),
            Err(e) if e.is_analysis_infeasible() => {
                warnings.push(format!("mixed model skipped: {e}"));
                None
            }
            Err(e) => return Err(e),
        }
    };

    let assignment = match decisions {
        Some(ds) if !ds.is_empty() => {
            let arms: BTreeSet<&str> = ds.iter().map(|d| d.arm_label.as_str()).filter(|a| *a != CONTROL_ARM).collect();
            let arms: Vec<&str> = arms.into_iter().collect();
            Some(assignment_metrics(ds.iter().map(|d| (d.day, d.arm_label.as_str())), &arms))
        }
        _ => {
            warnings.push("no decision log: bandit assignment metrics skipped".into());
            None
        }
    };

    let mut success = BTreeMap::new();
    if logs.nudges.is_empty() {
        warnings.push("no nudge log: success analysis skipped".into());
    } else {
        for g in [Group::Adaptive, Group::NonAdaptive] {
            let of_group: Vec<&NudgeEvent> =
                logs.nudges.events().iter().filter(|n| groups.get(&n.user_id) == Some(&g)).collect();
            if of_group.iter().any(|n| n.pair.is_some()) {
                success.insert(g.as_str().to_string(), success_analysis(of_group, &logs.purchases, window.last_day()));
            }
        }
    }

    Ok(ImpactReport { alpha: opts.alpha, window, ttests, strata, lmm, assignment, success, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_weeks() {
        let w = Window { start_day: 100, n_weeks: 2 };
        assert_eq!(w.week_of(100), None);
        assert_eq!(w.week_of(101), Some(1));
        assert_eq!(w.week_of(107), Some(1));
        assert_eq!(w.week_of(108), Some(2));
        assert_eq!(w.week_of(114), Some(2));
        assert_eq!(w.week_of(115), None);
        assert_eq!(w.decision_week(100), Some(1));
        assert_eq!(w.decision_week(107), Some(2));
        assert_eq!(w.decision_week(114), None);
    }
}
