//! How often the adaptive policy chose to nudge.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::traits::Day;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionPoint {
    pub day: Day,
    pub n_users: usize,
    pub fraction_nudged: f64,
    /// Fraction of users assigned to each arm; sums to 1.
    pub arm_fractions: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentMetrics {
    /// Mean over decision points of the fraction assigned to any nudge arm.
    pub avg_fraction_nudged: f64,
    /// Decision points where more than half were nudged.
    pub weeks_majority_nudged: usize,
    pub n_weeks: usize,
    pub avg_arm_fraction: BTreeMap<String, f64>,
    pub weeks_majority_arm: BTreeMap<String, usize>,
    pub points: Vec<DecisionPoint>,
}

impl AssignmentMetrics {
    /// `k/n` as reported in the impact table.
    pub fn majority_label(&self) -> String {
        format!("{}/{}", self.weeks_majority_nudged, self.n_weeks)
    }

    pub fn arm_majority_label(&self, arm: &str) -> String {
        format!("{}/{}", self.weeks_majority_arm.get(arm).copied().unwrap_or(0), self.n_weeks)
    }
}

/// Groups `(day, arm)` decisions by day. Arms listed in `nudge_arms`
/// count as nudges.
pub fn assignment_metrics<'a, S: AsRef<str>>(
    decisions: impl IntoIterator<Item = (Day, &'a str)>,
    nudge_arms: &[S],
) -> AssignmentMetrics {
    let nudge: BTreeSet<&str> = nudge_arms.iter().map(AsRef::as_ref).collect();
    let mut by_day: BTreeMap<Day, BTreeMap<String, usize>> = BTreeMap::new();
    let mut arms: BTreeSet<String> = BTreeSet::new();
    for (day, arm) in decisions {
        *by_day.entry(day).or_default().entry(arm.to_string()).or_default() += 1;
        arms.insert(arm.to_string());
    }
    let points: Vec<DecisionPoint> = by_day
        .into_iter()
        .map(|(day, counts)| {
            let n: usize = counts.values().sum();
            let nudged: usize = counts.iter().filter(|(a, _)| nudge.contains(a.as_str())).map(|(_, c)| c).sum();
            DecisionPoint {
                day,
                n_users: n,
                fraction_nudged: nudged as f64 / n as f64,
                arm_fractions: arms.iter().map(|a| (a.clone(), *counts.get(a).unwrap_or(&0) as f64 / n as f64)).collect(),
            }
        })
        .collect();
    let n_weeks = points.len();
    let mean = |f: &dyn Fn(&DecisionPoint) -> f64| {
        if n_weeks == 0 {
            0.0
        } else {
            points.iter().map(f).sum::<f64>() / n_weeks as f64
        }
    };
    AssignmentMetrics {
        avg_fraction_nudged: mean(&|p| p.fraction_nudged),
        weeks_majority_nudged: points.iter().filter(|p| p.fraction_nudged > 0.5).count(),
        n_weeks,
        avg_arm_fraction: arms.iter().map(|a| (a.clone(), mean(&|p| p.arm_fractions[a]))).collect(),
        weeks_majority_arm: arms.iter().map(|a| (a.clone(), points.iter().filter(|p| p.arm_fractions[a] > 0.5).count())).collect(),
        points,
    }
}
