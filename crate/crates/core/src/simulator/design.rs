//! Experiment designs: group splits, arms and assignment schemes.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{Prior, ThompsonMethod, CONTROL_ARM};
use crate::error::{Error, Result};
use crate::impact::{Group, GroupMap};
use crate::itempair::CandidateConfig;
use crate::traits::{ArmLabel, CohortRules, ContextSpec, Day, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Splits {
    pub pure_control: f64,
    pub adaptive: f64,
    pub non_adaptive: f64,
}

impl Default for Splits {
    fn default() -> Self {
        Self { pure_control: 0.35, adaptive: 0.60, non_adaptive: 0.05 }
    }
}

impl Splits {
    pub fn validate(&self) -> Result<()> {
        let f = [self.pure_control, self.adaptive, self.non_adaptive];
        if f.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("splits must be fractions summing to 1"));
        }
        Ok(())
    }

    /// Group sizes for `n` users by largest remainder; ties go to pure
    /// control, then adaptive.
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let f = [self.pure_control, self.adaptive, self.non_adaptive];
        let exact: Vec<f64> = f.iter().map(|x| x * n as f64).collect();
        let mut counts: [usize; 3] = [0; 3];
        for (c, e) in counts.iter_mut().zip(&exact) {
            *c = e.floor() as usize;
        }
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        let assigned: usize = counts.iter().sum();
        for &k in order.iter().take(n.saturating_sub(assigned)) {
            counts[k] += 1;
        }
        counts
    }
}

/// Shuffles the users and cuts them into groups of `splits.counts` size.
pub fn assign_groups<R: Rng + ?Sized>(users: &BTreeSet<UserId>, splits: &Splits, rng: &mut R) -> GroupMap {
    let mut order: Vec<&UserId> = users.iter().collect();
    order.shuffle(rng);
    let [c, a, _] = splits.counts(order.len());
    order
        .into_iter()
        .enumerate()
        .map(|(k, u)| {
            let g = if k < c {
                Group::PureControl
            } else if k < c + a {
                Group::Adaptive
            } else {
                Group::NonAdaptive
            };
            (u.clone(), g)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AssignmentScheme {
    /// Thompson sampling on the bandit posterior.
    Adaptive,
    /// Uniform over the adaptive arms.
    PureRandom,
    /// Nudge with probability `p`, on an arm chosen uniformly among the
    /// nudge arms; otherwise control.
    MicroRandomized { p: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditSettings {
    /// Diagonal of the prior precision matrix.
    pub prior_precision: f64,
    pub a0: f64,
    pub b0: f64,
    pub thompson: ThompsonMethod,
}

impl Default for BanditSettings {
    fn default() -> Self {
        Self { prior_precision: 1.0, a0: 2.0, b0: 1.0, thompson: ThompsonMethod::TwoStep }
    }
}

impl BanditSettings {
    /// Zero-mean prior with precision `prior_precision * I`.
    pub fn prior(&self, dim: usize) -> Prior {
        Prior { precision0: DMatrix::identity(dim, dim) * self.prior_precision, a0: self.a0, b0: self.b0, ..Prior::standard(dim) }
    }
}

/// From week `after_week + 1` on, decisions move to `weekday`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeekdaySwitch {
    pub after_week: u32,
    pub weekday: u8,
}

fn default_context() -> ContextSpec {
    ContextSpec::new(
        &["intercept", "purchase_frequency", "baseline_expenditure", "login_frequency", "days_since_last_nudge"],
        28,
    )
}

fn default_arms() -> Vec<ArmLabel> {
    ArmLabel::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentDesign {
    pub weeks: u32,
    /// Day of the week (0 to 6, counted from the experiment start) on which
    /// decisions are made.
    pub decision_weekday: u8,
    pub weekday_switch: Option<WeekdaySwitch>,
    pub splits: Splits,
    #[serde(default = "default_arms")]
    pub adaptive_arms: Vec<ArmLabel>,
    pub scheme: AssignmentScheme,
    #[serde(default = "default_context")]
    pub context: ContextSpec,
    pub cohort: CohortRules,
    pub candidates: CandidateConfig,
    pub bandit: BanditSettings,
    pub reward_window_days: i64,
}

impl Default for ExperimentDesign {
    fn default() -> Self {
        Self {
            weeks: 10,
            decision_weekday: 0,
            weekday_switch: None,
            splits: Splits::default(),
            adaptive_arms: default_arms(),
            scheme: AssignmentScheme::Adaptive,
            context: default_context(),
            cohort: CohortRules::default(),
            candidates: CandidateConfig::default(),
            bandit: BanditSettings::default(),
            reward_window_days: 7,
        }
    }
}

impl ExperimentDesign {
    pub fn validate(&self) -> Result<()> {
        self.splits.validate()?;
        self.cohort.validate()?;
        self.context.kinds()?;
        if self.decision_weekday > 6 || self.weekday_switch.is_some_and(|s| s.weekday > 6) {
            return Err(Error::config("decision weekdays must be in 0..=6"));
        }
        if self.reward_window_days < 1 {
            return Err(Error::config("reward_window_days must be at least 1"));
        }
        let arms: BTreeSet<ArmLabel> = self.adaptive_arms.iter().copied().collect();
        if arms.len() != self.adaptive_arms.len() {
            return Err(Error::config("adaptive_arms has duplicates"));
        }
        if self.splits.adaptive > 0.0 {
            if !arms.contains(&ArmLabel::Control) {
                return Err(Error::config(format!("adaptive_arms must include {CONTROL_ARM}")));
            }
            if arms.len() < 2 {
                return Err(Error::config("adaptive_arms needs at least one nudge arm"));
            }
        }
        if let AssignmentScheme::MicroRandomized { p } = self.scheme {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config("micro-randomization probability must be in [0, 1]"));
            }
        }
        let b = self.bandit;
        if !(b.prior_precision > 0.0 && b.a0 > 0.0 && b.b0 > 0.0) {
            return Err(Error::config("bandit prior parameters must be positive"));
        }
        Ok(())
    }

    /// Decision day of 1-based `week` for an experiment starting on `start`.
    pub fn decision_day(&self, start: Day, week: u32) -> Day {
        let weekday = match self.weekday_switch {
            Some(s) if week > s.after_week => s.weekday,
            _ => self.decision_weekday,
        };
        start + 7 * (i64::from(week) - 1) + i64::from(weekday)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;

    #[test]
    fn largest_remainder_counts() {
        let s = Splits::default();
        assert_eq!(s.counts(100), [35, 60, 5]);
        assert_eq!(s.counts(7), [3, 4, 0]);
        assert_eq!(s.counts(0), [0, 0, 0]);
    }

    proptest! {
        #[test]
        fn counts_within_one_user(n in 0usize..500, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (pc, ad) = (a, b * (1.0 - a));
            let s = Splits { pure_control: pc, adaptive: ad, non_adaptive: 1.0 - pc - ad };
            let c = s.counts(n);
            prop_assert_eq!(c.iter().sum::<usize>(), n);
            for (k, f) in [s.pure_control, s.adaptive, s.non_adaptive].iter().enumerate() {
                prop_assert!((c[k] as f64 - f * n as f64).abs() < 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn groups_match_counts() {
        let users: BTreeSet<UserId> = (0..40).map(|k| UserId::new(format!("u{k}"))).collect();
        let g = assign_groups(&users, &Splits::default(), &mut substream(5, "groups"));
        assert_eq!(g.len(), 40);
        assert_eq!(g.values().filter(|&&x| x == Group::PureControl).count(), 14);
        assert_eq!(g.values().filter(|&&x| x == Group::Adaptive).count(), 24);
        assert_eq!(g.values().filter(|&&x| x == Group::NonAdaptive).count(), 2);
    }

    #[test]
    fn weekday_switch() {
        let d = ExperimentDesign {
            decision_weekday: 1,
            weekday_switch: Some(WeekdaySwitch { after_week: 2, weekday: 0 }),
            ..Default::default()
        };
        assert_eq!([d.decision_day(100, 1), d.decision_day(100, 2), d.decision_day(100, 3)], [101, 108, 114]);
    }

    #[test]
    fn validation() {
        assert!(ExperimentDesign::default().validate().is_ok());
        let bad = [
            ExperimentDesign { splits: Splits { pure_control: 0.5, adaptive: 0.6, non_adaptive: 0.0 }, ..Default::default() },
            ExperimentDesign { adaptive_arms: vec![ArmLabel::Personalized, ArmLabel::Random], ..Default::default() },
            ExperimentDesign { adaptive_arms: vec![ArmLabel::Control], ..Default::default() },
            ExperimentDesign { scheme: AssignmentScheme::MicroRandomized { p: 2.0 }, ..Default::default() },
            ExperimentDesign { decision_weekday: 7, ..Default::default() },
        ];
        for d in bad {
            assert!(d.validate().is_err(), "{d:?}");
        }
    }
}
