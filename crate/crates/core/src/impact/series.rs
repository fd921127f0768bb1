//! Daily and accumulated t-tests of an intervention group against pure control.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ttest::{check_alpha, welch_t_test, TTestResult};
use crate::error::{Error, Result};
use crate::traits::{Day, PurchaseLog, UserId};

/// Per-user daily values over the contiguous range `first_day..first_day + n_days`.
#[derive(Clone, Debug, PartialEq)]
pub struct DailyPanel {
    pub first_day: Day,
    pub n_days: usize,
    pub values: BTreeMap<UserId, Vec<f64>>,
}

impl DailyPanel {
    /// Daily expenditure for `users` over `first_day..=last_day`. Days
    /// without orders are zero.
    pub fn from_purchases<'a>(
        log: &PurchaseLog,
        users: impl IntoIterator<Item = &'a UserId>,
        first_day: Day,
        last_day: Day,
    ) -> Self {
        let n_days = (last_day - first_day + 1).max(0) as usize;
        let mut values: BTreeMap<UserId, Vec<f64>> = users.into_iter().map(|u| (u.clone(), vec![0.0; n_days])).collect();
        for e in log.events() {
            if e.day < first_day || e.day > last_day {
                continue;
            }
            if let Some(row) = values.get_mut(&e.user_id) {
                row[(e.day - first_day) as usize] += e.revenue;
            }
        }
        Self { first_day, n_days, values }
    }

    fn rows(&self, users: &BTreeSet<UserId>) -> Result<Vec<&[f64]>> {
        users
            .iter()
            .map(|u| {
                self.values
                    .get(u)
                    .map(Vec::as_slice)
                    .ok_or_else(|| Error::input(format!("user {u} is not in the panel")))
            })
            .collect()
    }

    fn check(&self) -> Result<()> {
        if let Some((u, row)) = self.values.iter().find(|(_, r)| r.len() != self.n_days) {
            return Err(Error::input(format!("user {u} has {} days, panel has {}", row.len(), self.n_days)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayTest {
    pub day: Day,
    /// `None` when the day is untestable (e.g. no variance at all).
    pub daily: Option<TTestResult>,
    pub accumulated: Option<TTestResult>,
}

/// Summary over the accumulated tests, as reported in the impact table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub n_days: usize,
    pub significant_days: usize,
    pub pct_significant_days: f64,
    pub largest_effect: Option<f64>,
    pub largest_power: Option<f64>,
    pub average_effect: Option<f64>,
    pub average_power: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesResult {
    pub alpha: f64,
    pub n_treatment: usize,
    pub n_control: usize,
    pub days: Vec<DayTest>,
    pub summary: SeriesSummary,
}

fn summarize(days: &[DayTest]) -> SeriesSummary {
    let sig: Vec<&TTestResult> = days.iter().filter_map(|d| d.accumulated.as_ref()).filter(|r| r.significant).collect();
    let effects: Vec<f64> = sig.iter().filter_map(|r| r.effect_size).collect();
    let powers: Vec<f64> = sig.iter().filter_map(|r| r.power).collect();
    let max = |v: &[f64]| v.iter().copied().reduce(f64::max);
    let avg = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    SeriesSummary {
        n_days: days.len(),
        significant_days: sig.len(),
        pct_significant_days: if days.is_empty() { 0.0 } else { sig.len() as f64 / days.len() as f64 },
        largest_effect: max(&effects),
        largest_power: max(&powers),
        average_effect: avg(&effects),
        average_power: avg(&powers),
    }
}

fn test_or_none(xs: &[f64], ys: &[f64], alpha: f64) -> Result<Option<TTestResult>> {
    match welch_t_test(xs, ys, alpha) {
        Ok(r) => Ok(Some(r)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Welch tests per day and on values accumulated since the first day.
pub fn daily_series_tests(
    panel: &DailyPanel,
    treatment: &BTreeSet<UserId>,
    control: &BTreeSet<UserId>,
    alpha: f64,
) -> Result<SeriesResult> {
    check_alpha(alpha)?;
    panel.check()?;
    if let Some(u) = treatment.intersection(control).next() {
        return Err(Error::input(format!("user {u} is in both groups")));
    }
    let t_rows = panel.rows(treatment)?;
    let c_rows = panel.rows(control)?;
    let cumulate = |rows: &[&[f64]]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .scan(0.0, |acc, v| {
                        *acc += v;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect()
    };
    let t_acc = cumulate(&t_rows);
    let c_acc = cumulate(&c_rows);
    let days = (0..panel.n_days)
        .into_par_iter()
        .map(|k| {
            let col = |rows: &[&[f64]]| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
            let acc_col = |rows: &[Vec<f64>]| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
            Ok(DayTest {
                day: panel.first_day + k as Day,
                daily: test_or_none(&col(&t_rows), &col(&c_rows), alpha)?,
                accumulated: test_or_none(&acc_col(&t_acc), &acc_col(&c_acc), alpha)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SeriesResult { alpha, n_treatment: treatment.len(), n_control: control.len(), summary: summarize(&days), days })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StratumResult {
    Tested(SeriesResult),
    Untestable { n_treatment: usize, n_control: usize },
}

/// [`daily_series_tests`] within each stratum. Strata with fewer than two
/// users in either group are reported as untestable.
pub fn stratified_tests(
    panel: &DailyPanel,
    treatment: &BTreeSet<UserId>,
    control: &BTreeSet<UserId>,
    strata: &BTreeMap<UserId, String>,
    alpha: f64,
) -> Result<BTreeMap<String, StratumResult>> {
    let mut split: BTreeMap<&str, (BTreeSet<UserId>, BTreeSet<UserId>)> = BTreeMap::new();
    for (users, is_treatment) in [(treatment, true), (control, false)] {
        for u in users {
            let s = strata.get(u).ok_or_else(|| Error::input(format!("user {u} has no stratum")))?;
            let entry = split.entry(s.as_str()).or_default();
            if is_treatment { &mut entry.0 } else { &mut entry.1 }.insert(u.clone());
        }
    }
    split
        .into_iter()
        .map(|(name, (t, c))| {
            let r = if t.len() < 2 || c.len() < 2 {
                StratumResult::Untestable { n_treatment: t.len(), n_control: c.len() }
            } else {
                StratumResult::Tested(daily_series_tests(panel, &t, &c, alpha)?)
            };
            Ok((name.to_string(), r))
        })
        .collect()
}

/// Splits users into `top` and `bottom` halves by a score (ties by id);
/// the top half gets the extra user when the count is odd.
pub fn median_split(scores: &BTreeMap<UserId, f64>) -> BTreeMap<UserId, String> {
    let mut ranked: Vec<(&UserId, f64)> = scores.iter().map(|(u, &s)| (u, s)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let top = ranked.len().div_ceil(2);
    ranked
        .into_iter()
        .enumerate()
        .map(|(k, (u, _))| (u.clone(), if k < top { "top" } else { "bottom" }.to_string()))
        .collect()
}
