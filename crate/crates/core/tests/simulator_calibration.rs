mod common;

use std::collections::{BTreeMap, BTreeSet};

use nudge_core::impact::stats::ks_two_sample;
use nudge_core::impact::{daily_series_tests, median_split, stratified_tests, DailyPanel, StratumResult};
use nudge_core::rng::substream;
use nudge_core::simulator::{
    replicate_with, synth_population, EffectModel, Message, PerInteraction, Population, PopulationSpec, SimConfig,
    Simulation, Splits,
};
use nudge_core::traits::{ArmLabel, CohortRules, NudgePair, UserId};

fn certain_adoption(uplift: f64) -> EffectModel {
    EffectModel {
        immediate_uplift: uplift,
        adopt_probability: 1.0,
        interaction_multipliers: PerInteraction { opened: 1.0, closed: 1.0, ignored: 1.0 },
        ..Default::default()
    }
}

fn population(n_users: usize, history_days: i64, seed: u64) -> Population {
    let spec = PopulationSpec { n_users, history_days, ..Default::default() };
    synth_population(&spec, &mut substream(seed, "population")).unwrap()
}

fn message(pop: &Population, user: &UserId) -> Message {
    let pair = NudgePair { frequent: pop.items[0].id.clone(), infrequent: pop.items[1].id.clone() };
    Message { user_id: user.clone(), pair, arm: ArmLabel::Random }
}

#[test]
fn null_effect_leaves_weekly_spend_unchanged() {
    let effect = EffectModel::null();
    let (mut treated, mut control) = (Vec::new(), Vec::new());
    for rep in 0..200u64 {
        let pop = population(40, 20, rep);
        let mut sim = Simulation::new(&pop, &effect, rep);
        sim.advance_to(20);
        let users: Vec<UserId> = pop.users.iter().map(|u| u.id.clone()).collect();
        let msgs: Vec<Message> = users.iter().step_by(2).map(|u| message(&pop, u)).collect();
        let week = sim.step_week(&msgs).unwrap();
        assert_eq!(sim.logs.nudges.len(), 20);
        let mut spend: BTreeMap<&UserId, f64> = users.iter().map(|u| (u, 0.0)).collect();
        for e in &week.purchases {
            *spend.get_mut(&e.user_id).unwrap() += e.revenue;
        }
        for (k, u) in users.iter().enumerate() {
            if k % 2 == 0 { treated.push(spend[u]) } else { control.push(spend[u]) }
        }
    }
    assert!(ks_two_sample(&treated, &control).p_value > 0.01);
}

fn halves(pop: &Population, seed: u64) -> (BTreeSet<UserId>, BTreeSet<UserId>) {
    use rand::seq::SliceRandom;
    let mut ids: Vec<UserId> = pop.users.iter().map(|u| u.id.clone()).collect();
    ids.shuffle(&mut substream(seed, "split"));
    let half = ids.len() / 2;
    (ids[..half].iter().cloned().collect(), ids[half..].iter().cloned().collect())
}

#[test]
fn accumulated_significance_starts_with_the_uplift() {
    let (start, onset) = (60, 10);
    let pop = population(300, start, 8);
    let effect = certain_adoption(80.0);
    let (treated, control) = halves(&pop, 8);
    let mut sim = Simulation::new(&pop, &effect, 8);
    sim.advance_to(start);
    // Messages from experiment day onset - 1 land from day `onset` on.
    for day in start + 1..=start + 28 {
        sim.advance_to(day);
        if day >= start + onset - 1 {
            let msgs: Vec<Message> = treated.iter().map(|u| message(&pop, u)).collect();
            sim.send(day, &msgs).unwrap();
        }
    }
    let users: Vec<&UserId> = treated.iter().chain(&control).collect();
    let panel = DailyPanel::from_purchases(&sim.logs.purchases, users, start + 1, start + 28);
    let s = daily_series_tests(&panel, &treated, &control, 0.01).unwrap();
    let first = s.days.iter().position(|d| d.accumulated.as_ref().is_some_and(|t| t.significant)).expect("effect detected");
    assert!(first + 1 >= onset as usize, "significant from day {}", first + 1);
    assert!(s.days.last().unwrap().accumulated.as_ref().unwrap().significant);
}

#[test]
fn uplift_in_top_spenders_only_shows_in_that_stratum() {
    let start = 90;
    let pop = population(400, start, 9);
    let effect = certain_adoption(60.0);
    let (treated, control) = halves(&pop, 9);
    let mut sim = Simulation::new(&pop, &effect, 9);
    sim.advance_to(start);
    let scores: BTreeMap<UserId, f64> =
        pop.users.iter().map(|u| (u.id.clone(), sim.logs.purchases.revenue_between(&u.id, 0, start))).collect();
    let strata = median_split(&scores);
    for day in start..start + 28 {
        sim.advance_to(day);
        let msgs: Vec<Message> = treated.iter().filter(|u| strata[*u] == "top").map(|u| message(&pop, u)).collect();
        sim.send(day, &msgs).unwrap();
    }
    sim.advance_to(start + 28);
    let users: Vec<&UserId> = scores.keys().collect();
    let panel = DailyPanel::from_purchases(&sim.logs.purchases, users, start + 1, start + 28);
    let r = stratified_tests(&panel, &treated, &control, &strata, 0.05).unwrap();
    let last_significant = |s: &str| match &r[s] {
        StratumResult::Tested(x) => x.days.last().unwrap().accumulated.as_ref().unwrap().significant,
        StratumResult::Untestable { .. } => panic!("stratum {s} untestable"),
    };
    assert!(last_significant("top"));
    assert!(!last_significant("bottom"));
}

#[test]
fn lmm_interval_covers_the_true_uplift() {
    let mut cfg = SimConfig::default();
    cfg.effect = certain_adoption(15.0);
    cfg.design.cohort = CohortRules::open();
    cfg.design.adaptive_arms = vec![ArmLabel::Control, ArmLabel::Random];
    cfg.design.splits = Splits::default();
    let covered = replicate_with(&cfg, 100, 1000, |sim| {
        let r = nudge_core::simulator::analyze_result(&sim, &cfg.analysis)?;
        let fit = &r.lmm.expect("model fitted").full;
        let (lo, hi) = fit.conf_int("Nudged that week", 0.9).expect("nudge term");
        Ok((lo <= 15.0 && 15.0 <= hi, fit.coef("Nudged that week").unwrap()))
    })
    .unwrap();
    let hits = covered.iter().filter(|c| c.0).count();
    let est: Vec<f64> = covered.iter().map(|c| c.1).collect();
    let (m, sd) = common::mean_sd(&est);
    assert!(hits >= 85, "covered {hits}/100, mean estimate {m:.2} (sd {sd:.2})");
}
