use std::collections::BTreeSet;

use super::*;
use crate::impact::Group;
use crate::traits::{ArmLabel, CohortRules};

fn small() -> SimConfig {
    let mut c = SimConfig::default();
    c.population.n_users = 80;
    c.design.weeks = 4;
    c
}

#[test]
fn same_seed_same_run() {
    let c = small();
    let (a, b) = (c.simulate(9).unwrap(), c.simulate(9).unwrap());
    assert_eq!(a.logs.purchases.events(), b.logs.purchases.events());
    assert_eq!(a.logs.nudges.events(), b.logs.nudges.events());
    assert_eq!(a.decisions, b.decisions);
    assert_eq!(a.groups, b.groups);
    assert_ne!(c.simulate(10).unwrap().logs.purchases.events(), a.logs.purchases.events());
}

#[test]
fn zero_weeks_is_a_vacuous_run() {
    let mut c = small();
    c.design.weeks = 0;
    let s = c.simulate(1).unwrap();
    assert!(s.logs.nudges.is_empty());
    assert!(s.decisions.is_empty() && s.rewards.is_empty());
    assert!(s.logs.purchases.events().iter().all(|e| e.day <= s.window.start_day));
}

#[test]
fn invariants_of_a_run() {
    let c = small();
    let s = c.simulate(4).unwrap();
    assert_eq!(s.revenue_generated, s.logs.purchases.total_revenue());
    for n in s.logs.nudges.events() {
        let g = s.groups.get(&n.user_id).copied();
        assert!(matches!(g, Some(Group::Adaptive | Group::NonAdaptive)), "{n:?}");
        assert!(n.day > s.window.start_day - 7 && n.day < s.window.last_day());
    }
    // Every window closed, so every decision got its reward.
    assert_eq!(s.rewards.len(), s.decisions.len());
    // The decision log and the nudge log agree on who was messaged.
    let messaged: BTreeSet<_> = s
        .logs
        .nudges
        .events()
        .iter()
        .filter(|n| s.groups[&n.user_id] == Group::Adaptive)
        .map(|n| (n.user_id.clone(), n.day, n.arm_label.as_str().to_string()))
        .collect();
    let decided: BTreeSet<_> = s
        .decisions
        .iter()
        .filter(|d| d.arm_label != "control")
        .map(|d| (d.user_id.clone(), d.day, d.arm_label.clone()))
        .collect();
    assert_eq!(messaged, decided);
}

#[test]
fn design_errors_come_before_simulation() {
    let mut c = small();
    c.design.splits.adaptive = 0.9;
    assert!(matches!(c.simulate(1), Err(crate::Error::Config(_))));
}

#[test]
fn fixed_delay_lands_two_weeks_later() {
    let mut c = small();
    c.effect = EffectModel { adopt_probability: 1.0, delay_weeks: vec![0.0, 0.0, 1.0], ..Default::default() };
    let s = c.simulate(2).unwrap();
    assert!(!s.adoptions.is_empty());
    for a in &s.adoptions {
        assert_eq!(a.purchase_day - a.nudge_day, 15);
        let days = s.logs.purchases.purchase_days(&a.user_id, &a.item_id);
        assert!(days.contains(&a.purchase_day));
    }
    // Adoptions due after the end are dropped.
    assert!(s.adoptions.iter().all(|a| a.purchase_day <= s.window.last_day()));
}

#[test]
fn micro_randomized_rate() {
    let mut c = SimConfig::default();
    c.population.n_users = 1000;
    c.design.splits = Splits { pure_control: 0.0, adaptive: 1.0, non_adaptive: 0.0 };
    c.design.cohort = CohortRules::open();
    c.design.adaptive_arms = vec![ArmLabel::Control, ArmLabel::Random];
    c.design.scheme = AssignmentScheme::MicroRandomized { p: 0.5 };
    let s = c.simulate(3).unwrap();
    let n = s.decisions.len() as f64;
    assert!(n >= 9000.0);
    let rate = s.decisions.iter().filter(|d| d.arm_label != "control").count() as f64 / n;
    assert!((rate - 0.5).abs() < 0.02, "{rate}");
    assert_eq!(s.decisions[0].assignment_probabilities.as_deref(), Some(&[0.5, 0.5][..]));
}

#[test]
fn default_three_arm_design() {
    let d = ExperimentDesign::default();
    assert_eq!((d.splits.non_adaptive, d.splits.adaptive, d.splits.pure_control), (0.05, 0.60, 0.35));
    assert_eq!(d.adaptive_arms, vec![ArmLabel::Control, ArmLabel::Personalized, ArmLabel::Random]);
}

#[test]
fn single_replication_matches_direct_run() {
    let c = small();
    let reps = replicate(&c, 1, 77).unwrap();
    let direct = analyze_result(&c.simulate(77).unwrap(), &c.analysis).unwrap();
    assert_eq!(reps.len(), 1);
    assert_eq!(reps[0], direct);
    assert!(replicate(&c, 0, 1).is_err());
}

#[test]
fn step_week_reports_the_next_seven_days() {
    let c = small();
    let pop = synth_population(&c.population, &mut crate::rng::substream(1, "population")).unwrap();
    let effect = EffectModel { adopt_probability: 1.0, ..Default::default() };
    let mut sim = Simulation::new(&pop, &effect, 1);
    sim.advance_to(30);
    let pair = crate::traits::NudgePair { frequent: item_id(0), infrequent: item_id(1) };
    let msg = Message { user_id: user_id(3), pair, arm: ArmLabel::Random };
    let week = sim.step_week(&[msg]).unwrap();
    assert_eq!(sim.today, 37);
    assert!(week.purchases.iter().all(|e| (31..=37).contains(&e.day)));
    assert!(week.purchases.iter().any(|e| e.user_id == user_id(3) && e.item_id == item_id(1) && e.day == 31));
    let ghost = Message { user_id: "nobody".into(), pair: crate::traits::NudgePair { frequent: item_id(0), infrequent: item_id(1) }, arm: ArmLabel::Random };
    assert!(sim.step_week(&[ghost]).is_err());
}
