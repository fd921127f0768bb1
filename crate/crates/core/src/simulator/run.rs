//! Day-by-day execution of an experiment on a synthetic population.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::design::{assign_groups, AssignmentScheme, ExperimentDesign};
use super::effect::EffectModel;
use super::population::{DayEvents, Population};
use crate::bandit::{thompson_sample_arm, BanditModel, Decision, LoggedDecision};
use crate::error::{Error, Result};
use crate::impact::{members, Group, GroupMap, Window};
use crate::itempair::{generate_candidate_pairs, random_pair, recommend, CandidateList, StockMap};
use crate::rng::{substream, SimRng};
use crate::traits::{
    compute_contexts, compute_reward, eligible_cohort, ArmLabel, Day, ItemId, Logs, NudgeEvent, NudgePair,
    PurchaseEvent, PurchaseLog, UserId,
};

/// A message about to be sent.
#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub user_id: UserId,
    pub pair: NudgePair,
    pub arm: ArmLabel,
}

/// Ground-truth record of one adoption purchase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adoption {
    pub user_id: UserId,
    pub item_id: ItemId,
    pub nudge_day: Day,
    pub purchase_day: Day,
}

/// Running state: logs so far plus scheduled adoption purchases.
pub struct Simulation<'a> {
    pop: &'a Population,
    effect: &'a EffectModel,
    seed: u64,
    pub logs: Logs,
    /// Last simulated day, `-1` before the first.
    pub today: Day,
    pending: BTreeMap<Day, Vec<PurchaseEvent>>,
    exposures: BTreeMap<UserId, u32>,
    rng: SimRng,
    pub adoptions: Vec<Adoption>,
    /// Running sum of every generated row's revenue.
    pub revenue_generated: f64,
}

impl<'a> Simulation<'a> {
    pub fn new(pop: &'a Population, effect: &'a EffectModel, seed: u64) -> Self {
        Self {
            pop,
            effect,
            seed,
            logs: Logs::default(),
            today: -1,
            pending: BTreeMap::new(),
            exposures: BTreeMap::new(),
            rng: substream(seed, "effects"),
            adoptions: Vec::new(),
            revenue_generated: 0.0,
        }
    }

    /// Simulates every day after `today` up to and including `day`.
    pub fn advance_to(&mut self, day: Day) {
        while self.today < day {
            self.today += 1;
            let DayEvents { purchases, logins } = self.pop.baseline_day(self.seed, self.today);
            let extra = self.pending.remove(&self.today).unwrap_or_default();
            for e in purchases.into_iter().chain(extra) {
                self.revenue_generated += e.revenue;
                self.logs.purchases.push(e);
            }
            for e in logins {
                self.logs.logins.push(e);
            }
        }
    }

    /// Sends messages on `day` (which must be today): samples each user's
    /// interaction and schedules adoption purchases.
    pub fn send(&mut self, day: Day, messages: &[Message]) -> Result<()> {
        if day != self.today {
            return Err(Error::input(format!("messages for day {day} sent on day {}", self.today)));
        }
        for m in messages {
            if self.pop.user(&m.user_id).is_none() {
                return Err(Error::input(format!("message for unknown user {}", m.user_id)));
            }
            let seen = self.exposures.entry(m.user_id.clone()).or_default();
            let r = self.effect.respond(m.arm, *seen, &mut self.rng);
            *seen += 1;
            self.logs
                .nudges
                .push(NudgeEvent::new(m.user_id.clone(), day, Some(m.pair.clone()), m.arm, r.interaction)?);
            if let Some(delay) = r.adoption_delay {
                let when = day + 1 + 7 * i64::from(delay);
                let e = PurchaseEvent::new(m.user_id.clone(), m.pair.infrequent.clone(), when, 1, self.effect.immediate_uplift)?;
                self.pending.entry(when).or_default().push(e);
                self.adoptions.push(Adoption {
                    user_id: m.user_id.clone(),
                    item_id: m.pair.infrequent.clone(),
                    nudge_day: day,
                    purchase_day: when,
                });
            }
        }
        Ok(())
    }

    /// Sends `messages` today, then simulates the following seven days and
    /// returns what happened in them.
    pub fn step_week(&mut self, messages: &[Message]) -> Result<DayEvents> {
        let (p0, l0) = (self.logs.purchases.len(), self.logs.logins.events().len());
        self.send(self.today, messages)?;
        self.advance_to(self.today + 7);
        Ok(DayEvents {
            purchases: self.logs.purchases.events()[p0..].to_vec(),
            logins: self.logs.logins.events()[l0..].to_vec(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub user_id: UserId,
    pub decision_day: Day,
    pub arm_label: String,
    pub reward: f64,
}

pub struct SimResult {
    pub seed: u64,
    pub window: Window,
    pub logs: Logs,
    pub groups: GroupMap,
    pub decisions: Vec<Decision>,
    pub rewards: Vec<RewardRecord>,
    pub adoptions: Vec<Adoption>,
    pub model: Option<BanditModel>,
    /// Contexts of the adaptive group at the last decision, for sensitivity.
    pub last_contexts: Vec<Vec<f64>>,
    pub trait_names: Vec<String>,
    pub ground_truth: EffectModel,
    pub revenue_generated: f64,
}

impl SimResult {
    pub fn cumulative_reward(&self) -> f64 {
        self.rewards.iter().map(|r| r.reward).sum()
    }

    pub fn logged_decisions(&self) -> Vec<LoggedDecision> {
        self.decisions
            .iter()
            .map(|d| LoggedDecision {
                user_id: d.user_id.clone(),
                day: d.day,
                arm_label: d.arm_label.clone(),
                scores: d.sampled_scores.clone(),
            })
            .collect()
    }
}

struct PendingReward {
    user: UserId,
    arm: usize,
    x: Vec<f64>,
    day: Day,
}

/// The pair member the user has bought on fewer days is the infrequent one;
/// ties keep the pair's order.
fn orient(log: &PurchaseLog, user: &UserId, a: ItemId, b: ItemId) -> NudgePair {
    if log.purchase_days(user, &a).len() < log.purchase_days(user, &b).len() {
        NudgePair { frequent: b, infrequent: a }
    } else {
        NudgePair { frequent: a, infrequent: b }
    }
}

fn random_message<R: Rng + ?Sized>(
    log: &PurchaseLog,
    user: &UserId,
    catalog: &[ItemId],
    stock: &StockMap,
    rng: &mut R,
) -> Option<NudgePair> {
    random_pair(catalog, stock, rng).ok().map(|p| orient(log, user, p.item_i, p.item_j))
}

fn nudge_arm_indices(model: &BanditModel) -> Vec<usize> {
    (0..model.n_arms()).filter(|&k| model.arms[k].label != ArmLabel::Control.as_str()).collect()
}

/// Arm probabilities of a randomized scheme, in model order.
fn scheme_probabilities(model: &BanditModel, scheme: AssignmentScheme) -> Option<Vec<f64>> {
    let n = model.n_arms();
    match scheme {
        AssignmentScheme::Adaptive => None,
        AssignmentScheme::PureRandom => Some(vec![1.0 / n as f64; n]),
        AssignmentScheme::MicroRandomized { p } => {
            let nudge = nudge_arm_indices(model);
            Some(
                (0..n)
                    .map(|k| if nudge.contains(&k) { p / nudge.len() as f64 } else { 1.0 - p })
                    .collect(),
            )
        }
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Runs `design` on `pop`. The experiment starts on the last history day;
/// week `w` has its decision on `design.decision_day(start, w)` and its
/// reward over the following `reward_window_days`.
pub fn run_experiment(design: &ExperimentDesign, pop: &Population, effect: &EffectModel, seed: u64) -> Result<SimResult> {
    design.validate()?;
    effect.validate()?;
    pop.spec.validate()?;
    let start = pop.spec.history_days;
    let window = Window { start_day: start, n_weeks: design.weeks };
    let mut sim = Simulation::new(pop, effect, seed);
    sim.advance_to(start);

    let cohort = eligible_cohort(&sim.logs.purchases, &sim.logs.logins, start, &design.cohort)?;
    if cohort.len() < 2 {
        return Err(Error::degenerate(format!("only {} eligible users", cohort.len())));
    }
    let groups = assign_groups(&cohort, &design.splits, &mut substream(seed, "groups"));
    let adaptive: BTreeSet<UserId> = members(&groups, Group::Adaptive).into_iter().collect();
    let non_adaptive = members(&groups, Group::NonAdaptive);

    let dim = design.context.dim();
    let labels: Vec<&str> = design.adaptive_arms.iter().map(|a| a.as_str()).collect();
    let mut model = if adaptive.is_empty() {
        None
    } else {
        Some(BanditModel::new(&labels, design.bandit.prior(dim))?)
    };
    let use_personalized = design.adaptive_arms.contains(&ArmLabel::Personalized);
    let catalog = pop.catalog();
    let months = design.candidates.window_months;

    let mut decide_rng = substream(seed, "decisions");
    let mut pair_rng = substream(seed, "pairs");
    let mut pending: Vec<PendingReward> = Vec::new();
    let mut decisions = Vec::new();
    let mut rewards = Vec::new();
    let mut last_contexts = Vec::new();

    let mut close_rewards = |sim: &Simulation<'_>, model: &mut Option<BanditModel>, pending: &mut Vec<PendingReward>, upto: Day| -> Result<()> {
        let (due, rest): (Vec<_>, Vec<_>) = pending.drain(..).partition(|p| p.day + design.reward_window_days <= upto);
        *pending = rest;
        if let Some(m) = model.as_mut() {
            for p in due {
                let r = compute_reward(&sim.logs.purchases, &p.user, p.day, design.reward_window_days)?;
                m.update(p.arm, &p.x, r.reward)?;
                rewards.push(RewardRecord {
                    user_id: p.user,
                    decision_day: p.day,
                    arm_label: m.arms[p.arm].label.clone(),
                    reward: r.reward,
                });
            }
        }
        Ok(())
    };

    let mut last_decision = start;
    for week in 1..=design.weeks {
        let t = design.decision_day(start, week);
        last_decision = t;
        sim.advance_to(t);
        close_rewards(&sim, &mut model, &mut pending, t)?;
        let stock = pop.stock(seed, u64::from(week));
        let mut messages = Vec::new();

        if let Some(m) = model.as_ref() {
            let contexts = compute_contexts(&sim.logs, t, &design.context, &adaptive)?;
            let candidates: Option<CandidateList> = if use_personalized {
                Some(generate_candidate_pairs(&sim.logs.purchases, &stock, t, &design.candidates)?)
            } else {
                None
            };
            let probs = scheme_probabilities(m, design.scheme);
            last_contexts.clear();
            for user in &adaptive {
                let x = contexts[user].values.clone();
                let chosen = match &probs {
                    None => thompson_sample_arm(m, user.clone(), t, &x, design.bandit.thompson, &mut decide_rng)?,
                    Some(p) => Decision::from_scores(m, user.clone(), t, p.clone()).with_arm(m, sample_index(p, &mut decide_rng)),
                };
                let arm: ArmLabel = chosen.arm_label.parse()?;
                let pair = match arm {
                    ArmLabel::Control => None,
                    ArmLabel::Personalized => candidates
                        .as_ref()
                        .and_then(|c| recommend(c, &sim.logs.purchases, user, t, months, &mut pair_rng))
                        .map(|r| NudgePair { frequent: r.frequent_item, infrequent: r.infrequent_item }),
                    ArmLabel::Random => random_message(&sim.logs.purchases, user, &catalog, &stock, &mut pair_rng),
                };
                // Nothing to send falls back to the control arm.
                let delivered = if pair.is_some() { arm } else { ArmLabel::Control };
                let idx = m.arm_index(delivered.as_str()).expect("control arm present");
                let mut decision = chosen.with_arm(m, idx);
                if probs.is_some() {
                    decision.assignment_probabilities = probs.clone();
                }
                if let Some(pair) = pair {
                    messages.push(Message { user_id: user.clone(), pair, arm: delivered });
                }
                pending.push(PendingReward { user: user.clone(), arm: idx, x: x.clone(), day: t });
                last_contexts.push(x);
                decisions.push(decision);
            }
        }
        for user in &non_adaptive {
            if let Some(pair) = random_message(&sim.logs.purchases, user, &catalog, &stock, &mut pair_rng) {
                messages.push(Message { user_id: user.clone(), pair, arm: ArmLabel::Random });
            }
        }
        sim.send(t, &messages)?;
    }
    if design.weeks > 0 {
        let end = (last_decision + design.reward_window_days).max(window.last_day());
        sim.advance_to(end);
        close_rewards(&sim, &mut model, &mut pending, end)?;
    }

    let today = sim.today;
    Ok(SimResult {
        seed,
        window,
        groups,
        decisions,
        rewards,
        adoptions: sim.adoptions.into_iter().filter(|a| a.purchase_day <= today).collect(),
        model,
        last_contexts,
        trait_names: design.context.traits.clone(),
        ground_truth: effect.clone(),
        revenue_generated: sim.revenue_generated,
        logs: sim.logs,
    })
}
