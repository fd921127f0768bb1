//! Whether recommended infrequent items were later bought, and how users
//! interacted with the messages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::traits::{Day, Interaction, NudgeEvent, PurchaseLog};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionSuccess {
    pub interaction: Interaction,
    pub messages: usize,
    pub successes: usize,
    /// Fraction of all successes that had this interaction.
    pub share_of_successes: f64,
    /// Successes over messages with this interaction.
    pub success_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessSummary {
    pub messages: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Ordered opened, closed, ignored.
    pub by_interaction: Vec<InteractionSuccess>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessBreakdown {
    pub overall: SuccessSummary,
    pub by_arm: BTreeMap<String, SuccessSummary>,
}

impl SuccessBreakdown {
    pub fn overall_success_rate(&self) -> f64 {
        self.overall.success_rate
    }
}

#[derive(Default)]
struct Tally {
    messages: [usize; 3],
    successes: [usize; 3],
}

impl Tally {
    fn add(&mut self, i: Interaction, ok: bool) {
        self.messages[i.index()] += 1;
        self.successes[i.index()] += ok as usize;
    }

    fn summary(&self) -> SuccessSummary {
        let messages: usize = self.messages.iter().sum();
        let successes: usize = self.successes.iter().sum();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        SuccessSummary {
            messages,
            successes,
            success_rate: ratio(successes, messages),
            by_interaction: Interaction::ALL
                .iter()
                .map(|&i| InteractionSuccess {
                    interaction: i,
                    messages: self.messages[i.index()],
                    successes: self.successes[i.index()],
                    share_of_successes: ratio(self.successes[i.index()], successes),
                    success_rate: ratio(self.successes[i.index()], self.messages[i.index()]),
                })
                .collect(),
        }
    }
}

/// A message succeeds when its user buys the infrequent item on a day in
/// `(nudge day, last_day]`. Control rows (no pair) are not messages.
pub fn success_analysis<'a>(nudges: impl IntoIterator<Item = &'a NudgeEvent>, log: &PurchaseLog, last_day: Day) -> SuccessBreakdown {
    let mut overall = Tally::default();
    let mut by_arm: BTreeMap<String, Tally> = BTreeMap::new();
    for n in nudges {
        let Some(pair) = &n.pair else { continue };
        let days = log.purchase_days(&n.user_id, &pair.infrequent);
        let first_after = days.partition_point(|&d| d <= n.day);
        let ok = days.get(first_after).is_some_and(|&d| d <= last_day);
        overall.add(n.interaction, ok);
        by_arm.entry(n.arm_label.as_str().to_string()).or_default().add(n.interaction, ok);
    }
    SuccessBreakdown { overall: overall.summary(), by_arm: by_arm.iter().map(|(k, t)| (k.clone(), t.summary())).collect() }
}
