//! Ground-truth response of a user to a message.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traits::{ArmLabel, Interaction};

/// Per-interaction values, in the order opened, closed, ignored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerInteraction {
    pub opened: f64,
    pub closed: f64,
    pub ignored: f64,
}

impl PerInteraction {
    pub fn get(&self, i: Interaction) -> f64 {
        match i {
            Interaction::Opened => self.opened,
            Interaction::Closed => self.closed,
            Interaction::Ignored => self.ignored,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffectModel {
    /// Revenue of one adoption purchase (one unit of the infrequent item).
    pub immediate_uplift: f64,
    pub adopt_probability: f64,
    /// `delay_weeks[k]` is the chance an adoption lands `k` weeks late.
    pub delay_weeks: Vec<f64>,
    /// Adoption probability factor per earlier message to the same user.
    pub novelty_decay: f64,
    pub interaction_probabilities: PerInteraction,
    pub interaction_multipliers: PerInteraction,
    pub personalized_multiplier: f64,
    pub random_multiplier: f64,
}

impl Default for EffectModel {
    fn default() -> Self {
        Self {
            immediate_uplift: 15.0,
            adopt_probability: 0.3,
            delay_weeks: vec![1.0],
            novelty_decay: 1.0,
            interaction_probabilities: PerInteraction { opened: 0.10, closed: 0.35, ignored: 0.55 },
            interaction_multipliers: PerInteraction { opened: 1.5, closed: 1.2, ignored: 0.8 },
            personalized_multiplier: 1.0,
            random_multiplier: 1.0,
        }
    }
}

/// What happened after one message.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Response {
    pub interaction: Interaction,
    /// Weeks of delay if the user adopts.
    pub adoption_delay: Option<u32>,
}

impl EffectModel {
    /// No user ever adopts.
    pub fn null() -> Self {
        Self { adopt_probability: 0.0, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.immediate_uplift >= 0.0 && self.immediate_uplift.is_finite()) {
            return Err(Error::config("immediate_uplift must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.adopt_probability) {
            return Err(Error::config("adopt_probability must be in [0, 1]"));
        }
        if !(self.novelty_decay > 0.0 && self.novelty_decay <= 1.0) {
            return Err(Error::config("novelty_decay must be in (0, 1]"));
        }
        let dist = |name: &str, p: &[f64]| -> Result<()> {
            if p.is_empty() || p.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!("{name} must be probabilities summing to 1")));
            }
            Ok(())
        };
        dist("delay_weeks", &self.delay_weeks)?;
        let ip = self.interaction_probabilities;
        dist("interaction_probabilities", &[ip.opened, ip.closed, ip.ignored])?;
        let m = self.interaction_multipliers;
        for v in [m.opened, m.closed, m.ignored, self.personalized_multiplier, self.random_multiplier] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config("adoption multipliers must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Chance of adoption for a message on `arm` with `interaction`, after
    /// `prior_exposures` earlier messages. Capped at 1.
    pub fn adoption_probability(&self, arm: ArmLabel, interaction: Interaction, prior_exposures: u32) -> f64 {
        let arm_mult = match arm {
            ArmLabel::Personalized => self.personalized_multiplier,
            ArmLabel::Random => self.random_multiplier,
            ArmLabel::Control => 0.0,
        };
        let p = self.adopt_probability
            * self.interaction_multipliers.get(interaction)
            * arm_mult
            * self.novelty_decay.powi(prior_exposures as i32);
        p.min(1.0)
    }

    pub fn respond<R: Rng + ?Sized>(&self, arm: ArmLabel, prior_exposures: u32, rng: &mut R) -> Response {
        let ip = self.interaction_probabilities;
        let u: f64 = rng.random();
        let interaction = if u < ip.opened {
            Interaction::Opened
        } else if u < ip.opened + ip.closed {
            Interaction::Closed
        } else {
            Interaction::Ignored
        };
        let p = self.adoption_probability(arm, interaction, prior_exposures);
        let adopt = p > 0.0 && rng.random::<f64>() < p;
        let adoption_delay = adopt.then(|| {
            let v: f64 = rng.random();
            let mut acc = 0.0;
            for (k, &pk) in self.delay_weeks.iter().enumerate() {
                acc += pk;
                if v < acc {
                    return k as u32;
                }
            }
            (self.delay_weeks.len() - 1) as u32
        });
        Response { interaction, adoption_delay }
    }
}
