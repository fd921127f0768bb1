//! Weekly panels drawn straight from the random-intercept model, with known
//! coefficients.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impact::{Group, Term, WeeklyObservation};
use crate::traits::{ArmLabel, UserId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelSpec {
    pub n_users: usize,
    pub n_weeks: u32,
    /// Coefficients of `Term::standard()`, in that order.
    pub beta: Vec<f64>,
    pub sigma_u: f64,
    pub sigma_e: f64,
    /// Share of users in the adaptive group; the rest are pure control.
    pub adaptive_fraction: f64,
    /// Weekly chance an adaptive user is nudged.
    pub nudge_probability: f64,
}

impl Default for PanelSpec {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_weeks: 10,
            beta: vec![100.0, 10.0, 15.0, 50.0, -1.0, 0.5],
            sigma_u: 20.0,
            sigma_e: 30.0,
            adaptive_fraction: 0.6,
            nudge_probability: 0.5,
        }
    }
}

impl PanelSpec {
    pub fn terms() -> Vec<Term> {
        Term::standard()
    }

    /// True coefficient of the term labelled `label`.
    pub fn truth(&self, label: &str) -> Option<f64> {
        Self::terms().iter().position(|t| t.label() == label).map(|k| self.beta[k])
    }
}

/// Draws a panel: `y = sum_k beta_k * term_k + u_i + e_it` with
/// `u_i ~ N(0, sigma_u^2)`, `e_it ~ N(0, sigma_e^2)` and uniform baselines.
pub fn synthetic_panel<R: Rng + ?Sized>(spec: &PanelSpec, rng: &mut R) -> Result<Vec<WeeklyObservation>> {
    let terms = PanelSpec::terms();
    if spec.beta.len() != terms.len() {
        return Err(Error::config(format!("beta needs {} coefficients", terms.len())));
    }
    if !(spec.sigma_u >= 0.0 && spec.sigma_e >= 0.0) {
        return Err(Error::config("panel standard deviations must be non-negative"));
    }
    let u_dist = Normal::new(0.0, spec.sigma_u).map_err(|e| Error::config(e.to_string()))?;
    let e_dist = Normal::new(0.0, spec.sigma_e).map_err(|e| Error::config(e.to_string()))?;
    let n_adaptive = (spec.adaptive_fraction * spec.n_users as f64).round() as usize;
    let mut out = Vec::with_capacity(spec.n_users * spec.n_weeks as usize);
    for i in 0..spec.n_users {
        let group = if i < n_adaptive { Group::Adaptive } else { Group::PureControl };
        let u = u_dist.sample(rng);
        let baseline: f64 = rng.random();
        for week in 1..=spec.n_weeks {
            let nudged = if group == Group::Adaptive {
                Some(if rng.random::<f64>() < spec.nudge_probability { ArmLabel::Personalized } else { ArmLabel::Control })
            } else {
                None
            };
            let mut o = WeeklyObservation { user: UserId::new(format!("u{i:04}")), week, y: 0.0, baseline, group, nudged };
            let mean: f64 = terms.iter().zip(&spec.beta).map(|(t, b)| b * t.value(&o)).sum();
            o.y = mean + u + e_dist.sample(rng);
            out.push(o);
        }
    }
    Ok(out)
}
