//! Arm selection: Thompson sampling, UCB, and assignment probabilities.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use super::model::{ArmPosterior, BanditModel};
use crate::error::{Error, Result};
use crate::traits::{Day, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThompsonMethod {
    /// Noise precision from its Gamma marginal, then coefficients from the
    /// conditional Gaussian.
    TwoStep,
    /// Score drawn directly from the location-scale Student-t marginal.
    StudentT,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProbabilityMethod {
    MonteCarlo { draws: usize },
    Softmax { tau: f64 },
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub user_id: UserId,
    pub day: Day,
    pub chosen_arm: usize,
    pub arm_label: String,
    pub sampled_scores: Vec<f64>,
    pub assignment_probabilities: Option<Vec<f64>>,
}

impl Decision {
    pub fn from_scores(model: &BanditModel, user_id: UserId, day: Day, scores: Vec<f64>) -> Self {
        let chosen_arm = argmax(&scores);
        Self {
            user_id,
            day,
            chosen_arm,
            arm_label: model.arms[chosen_arm].label.clone(),
            sampled_scores: scores,
            assignment_probabilities: None,
        }
    }

    /// The same decision recorded against arm `k` instead.
    pub fn with_arm(mut self, model: &BanditModel, k: usize) -> Self {
        self.chosen_arm = k;
        self.arm_label = model.arms[k].label.clone();
        self
    }
}

fn sample_noise_precision<R: Rng + ?Sized>(arm: &ArmPosterior, rng: &mut R) -> f64 {
    Gamma::new(arm.a, 1.0 / arm.b).expect("posterior shape and rate are positive").sample(rng)
}

/// One draw of an arm's coefficient vector (two-step).
pub fn sample_theta<R: Rng + ?Sized>(arm: &ArmPosterior, rng: &mut R) -> DVector<f64> {
    let tau = sample_noise_precision(arm, rng);
    let z = DVector::from_fn(arm.dim(), |_, _| StandardNormal.sample(rng));
    // theta - mu = tau^-1/2 L^-T z has covariance (tau * precision)^-1.
    let l = arm.cholesky_l();
    let v = l.transpose().solve_upper_triangular(&z).expect("Cholesky factor has a positive diagonal");
    &arm.mu + v / tau.sqrt()
}

fn sample_score<R: Rng + ?Sized>(arm: &ArmPosterior, x: &DVector<f64>, method: ThompsonMethod, rng: &mut R) -> f64 {
    match method {
        ThompsonMethod::TwoStep => x.dot(&sample_theta(arm, rng)),
        ThompsonMethod::StudentT => {
            let scale = (arm.noise_variance() * arm.quad_form_inv(x)).sqrt();
            let t: f64 = StudentT::new(2.0 * arm.a).expect("positive degrees of freedom").sample(rng);
            arm.mean_score(x) + scale * t
        }
    }
}

/// Posterior score draws for every arm at context `x`.
pub fn sample_scores<R: Rng + ?Sized>(model: &BanditModel, x: &[f64], method: ThompsonMethod, rng: &mut R) -> Result<Vec<f64>> {
    let xv = model.context(x)?;
    Ok(model.arms.iter().map(|arm| sample_score(arm, &xv, method, rng)).collect())
}

/// Thompson sampling: the arm with the highest posterior draw.
pub fn thompson_sample_arm<R: Rng + ?Sized>(
    model: &BanditModel,
    user_id: UserId,
    day: Day,
    x: &[f64],
    method: ThompsonMethod,
    rng: &mut R,
) -> Result<Decision> {
    let scores = sample_scores(model, x, method, rng)?;
    Ok(Decision::from_scores(model, user_id, day, scores))
}

/// `x^T mu_k + alpha * sqrt(x^T precision_k^-1 x * b_k / a_k)` for each arm.
pub fn ucb_scores(model: &BanditModel, x: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::config(format!("alpha must be non-negative, got {alpha}")));
    }
    let xv = model.context(x)?;
    Ok(model
        .arms
        .iter()
        .map(|arm| {
            let bonus = if alpha == 0.0 { 0.0 } else { alpha * (arm.quad_form_inv(&xv) * arm.noise_variance()).sqrt() };
            arm.mean_score(&xv) + bonus
        })
        .collect())
}

pub fn ucb_select(model: &BanditModel, user_id: UserId, day: Day, x: &[f64], alpha: f64) -> Result<Decision> {
    let scores = ucb_scores(model, x, alpha)?;
    Ok(Decision::from_scores(model, user_id, day, scores))
}

/// Softmax of `values / tau`.
pub fn softmax(values: &[f64], tau: f64) -> Vec<f64> {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = values.iter().map(|v| ((v - m) / tau).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Probability that each arm is picked at context `x`.
pub fn arm_probability<R: Rng + ?Sized>(
    model: &BanditModel,
    x: &[f64],
    method: ProbabilityMethod,
    rng: &mut R,
) -> Result<Vec<f64>> {
    match method {
        ProbabilityMethod::MonteCarlo { draws } => {
            if draws < 1000 {
                return Err(Error::config(format!("Monte Carlo needs at least 1000 draws, got {draws}")));
            }
            let xv = model.context(x)?;
            let mut counts = vec![0usize; model.n_arms()];
            let mut scores = vec![0.0; model.n_arms()];
            for _ in 0..draws {
                for (s, arm) in scores.iter_mut().zip(&model.arms) {
                    *s = sample_score(arm, &xv, ThompsonMethod::StudentT, rng);
                }
                counts[argmax(&scores)] += 1;
            }
            Ok(counts.into_iter().map(|c| c as f64 / draws as f64).collect())
        }
        ProbabilityMethod::Softmax { tau } => {
            if !(tau > 0.0) {
                return Err(Error::config(format!("softmax temperature must be positive, got {tau}")));
            }
            let xv = model.context(x)?;
            let means: Vec<f64> = model.arms.iter().map(|a| a.mean_score(&xv)).collect();
            Ok(softmax(&means, tau))
        }
    }
}
