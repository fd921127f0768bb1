//! How assignment probabilities respond to each contextual trait, and how
//! confident the bandit is in its best arm.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::BanditModel;
use super::policy::{arm_probability, softmax, ProbabilityMethod};
use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA_FACTOR: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityCategory {
    LargeNegative,
    MediumNegative,
    SmallNegative,
    Negligible,
    SmallPositive,
    MediumPositive,
    LargePositive,
}

impl SensitivityCategory {
    /// Buckets a score normalized to [-1, 1].
    pub fn from_normalized(s: f64) -> Self {
        use SensitivityCategory::*;
        let m = s.abs();
        let positive = s > 0.0;
        match m {
            m if m < 0.05 => Negligible,
            m if m < 0.35 => if positive { SmallPositive } else { SmallNegative },
            m if m < 0.70 => if positive { MediumPositive } else { MediumNegative },
            _ => if positive { LargePositive } else { LargeNegative },
        }
    }

    pub fn is_negligible(self) -> bool {
        self == SensitivityCategory::Negligible
    }

    pub fn as_str(self) -> &'static str {
        use SensitivityCategory::*;
        match self {
            LargeNegative => "large-",
            MediumNegative => "medium-",
            SmallNegative => "small-",
            Negligible => "negligible",
            SmallPositive => "small+",
            MediumPositive => "medium+",
            LargePositive => "large+",
        }
    }
}

impl fmt::Display for SensitivityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `S_lambda(v) = v * max(1 - lambda / |v|, 0)`.
pub fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    v * (1.0 - lambda / v.abs()).max(0.0)
}

/// Analytic Jacobian of the softmax assignment probabilities with respect
/// to the context: `out[a][b] = d p_a / d x_b`.
pub fn softmax_jacobian(model: &BanditModel, x: &[f64], tau: f64) -> Result<Vec<Vec<f64>>> {
    let xv = model.context(x)?;
    let means: Vec<f64> = model.arms.iter().map(|a| a.mean_score(&xv)).collect();
    let p = softmax(&means, tau);
    let d = model.dim();
    let avg: Vec<f64> = (0..d)
        .map(|b| model.arms.iter().zip(&p).map(|(arm, pk)| pk * arm.mu[b]).sum())
        .collect();
    Ok(model
        .arms
        .iter()
        .zip(&p)
        .map(|(arm, pa)| (0..d).map(|b| pa * (arm.mu[b] - avg[b]) / tau).collect())
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEntry {
    pub arm: String,
    pub trait_name: String,
    /// Plain mean of the derivative over the sample.
    pub mean_derivative: f64,
    /// Mean of the soft-thresholded derivative.
    pub soft_mean: f64,
    pub normalized: f64,
    pub category: SensitivityCategory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub entries: Vec<SensitivityEntry>,
}

impl SensitivityReport {
    pub fn get(&self, arm: &str, trait_name: &str) -> Option<&SensitivityEntry> {
        self.entries.iter().find(|e| e.arm == arm && e.trait_name == trait_name)
    }
}

/// Soft-thresholded mean sensitivity of every arm to every trait over a
/// sample of contexts. The threshold for (arm, trait) is `lambda_factor`
/// times the sample standard deviation of that derivative.
pub fn sensitivity(
    model: &BanditModel,
    contexts: &[Vec<f64>],
    trait_names: &[String],
    lambda_factor: f64,
    tau: f64,
) -> Result<SensitivityReport> {
    if contexts.len() < 2 {
        return Err(Error::degenerate("sensitivity needs at least two contexts"));
    }
    if trait_names.len() != model.dim() {
        return Err(Error::input(format!("{} trait names for a {}-dimensional model", trait_names.len(), model.dim())));
    }
    if !(tau > 0.0) || !(lambda_factor >= 0.0) {
        return Err(Error::config("tau must be positive and lambda_factor non-negative"));
    }
    let jac: Vec<Vec<Vec<f64>>> = contexts.iter().map(|x| softmax_jacobian(model, x, tau)).collect::<Result<_>>()?;
    let n = contexts.len() as f64;

    let mut entries = Vec::with_capacity(model.n_arms() * model.dim());
    for (a, arm) in model.arms.iter().enumerate() {
        for (b, name) in trait_names.iter().enumerate() {
            let z: Vec<f64> = jac.iter().map(|j| j[a][b]).collect();
            let mean = z.iter().sum::<f64>() / n;
            let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let lambda = lambda_factor * sd;
            let soft_mean = z.iter().map(|&v| soft_threshold(v, lambda)).sum::<f64>() / n;
            entries.push(SensitivityEntry {
                arm: arm.label.clone(),
                trait_name: name.clone(),
                mean_derivative: mean,
                soft_mean,
                normalized: 0.0,
                category: SensitivityCategory::Negligible,
            });
        }
    }
    let scale = entries.iter().map(|e| e.soft_mean.abs()).fold(0.0, f64::max);
    for e in &mut entries {
        e.normalized = if scale > 0.0 { e.soft_mean / scale } else { 0.0 };
        e.category = SensitivityCategory::from_normalized(e.normalized);
    }
    Ok(SensitivityReport { entries })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestArm {
    pub best_arm: usize,
    pub probabilities: Vec<f64>,
    /// Gap between the best and second-best assignment probabilities.
    pub confidence: f64,
}

pub fn best_arm_confidence<R: Rng + ?Sized>(
    model: &BanditModel,
    contexts: &[Vec<f64>],
    draws: usize,
    rng: &mut R,
) -> Result<Vec<BestArm>> {
    if contexts.is_empty() {
        return Err(Error::input("no contexts given"));
    }
    contexts
        .iter()
        .map(|x| {
            let p = arm_probability(model, x, ProbabilityMethod::MonteCarlo { draws }, rng)?;
            let best = super::policy::argmax(&p);
            let second = p
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != best)
                .map(|(_, &v)| v)
                .fold(0.0, f64::max);
            Ok(BestArm { best_arm: best, confidence: p[best] - second, probabilities: p })
        })
        .collect()
}
