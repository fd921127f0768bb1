//! A linear contextual bandit environment with a known effect structure,
//! used to check what the sensitivity analysis recovers.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::bandit::{thompson_sample_arm, BanditModel, Prior, ThompsonMethod, CONTROL_ARM};
use crate::error::{Error, Result};
use crate::traits::UserId;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearEnv {
    pub arms: Vec<String>,
    pub trait_names: Vec<String>,
    /// One coefficient vector per arm.
    pub theta: Vec<Vec<f64>>,
    pub noise_sd: f64,
}

impl LinearEnv {
    /// Control against one nudge arm whose advantage is
    /// `effect * (signal - 0.5)`; `n_noise` further traits have no effect.
    /// Context is `[1, signal, noise...]` with uniform traits.
    pub fn single_trait(effect: f64, n_noise: usize, noise_sd: f64) -> Self {
        let dim = 2 + n_noise;
        let mut nudge = vec![0.0; dim];
        nudge[0] = -0.5 * effect;
        nudge[1] = effect;
        let mut trait_names = vec!["intercept".to_string(), "signal".to_string()];
        trait_names.extend((1..=n_noise).map(|k| format!("noise_{k}")));
        Self {
            arms: vec![CONTROL_ARM.to_string(), "nudge".to_string()],
            trait_names,
            theta: vec![vec![0.0; dim], nudge],
            noise_sd,
        }
    }

    pub fn dim(&self) -> usize {
        self.trait_names.len()
    }

    pub fn context<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        std::iter::once(1.0).chain((1..self.dim()).map(|_| rng.random::<f64>())).collect()
    }

    pub fn mean_reward(&self, arm: usize, x: &[f64]) -> f64 {
        self.theta[arm].iter().zip(x).map(|(t, v)| t * v).sum()
    }

    pub fn reward<R: Rng + ?Sized>(&self, arm: usize, x: &[f64], rng: &mut R) -> f64 {
        let noise = Normal::new(0.0, self.noise_sd).map_or(0.0, |n| n.sample(rng));
        self.mean_reward(arm, x) + noise
    }
}

pub struct LinearRun {
    pub model: BanditModel,
    pub cumulative_reward: f64,
    /// Contexts of the last `keep` rounds.
    pub contexts: Vec<Vec<f64>>,
}

/// Thompson sampling for `rounds` rounds, one fresh context per round.
pub fn run_linear_bandit<R: Rng + ?Sized>(
    env: &LinearEnv,
    rounds: usize,
    keep: usize,
    method: ThompsonMethod,
    rng: &mut R,
) -> Result<LinearRun> {
    if !(env.noise_sd >= 0.0) || env.theta.len() != env.arms.len() || env.theta.iter().any(|t| t.len() != env.dim()) {
        return Err(Error::config("inconsistent linear environment"));
    }
    let mut model = BanditModel::new(&env.arms, Prior::standard(env.dim()))?;
    let mut total = 0.0;
    let mut contexts = Vec::with_capacity(keep.min(rounds));
    for round in 0..rounds {
        let x = env.context(rng);
        let d = thompson_sample_arm(&model, UserId::new("sim"), round as i64, &x, method, rng)?;
        let r = env.reward(d.chosen_arm, &x, rng);
        total += r;
        model.update(d.chosen_arm, &x, r)?;
        if round + keep >= rounds {
            contexts.push(x);
        }
    }
    Ok(LinearRun { model, cumulative_reward: total, contexts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn learns_the_signal_coefficient() {
        let env = LinearEnv::single_trait(3.0, 2, 0.5);
        let run = run_linear_bandit(&env, 3000, 100, ThompsonMethod::TwoStep, &mut substream(1, "linear")).unwrap();
        assert_eq!(run.contexts.len(), 100);
        let diff = &run.model.arms[1].mu - &run.model.arms[0].mu;
        assert!((diff[1] - 3.0).abs() < 0.3, "{diff}");
        for k in 2..4 {
            assert!(diff[k].abs() < 0.3);
        }
    }
}
