//! Whole-run configuration and seeded replication.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::ExperimentDesign;
use super::effect::EffectModel;
use super::population::{synth_population, PopulationSpec};
use super::run::{run_experiment, SimResult};
use crate::error::{Error, Result};
use crate::impact::{analyze, AnalysisInput, AnalysisOptions, ImpactReport};
use crate::rng::substream;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: Option<u64>,
    pub population: PopulationSpec,
    pub effect: EffectModel,
    pub design: ExperimentDesign,
    pub analysis: AnalysisOptions,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.population.validate()?;
        self.effect.validate()?;
        self.design.validate()?;
        if !(self.analysis.alpha > 0.0 && self.analysis.alpha < 1.0) {
            return Err(Error::config("alpha must be in (0, 1)"));
        }
        Ok(())
    }

    /// Samples the population and runs the experiment under `seed`.
    pub fn simulate(&self, seed: u64) -> Result<SimResult> {
        self.validate()?;
        let pop = synth_population(&self.population, &mut substream(seed, "population"))?;
        run_experiment(&self.design, &pop, &self.effect, seed)
    }
}

/// Impact analysis of a finished run, using its own decision log.
pub fn analyze_result(sim: &SimResult, opts: &AnalysisOptions) -> Result<ImpactReport> {
    let decisions = sim.logged_decisions();
    let input = AnalysisInput {
        logs: &sim.logs,
        groups: &sim.groups,
        window: sim.window,
        decisions: (!decisions.is_empty()).then_some(decisions.as_slice()),
    };
    analyze(&input, opts)
}

/// `n_reps` runs seeded `base_seed`, `base_seed + 1`, ..., each analyzed.
/// Runs execute in parallel; results are in seed order.
pub fn replicate(config: &SimConfig, n_reps: usize, base_seed: u64) -> Result<Vec<ImpactReport>> {
    replicate_with(config, n_reps, base_seed, |sim| analyze_result(&sim, &config.analysis))
}

/// Like [`replicate`] with a custom summary of each run.
pub fn replicate_with<T: Send>(
    config: &SimConfig,
    n_reps: usize,
    base_seed: u64,
    f: impl Fn(SimResult) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    if n_reps == 0 {
        return Err(Error::config("n_reps must be at least 1"));
    }
    config.validate()?;
    (0..n_reps as u64)
        .into_par_iter()
        .map(|k| f(config.simulate(base_seed.wrapping_add(k))?))
        .collect()
}
