//! Synthetic pharmacy populations with known nudge effects, and end-to-end
//! execution of experiment designs on them.

mod config;
mod design;
mod effect;
mod linear;
mod panel;
mod population;
mod run;

pub use config::{analyze_result, replicate, replicate_with, SimConfig};
pub use design::{assign_groups, AssignmentScheme, BanditSettings, ExperimentDesign, Splits, WeekdaySwitch};
pub use effect::{EffectModel, PerInteraction, Response};
pub use linear::{run_linear_bandit, LinearEnv, LinearRun};
pub use panel::{synthetic_panel, PanelSpec};
pub use population::{item_id, partner, synth_population, user_id, DayEvents, LogNormalParams, Population, PopulationSpec, SimItem, SimUser};
pub use run::{run_experiment, Adoption, Message, RewardRecord, SimResult, Simulation};

#[cfg(test)]
mod tests;
