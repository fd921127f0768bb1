//! Impact analysis: Welch t-tests on daily series, random-intercept mixed
//! models with backward elimination, bandit assignment metrics and
//! recommendation success.

mod analysis;
mod assignment;
mod groups;
mod lmm;
pub mod report;
mod series;
pub mod stats;
mod success;
mod ttest;

pub use analysis::{
    analyze, baseline_expenditure, full_terms, weekly_panel, AnalysisInput, AnalysisOptions, ImpactReport, Window,
};
pub use assignment::{assignment_metrics, AssignmentMetrics, DecisionPoint};
pub use groups::{members, read_groups, read_groups_from, write_groups, Group, GroupMap, GROUP_HEADER};
pub use lmm::{
    backward_eliminate, fit_lmm, fit_lmm_terms, Column, Elimination, LmmDesign, LmmFit, LmmOptions, Term,
    WeeklyObservation,
};
pub use series::{daily_series_tests, median_split, stratified_tests, DailyPanel, DayTest, SeriesResult, SeriesSummary, StratumResult};
pub use success::{success_analysis, InteractionSuccess, SuccessBreakdown, SuccessSummary};
pub use ttest::{cohens_d, power_noncentral_t, welch_t_test, TTestResult, DEFAULT_ALPHA};
