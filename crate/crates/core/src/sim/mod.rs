//! Monte-Carlo evaluation: the Amari error, source generators, random
//! mixing, outlier and noise corruption, and the trial runner.

mod amari;
pub mod campaign;
mod corrupt;
pub mod report;
mod sources;

pub use amari::amari_error;
pub use campaign::{
    run_experiment, run_trial, Algorithm, CampaignConfig, CampaignResult, Condition, ConditionSummary, Experiment,
    TrialRecord,
};
pub use corrupt::{
    condition_number, db_to_linear, gen_mixing, inject_outliers, mix, noise_scale, noisy_mix, random_orthogonal,
};
pub use sources::{sample_sources, SourceFamily, SourceSpec};
