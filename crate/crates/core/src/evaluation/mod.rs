//! Experiment harness: MSE evaluation, random-forest baseline, experiment
//! drivers and report output.

mod experiments;
mod forest;
mod metrics;
mod report;

pub use self::experiments::{
    fit_cnn, run_cacm_space_ablation, run_domain_adaptation, run_ood_experiment, space_label, table_variants,
    variable_importance, ExperimentSetup, ImportanceOptions, ModelKind, ModelVariant,
};
pub use self::forest::{forest_features, rf_baseline, tile_features, ForestConfig, RandomForest, Tree};
pub use self::metrics::{evaluate_mse, predict_envs};
pub use self::report::{
    emit_report, mean, median, population_std, standardize, Aggregate, ExperimentReport, ImportanceEntry,
    ImportanceReport, ReportOutput, ReportRow, Standardization, AVERAGE_ENV,
};
