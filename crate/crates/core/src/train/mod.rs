//! Cross-validated training with early stopping, seed replication, budgeted
//! random search over the hyper-parameter grid, and the data ablation driver.

mod data;
mod experiment;
mod grid;
mod trainer;

pub use data::{
    AccessEntry, Dataset, FoldFeatures, GuardedFold, Phase, Standardizer, TaskKind, TextSource,
};
pub use experiment::{
    append_records, grid_search, read_records, run_ablation, run_experiment, run_experiment_at, select_best,
    Candidate, ExperimentOptions, GridResult, SystemResult, SystemSpec,
};
pub use grid::{HyperConfig, HyperGrid, SEEDS};
pub use trainer::{accuracy, build_network, fit, run_seed, train_one, FitOutcome, RunOutcome, RunRecord, TrainConfig};
