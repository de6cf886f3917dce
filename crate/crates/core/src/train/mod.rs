//! Dataset splitting, the training loop, metrics and hyperparameter search.

mod metrics;
mod search;
mod split;
mod trainer;

pub use metrics::{class_distribution, ClassDistribution, Confusion, Metrics};
pub use search::{grid_search, sweep, Grid, GridReport, GridTrial, SweepParam, SweepRow};
pub use split::{split_dataset, SplitMode, SplitSpec, Splits};
pub use trainer::{
    evaluate, evaluate_checked, load_model, save_model, train_model, EpochStats, Hyperparams,
    ModelMeta, TrainOutcome, TrialResult,
};
