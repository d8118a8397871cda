//! Cross-validation, profile sweeps and accuracy metrics.

mod cv;
mod metrics;
mod profile;

pub use cv::{
    fold_partition, kfold_cv, training_rows, CvAggregate, CvCell, CvConfig, CvReport, Summary, DEFAULT_R_GRID,
};
pub use metrics::{f1, rmse};
pub use profile::{profile_sweep, ProfilePoint, ProfileSweep};
