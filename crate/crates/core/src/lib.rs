//! Regression models whose dependence on sensitive attributes is bounded.
//!
//! A ridge penalty on the sensitive-attribute coefficients is chosen so that
//! those attributes explain at most a user-chosen share `r` of the model's
//! explained variance (or deviance, for GLMs). The predictors are first
//! decorrelated from the sensitive attributes, which keeps the remaining
//! coefficients independent of `r` in the linear case.
//!
//! ```
//! use fairfit::{encode, example_schema, fit_frrm, synth_example, FairnessSpec};
//!
//! let raw = synth_example(1, 500, 42).unwrap();
//! let mm = encode(&raw, &example_schema()).unwrap();
//! let model = fit_frrm(&mm, &FairnessSpec::statistical_parity(0.05), 0.0).unwrap();
//! assert!((model.achieved - 0.05).abs() < 1e-8);
//! ```

pub mod decorrelate;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod fairness;
pub mod frrm;
pub mod glm;
pub mod linalg;
pub mod model_matrix;

pub use decorrelate::{
    bias_ratio_curve, ols_decorrelate, pca_reduce, residual_cross_covariance, ridge_decorrelate,
    BiasCurve, BiasOptions, DecorrelatedDesign, PcaReduction,
};
pub use error::{Error, ErrorCategory, Result};
pub use evaluation::{
    f1, kfold_cv, profile_sweep, rmse, CvConfig, CvReport, ProfileSweep, DEFAULT_R_GRID,
};
pub use exec::Execution;
pub use fairness::{Combine, Definition, Distance, FairnessSpec};
pub use frrm::{fit_frrm, predict, FittedModel};
pub use glm::{fit_fgrrm, Family};
pub use model_matrix::{
    encode, example_schema, load_csv, synth_example, Column, ModelMatrices, RawDataset, Schema,
};
