//! Penalized logistic regression for rare events.
//!
//! Firth-type estimation (FL) with its intercept-corrected (FLIC) and
//! augmentation-corrected (FLAC) variants, alongside weakened Firth, log-F,
//! Cauchy-prior and ridge fits, post-hoc prediction correctors, confidence
//! intervals, evaluation metrics and a simulation harness.

pub mod cli;
pub mod datasets;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod logistic;
pub mod metrics;
pub mod predictions;
pub mod simgen;
mod solver;

pub use solver::{objective_derivatives, Penalty};

pub use error::{Error, Result};
pub use estimators::{fit_method, EstimatorSettings, FitResult, Method, RidgeSettings};
pub use logistic::{Coefficients, Dataset};
