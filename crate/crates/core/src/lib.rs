//! Customer churn classification: data loading, exploratory statistics,
//! preprocessing, six classifier families, resampling, feature selection,
//! cross-validated tuning and the experiment driver behind the `churn` CLI.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod models;
pub mod preprocess;
pub mod report;
pub mod resample;
pub mod seed;
pub mod selection;
pub mod stats;
pub mod synth;
pub mod tuning;

pub use error::{Error, Result};
