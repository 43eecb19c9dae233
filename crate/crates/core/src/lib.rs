//! Cohort construction, imputation, classifiers and feature-importance
//! analysis for tabular EHR-style data.

pub mod cohort;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod impute;
pub mod interpret;
pub mod linear;
pub mod par;
pub mod seed;
pub mod stats;
pub mod synth;
pub mod trees;

pub use error::{Error, Result};
