//! Two-sample Mendelian randomization by weighted quantile regression of
//! Wald ratios under an asymmetric Laplace likelihood.
//!
//! The pipeline is: [`summary_data`] (parse and harmonize GWAS files) →
//! [`ratios`] (ratio estimates and weights) → [`estimators`] (MR-Quantile,
//! IVW, MR-Egger, weighted median, parametric bootstrap). [`simulation`]
//! reproduces Monte Carlo studies and [`cli`] drives everything from the
//! command line.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod ratios;
pub mod rng;
pub mod simulation;
pub mod summary_data;
pub mod wqr;

pub use error::{Error, Result};
