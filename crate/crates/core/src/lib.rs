//! Simplex regression with nonlinear predictors for the mean and the
//! dispersion.
//!
//! - [`dist`]: simplex density, deviance, variance, CDF and sampling.
//! - [`formula`]: predictor expressions with symbolic derivatives.
//! - [`data`]: numeric datasets with a response in (0, 1).
//! - [`model`]: link functions, model specification and the per-observation
//!   quantities every other module consumes.
//! - [`estimate`]: starting values, score, information and ML fitting.
//! - [`diagnostics`]: weighted residuals, simulated envelopes, local
//!   influence and case deletion.
//! - [`simulate`] and [`study`]: reproducible response draws and the Monte
//!   Carlo study of residual behavior.

pub mod data;
pub mod diagnostics;
pub mod dist;
pub mod estimate;
pub mod formula;
pub mod model;
pub mod simulate;
pub mod study;
