//! Residuals, simulated envelopes, local influence and case deletion at a
//! converged fit.
//!
//! Every routine reuses the fit's terminal design state; nothing here
//! re-evaluates the formulas except the covariate-perturbation scheme,
//! which needs derivatives with respect to a covariate.

mod deletion;
mod envelope;
mod influence;
mod residuals;

use thiserror::Error;

use crate::estimate::EstimateError;
use crate::model::ModelError;

pub use deletion::{delete_and_refit, ChangeRow, DeletionReport, DispersionChange};
pub use envelope::{quantile_sorted, simulated_envelope, EnvelopeBands};
pub use influence::{influence, perturbation_matrix, symmetric_inverse, InfluenceReport, Scheme, Subset};
pub use residuals::{hat_matrix, weighted_residuals, weighted_residuals_at, ResidualReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("diagnostics need a converged fit")]
    NotConverged,
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("observation {obs} has leverage {h}, too close to 1 for a standardized residual")]
    Leverage { obs: usize, h: f64 },
    #[error("covariate '{name}' does not occur in the {submodel} formula")]
    UnknownCovariate { name: String, submodel: &'static str },
    #[error("covariate '{0}' has zero sample variance")]
    ZeroVariance(String),
    #[error("{failed} of {total} replicates failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error("case {0} is out of range or repeated")]
    BadCase(usize),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
