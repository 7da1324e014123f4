//! Starting values, score, information matrices, maximum-likelihood
//! fitting and Wald inference.

mod fit;
mod info;
pub(crate) mod linalg;
mod start;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::model::ModelError;

pub use fit::{fit, Algorithm, FitOptions, FittedModel, Phase, StartingMode, TraceEntry};
pub use info::{
    fisher_beta, fisher_gamma, fisher_information, hessian, observed_information, score, score_beta, score_gamma,
};
pub use start::{starting_values, StartVariant, StartingValues};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("iteration {iteration}: {source}")]
    Iteration { iteration: usize, source: ModelError },
    #[error("singular information: {0}")]
    Singular(String),
    #[error("starting values: {0}")]
    Start(String),
    #[error("n = {n} observations cannot support {params} parameters")]
    TooFewObservations { n: usize, params: usize },
    #[error("invalid fit options: {0}")]
    Options(String),
    #[error("the fit did not converge")]
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRow {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Two-sided standard-normal tail probability.
pub fn two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z.abs() * std::f64::consts::FRAC_1_SQRT_2)
}

/// Wald table over (β, γ).
pub fn inference_table(fit: &FittedModel) -> Result<Vec<InferenceRow>, EstimateError> {
    if !fit.converged {
        return Err(EstimateError::NotConverged);
    }
    let names = fit.spec.beta_names().iter().chain(fit.spec.gamma_names());
    let theta = fit.theta();
    let se = fit.std_errors();
    Ok(names
        .enumerate()
        .map(|(i, name)| {
            let z = theta[i] / se[i];
            InferenceRow { name: name.clone(), estimate: theta[i], se: se[i], z, p_value: two_sided_p(z) }
        })
        .collect())
}

/// Dispersion summaries for a model whose dispersion predictor is a single
/// parameter without covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantDispersion {
    pub sigma2: f64,
    pub sigma2_se: f64,
    /// 1/σ², with its delta-method standard error.
    pub precision: f64,
    pub precision_se: f64,
}

pub fn constant_dispersion(fit: &FittedModel) -> Option<ConstantDispersion> {
    let disp = fit.spec.dispersion();
    if fit.q() != 1 || !disp.covariates().is_empty() {
        return None;
    }
    let st = &fit.terminal_state;
    let s2 = st.sigma2[0];
    let se_g = fit.cov[(fit.k(), fit.k())].sqrt();
    // dσ²/dγ = (dζ/dγ) / h′(σ²)
    let ds2 = st.z_tilde[(0, 0)] / st.h1[0];
    let sigma2_se = (ds2 * se_g).abs();
    Some(ConstantDispersion { sigma2: s2, sigma2_se, precision: 1.0 / s2, precision_se: sigma2_se / (s2 * s2) })
}
