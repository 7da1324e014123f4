use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::DiagnosticsError;
use crate::estimate::linalg::inverse_spd;
use crate::estimate::{fisher_beta, FittedModel};
use crate::model::DesignState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub r_beta: Vec<f64>,
    pub h_star_diag: Vec<f64>,
    /// Working variable z = X̃β + W⁻¹UT(y − μ) of the scoring regression.
    pub working_z: Vec<f64>,
}

/// H* = (SW)^{1/2} X̃ (X̃ᵀSWX̃)⁻¹ X̃ᵀ (SW)^{1/2}, formed explicitly (n × n).
pub fn hat_matrix(state: &DesignState) -> Result<DMatrix<f64>, DiagnosticsError> {
    let kinv = inverse_spd(&fisher_beta(state)).ok_or(DiagnosticsError::Singular("X̃ᵀSWX̃".into()))?;
    let mut a = state.x_tilde.clone();
    for (t, mut row) in a.row_iter_mut().enumerate() {
        row *= (state.s[t] * state.w[t]).sqrt();
    }
    Ok(&a * kinv * a.transpose())
}

fn hat_diagonal(state: &DesignState) -> Result<DVector<f64>, DiagnosticsError> {
    let kinv = inverse_spd(&fisher_beta(state)).ok_or(DiagnosticsError::Singular("X̃ᵀSWX̃".into()))?;
    Ok(DVector::from_iterator(
        state.n(),
        (0..state.n()).map(|t| {
            let x = state.x_tilde.row(t).transpose();
            state.s[t] * state.w[t] * (x.transpose() * &kinv * &x)[(0, 0)]
        }),
    ))
}

/// Weighted residuals r_t = u_t(y_t − μ_t) / √(v_t(1 − h*_tt)) at any state.
pub fn weighted_residuals_at(state: &DesignState) -> Result<ResidualReport, DiagnosticsError> {
    let h = hat_diagonal(state)?;
    let n = state.n();
    let mut r = Vec::with_capacity(n);
    for t in 0..n {
        let one_minus = 1.0 - h[t];
        if !(one_minus > 1e-12) {
            return Err(DiagnosticsError::Leverage { obs: t + 1, h: h[t] });
        }
        r.push(state.u[t] * state.e[t] / (state.v[t] * one_minus).sqrt());
    }
    let xb = state.x_tilde.clone() * &state.beta;
    let working_z = (0..n).map(|t| xb[t] + state.u[t] * state.t[t] * state.e[t] / state.w[t]).collect();
    Ok(ResidualReport { r_beta: r, h_star_diag: h.iter().copied().collect(), working_z })
}

pub fn weighted_residuals(fit: &FittedModel) -> Result<ResidualReport, DiagnosticsError> {
    if !fit.converged {
        return Err(DiagnosticsError::NotConverged);
    }
    weighted_residuals_at(&fit.terminal_state)
}
