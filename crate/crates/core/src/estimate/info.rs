use nalgebra::{DMatrix, DVector};

use crate::model::DesignState;

/// Xᵀ diag(c) Y.
pub(crate) fn weighted_cross(x: &DMatrix<f64>, c: &DVector<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let mut cy = y.clone();
    for (t, mut row) in cy.row_iter_mut().enumerate() {
        row *= c[t];
    }
    x.transpose() * cy
}

/// Symmetrizes by averaging with the transpose; removes rounding asymmetry
/// from products that are symmetric in exact arithmetic.
pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn score_beta(state: &DesignState) -> DVector<f64> {
    state.x_tilde.transpose() * &state.b_beta
}

pub fn score_gamma(state: &DesignState) -> DVector<f64> {
    state.z_tilde.transpose() * &state.b_gamma
}

/// (U_β, U_γ) with U_β = X̃ᵀSUT(y − μ) and U_γ = Z̃ᵀHa.
pub fn score(state: &DesignState) -> DVector<f64> {
    let (k, q) = (state.k(), state.q());
    let mut u = DVector::zeros(k + q);
    u.rows_mut(0, k).copy_from(&score_beta(state));
    u.rows_mut(k, q).copy_from(&score_gamma(state));
    u
}

/// X̃ᵀSWX̃.
pub fn fisher_beta(state: &DesignState) -> DMatrix<f64> {
    let c = state.s.component_mul(&state.w);
    let mut m = weighted_cross(&state.x_tilde, &c, &state.x_tilde);
    symmetrize(&mut m);
    m
}

/// Z̃ᵀDZ̃.
pub fn fisher_gamma(state: &DesignState) -> DMatrix<f64> {
    let mut m = weighted_cross(&state.z_tilde, &state.d, &state.z_tilde);
    symmetrize(&mut m);
    m
}

/// Block-diagonal expected information; the β×γ block is exactly zero.
pub fn fisher_information(state: &DesignState) -> DMatrix<f64> {
    let (k, q) = (state.k(), state.q());
    let mut m = DMatrix::zeros(k + q, k + q);
    m.view_mut((0, 0), (k, k)).copy_from(&fisher_beta(state));
    m.view_mut((k, k), (q, q)).copy_from(&fisher_gamma(state));
    m
}

/// Second-derivative matrix ℓ̈ of the log-likelihood.
pub fn hessian(state: &DesignState) -> DMatrix<f64> {
    let (k, q) = (state.k(), state.q());
    let sq = state.s.component_mul(&state.q);
    let mut lbb = -weighted_cross(&state.x_tilde, &sq, &state.x_tilde);
    if !state.x_hess.is_empty() {
        lbb += DesignState::bracket(&state.b_beta, &state.x_hess, k);
    }
    // S²HTU𝓔
    let cross: DVector<f64> = DVector::from_iterator(
        state.n(),
        (0..state.n()).map(|t| state.s[t] * state.s[t] * state.h[t] * state.t[t] * state.u[t] * state.e[t]),
    );
    let lbg = -weighted_cross(&state.x_tilde, &cross, &state.z_tilde);
    let mut lgg = -weighted_cross(&state.z_tilde, &state.nu, &state.z_tilde);
    if !state.z_hess.is_empty() {
        lgg += DesignState::bracket(&state.b_gamma, &state.z_hess, q);
    }
    let mut m = DMatrix::zeros(k + q, k + q);
    m.view_mut((0, 0), (k, k)).copy_from(&lbb);
    m.view_mut((0, k), (k, q)).copy_from(&lbg);
    m.view_mut((k, 0), (q, k)).copy_from(&lbg.transpose());
    m.view_mut((k, k), (q, q)).copy_from(&lgg);
    symmetrize(&mut m);
    m
}

/// Observed information −ℓ̈.
pub fn observed_information(state: &DesignState) -> DMatrix<f64> {
    -hessian(state)
}
