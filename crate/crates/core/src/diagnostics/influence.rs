use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::DiagnosticsError;
use crate::data::Dataset;
use crate::estimate::{hessian, FittedModel};
use crate::model::{DesignState, ModelSpec};

/// Perturbation of the likelihood around its null point δ₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Scheme {
    /// ℓ_δ = Σ δ_t ℓ_t, δ₀ = 1.
    CaseWeights,
    /// y_t ↦ y_t + δ_t √V(μ̂_t), V(μ) = μ³(1−μ)³.
    Response,
    /// x_t ↦ x_t + δ_t s_x in the mean formula and z_t ↦ z_t + δ_t s_z in
    /// the dispersion formula, s the sample standard deviations. Either
    /// name may be absent; that submodel is then left unperturbed.
    Covariate { mean: Option<String>, dispersion: Option<String> },
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::CaseWeights => "case_weights",
            Scheme::Response => "response",
            Scheme::Covariate { .. } => "covariate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    Theta,
    BetaOnly,
    GammaOnly,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::Theta, Subset::BetaOnly, Subset::GammaOnly];

    pub fn label(self) -> &'static str {
        match self {
            Subset::Theta => "theta",
            Subset::BetaOnly => "beta",
            Subset::GammaOnly => "gamma",
        }
    }
}

#[derive(Debug, Clone)]
pub struct InfluenceReport {
    pub scheme: Scheme,
    pub subset: Subset,
    /// ∂²ℓ_δ/∂θ∂δᵀ at (θ̂, δ₀), (k+q) × n.
    pub delta: DMatrix<f64>,
    /// Positive semi-definite core −(ℓ̈⁻¹ − blockdiag of the complement).
    pub core: DMatrix<f64>,
    pub c_max: f64,
    /// Unit eigenvector of the largest curvature; largest-magnitude entry positive.
    pub i_max: DVector<f64>,
    pub c_t: DVector<f64>,
    /// 2·mean(C_t).
    pub threshold: f64,
    /// 0-based observations with C_t > threshold.
    pub flagged: Vec<usize>,
}

impl InfluenceReport {
    /// Normal curvature C_d = 2 dᵀΔᵀ(core)Δd / dᵀd in direction d.
    pub fn curvature(&self, dir: &DVector<f64>) -> f64 {
        let v = &self.delta * dir;
        2.0 * (v.transpose() * &self.core * &v)[(0, 0)] / dir.norm_squared()
    }

    /// The n × n matrix B = Δᵀ(core)Δ; C_max/2 is its top eigenvalue.
    pub fn b_matrix(&self) -> DMatrix<f64> {
        self.delta.transpose() * &self.core * &self.delta
    }
}

/// Inverse via symmetric eigendecomposition. Fails when the spectrum spans
/// more than a factor 1e12 (or contains a zero).
pub fn symmetric_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(a.clone());
    let abs: Vec<f64> = eig.eigenvalues.iter().map(|l| l.abs()).collect();
    let max = abs.iter().cloned().fold(0.0, f64::max);
    let min = abs.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0 && max / min <= 1e12) {
        return None;
    }
    let inv_l = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    let mut inv = &eig.eigenvectors * inv_l * eig.eigenvectors.transpose();
    let n = inv.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = v;
            inv[(j, i)] = v;
        }
    }
    Some(inv)
}

/// Local influence of the perturbation `scheme` on θ or a subvector.
pub fn influence(fit: &FittedModel, scheme: &Scheme, subset: Subset) -> Result<InfluenceReport, DiagnosticsError> {
    if !fit.converged {
        return Err(DiagnosticsError::NotConverged);
    }
    let st = &fit.terminal_state;
    let delta = perturbation_matrix(&fit.spec, &fit.data, st, scheme)?;
    let core = curvature_core(st, subset)?;
    Ok(report(scheme.clone(), subset, delta, core))
}

/// Δ = ∂²ℓ_δ/∂θ∂δᵀ at δ₀ for any state, not only at θ̂.
pub fn perturbation_matrix(
    spec: &ModelSpec,
    data: &Dataset,
    st: &DesignState,
    scheme: &Scheme,
) -> Result<DMatrix<f64>, DiagnosticsError> {
    Ok(match scheme {
        Scheme::CaseWeights => delta_case_weights(st),
        Scheme::Response => delta_response(st),
        Scheme::Covariate { mean, dispersion } => {
            delta_covariate(spec, data, st, mean.as_deref(), dispersion.as_deref())?
        }
    })
}

/// −(ℓ̈⁻¹ − ℓ̈₂₂) where ℓ̈₂₂ holds the inverse of the block complementary to
/// the subset of interest.
fn curvature_core(st: &DesignState, subset: Subset) -> Result<DMatrix<f64>, DiagnosticsError> {
    let l = hessian(st);
    let (k, q) = (st.k(), st.q());
    let mut core = symmetric_inverse(&l).ok_or_else(|| DiagnosticsError::Singular("observed information".into()))?;
    let block = match subset {
        Subset::Theta => None,
        Subset::BetaOnly => Some((k, q)),
        Subset::GammaOnly => Some((0, k)),
    };
    if let Some((off, dim)) = block {
        let sub = l.view((off, off), (dim, dim)).into_owned();
        let inv =
            symmetric_inverse(&sub).ok_or_else(|| DiagnosticsError::Singular("observed information block".into()))?;
        let mut v = core.view_mut((off, off), (dim, dim));
        v -= inv;
    }
    Ok(-core)
}

fn report(scheme: Scheme, subset: Subset, delta: DMatrix<f64>, core: DMatrix<f64>) -> InfluenceReport {
    let n = delta.ncols();
    // C_t from the columns directly, without forming B.
    let cd = &core * &delta;
    let c_t = DVector::from_iterator(n, (0..n).map(|t| 2.0 * delta.column(t).dot(&cd.column(t)).abs()));
    let (lambda, mut i_max) =
        if n > 2000 { power_iteration(&delta, &core) } else { top_eigenpair(&delta.transpose() * &cd) };
    let pivot = i_max.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
    if pivot < 0.0 {
        i_max = -i_max;
    }
    let threshold = 2.0 * c_t.mean();
    let flagged = (0..n).filter(|&t| c_t[t] > threshold).collect();
    InfluenceReport { scheme, subset, delta, core, c_max: 2.0 * lambda.max(0.0), i_max, c_t, threshold, flagged }
}

fn top_eigenpair(mut b: DMatrix<f64>) -> (f64, DVector<f64>) {
    let n = b.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(b);
    let i = eig.eigenvalues.imax();
    (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned())
}

/// Dominant eigenpair of Δᵀ(core)Δ through products with Δ only; the core
/// is positive semi-definite so the dominant eigenvalue is the largest.
fn power_iteration(delta: &DMatrix<f64>, core: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let n = delta.ncols();
    let apply = |v: &DVector<f64>| delta.transpose() * (core * (delta * v));
    // Quasi-random positive start; exact orthogonality to the top
    // eigenvector would need a measure-zero coincidence.
    let mut v = DVector::from_fn(n, |t, _| 1.0 + (t as f64 * 0.618_033_988_749_895).fract());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let w = apply(&v);
        let norm = w.norm();
        if norm == 0.0 {
            return (0.0, v);
        }
        let next = w / norm;
        let done = (norm - lambda).abs() <= 1e-14 * norm && (&next - &v).norm() < 1e-12;
        lambda = norm;
        v = next;
        if done {
            break;
        }
    }
    (lambda, v)
}

fn stack(st: &DesignState, beta_w: &DVector<f64>, gamma_w: &DVector<f64>) -> DMatrix<f64> {
    let (k, q, n) = (st.k(), st.q(), st.n());
    let mut d = DMatrix::zeros(k + q, n);
    for t in 0..n {
        let xb = st.x_tilde.row(t).transpose() * beta_w[t];
        let zg = st.z_tilde.row(t).transpose() * gamma_w[t];
        d.view_mut((0, t), (k, 1)).copy_from(&xb);
        d.view_mut((k, t), (q, 1)).copy_from(&zg);
    }
    d
}

/// Δ = [X̃ᵀSTU𝓔; Z̃ᵀHA]: the per-observation score contributions.
fn delta_case_weights(st: &DesignState) -> DMatrix<f64> {
    stack(st, &st.b_beta, &st.b_gamma)
}

/// Δ = [X̃ᵀSTMS_y; Z̃ᵀSHBS_y].
fn delta_response(st: &DesignState) -> DMatrix<f64> {
    let n = st.n();
    let sy = st.mu.map(|m| (m * (1.0 - m)).powi(3).sqrt());
    let bw = DVector::from_fn(n, |t, _| st.s[t] * st.t[t] * st.m[t] * sy[t]);
    let gw = DVector::from_fn(n, |t, _| st.s[t] * st.h[t] * st.b[t] * sy[t]);
    stack(st, &bw, &gw)
}

fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Covariate derivatives of one predictor: (∂·/∂δ_t, ∂²·/∂θ∂δ_t) per row.
fn covariate_terms(
    spec: &ModelSpec,
    data: &Dataset,
    st: &DesignState,
    dispersion: bool,
    name: &str,
) -> Result<(DVector<f64>, DMatrix<f64>), DiagnosticsError> {
    let (formula, params, submodel) =
        if dispersion { (spec.dispersion(), &st.gamma, "dispersion") } else { (spec.mean(), &st.beta, "mean") };
    if formula.covariate_index(name).is_none() {
        return Err(DiagnosticsError::UnknownCovariate { name: name.to_string(), submodel });
    }
    let (xc, zc) = spec.bind(data)?;
    let cols = if dispersion { zc } else { xc };
    let column = data.column(name).expect("bound covariate column");
    let sd = sample_sd(column);
    if !(sd > 0.0) {
        return Err(DiagnosticsError::ZeroVariance(name.to_string()));
    }
    let compiled = formula.compile(Some(name));
    let n = data.n();
    let mut d1 = DVector::zeros(n);
    let mut mixed = DMatrix::zeros(params.len(), n);
    for t in 0..n {
        let row = data.row_values(t, &cols);
        let b = compiled
            .evaluate(params.as_slice(), &row)
            .map_err(|e| DiagnosticsError::Invalid(format!("observation {}: {e}", t + 1)))?;
        d1[t] = b.d_covariate * sd;
        mixed.column_mut(t).copy_from(&(b.mixed_param_covariate * sd));
    }
    Ok((d1, mixed))
}

/// Δ for simultaneous covariate perturbation in the mean and dispersion
/// predictors.
fn delta_covariate(
    spec: &ModelSpec,
    data: &Dataset,
    st: &DesignState,
    mean: Option<&str>,
    dispersion: Option<&str>,
) -> Result<DMatrix<f64>, DiagnosticsError> {
    if mean.is_none() && dispersion.is_none() {
        return Err(DiagnosticsError::Invalid("covariate scheme needs a mean or dispersion covariate".into()));
    }
    let (k, q, n) = (st.k(), st.q(), st.n());
    let (xd, xm) = match mean {
        Some(name) => covariate_terms(spec, data, st, false, name)?,
        None => (DVector::zeros(n), DMatrix::zeros(k, n)),
    };
    let (zd, zm) = match dispersion {
        Some(name) => covariate_terms(spec, data, st, true, name)?,
        None => (DVector::zeros(n), DMatrix::zeros(q, n)),
    };
    let mut d = DMatrix::zeros(k + q, n);
    for t in 0..n {
        let cross = st.s[t] * st.s[t] * st.t[t] * st.h[t] * st.u[t] * st.e[t];
        let bw = -cross * zd[t] - st.s[t] * st.q[t] * xd[t];
        let gw = -cross * xd[t] - st.nu[t] * zd[t];
        let col_b = st.x_tilde.row(t).transpose() * bw + xm.column(t) * st.b_beta[t];
        let col_g = st.z_tilde.row(t).transpose() * gw + zm.column(t) * st.b_gamma[t];
        d.view_mut((0, t), (k, 1)).copy_from(&col_b);
        d.view_mut((k, t), (q, 1)).copy_from(&col_g);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_inverse_rejects_ill_conditioning() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let inv = symmetric_inverse(&a).unwrap();
        assert!((&a * inv - DMatrix::identity(2, 2)).norm() < 1e-14);
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1e-13]));
        assert!(symmetric_inverse(&b).is_none());
    }

    #[test]
    fn power_iteration_matches_eigen() {
        let delta = DMatrix::from_fn(3, 30, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0 + 0.1 * j as f64);
        let core = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.5]);
        let (l1, v1) = power_iteration(&delta, &core);
        let (l2, v2) = top_eigenpair(delta.transpose() * &core * &delta);
        assert!((l1 - l2).abs() < 1e-9 * l2);
        assert!((v1.dot(&v2).abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equal_curvatures_flag_nothing() {
        let delta = DMatrix::from_element(1, 5, 1.0);
        let r = report(Scheme::CaseWeights, Subset::Theta, delta, DMatrix::from_element(1, 1, 0.5));
        assert!(r.flagged.is_empty());
        assert!(r.c_t.iter().all(|&c| (c - 1.0).abs() < 1e-15));
        assert!((r.i_max.norm() - 1.0).abs() < 1e-12);
    }
}
