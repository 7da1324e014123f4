use nalgebra::{DMatrix, DVector};

use super::{ModelError, ModelSpec};
use crate::data::Dataset;
use crate::dist::{deviance_unchecked, log_density_unchecked};

/// Every per-observation quantity at one parameter point.
///
/// Diagonal matrices are stored as vectors: `s` = 1/σ², `t` = 1/g′(μ),
/// `h` = 1/h′(σ²), `e` = y − μ. `dev` is the deviance component d(y; μ),
/// while `d` is the Fisher weight for the dispersion predictor.
#[derive(Debug, Clone)]
pub struct DesignState {
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
    pub y: DVector<f64>,
    pub eta: DVector<f64>,
    pub zeta: DVector<f64>,
    pub mu: DVector<f64>,
    pub sigma2: DVector<f64>,
    pub dev: DVector<f64>,
    pub a: DVector<f64>,
    pub u: DVector<f64>,
    pub u_prime: DVector<f64>,
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    pub w: DVector<f64>,
    pub d: DVector<f64>,
    /// Observed-information weight for ζ: d_t(2d(y;μ)/σ² − 1) + a_t h″/h′³.
    pub nu: DVector<f64>,
    pub m: DVector<f64>,
    pub b: DVector<f64>,
    pub s: DVector<f64>,
    pub t: DVector<f64>,
    pub h: DVector<f64>,
    pub e: DVector<f64>,
    pub g1: DVector<f64>,
    pub g2: DVector<f64>,
    pub h1: DVector<f64>,
    pub h2: DVector<f64>,
    /// ∂η/∂β, n × k.
    pub x_tilde: DMatrix<f64>,
    /// ∂ζ/∂γ, n × q.
    pub z_tilde: DMatrix<f64>,
    /// ∂²η_t/∂β∂βᵀ per observation; empty when η is linear in β.
    pub x_hess: Vec<DMatrix<f64>>,
    /// ∂²ζ_t/∂γ∂γᵀ per observation; empty when ζ is linear in γ.
    pub z_hess: Vec<DMatrix<f64>>,
    /// S T U (y − μ).
    pub b_beta: DVector<f64>,
    /// H a.
    pub b_gamma: DVector<f64>,
    pub loglik: f64,
}

impl DesignState {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.beta.len()
    }

    pub fn q(&self) -> usize {
        self.gamma.len()
    }

    pub fn theta(&self) -> DVector<f64> {
        let mut th = DVector::zeros(self.k() + self.q());
        th.rows_mut(0, self.k()).copy_from(&self.beta);
        th.rows_mut(self.k(), self.q()).copy_from(&self.gamma);
        th
    }

    /// Σ_t c_t · M_t over a per-observation array (bracket product).
    pub fn bracket(c: &DVector<f64>, arr: &[DMatrix<f64>], dim: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(dim, dim);
        for (ct, mt) in c.iter().zip(arr) {
            out += mt * *ct;
        }
        out
    }
}

fn check_dims(spec: &ModelSpec, beta: &DVector<f64>, gamma: &DVector<f64>) -> Result<(), ModelError> {
    if beta.len() != spec.k() {
        return Err(ModelError::Dimension { expected: spec.k(), got: beta.len() });
    }
    if gamma.len() != spec.q() {
        return Err(ModelError::Dimension { expected: spec.q(), got: gamma.len() });
    }
    Ok(())
}

fn obs_err(t: usize, e: impl std::fmt::Display) -> ModelError {
    ModelError::InvalidState { obs: t + 1, message: e.to_string() }
}

/// Mean and dispersion at each observation.
pub(crate) fn mu_sigma2(
    spec: &ModelSpec,
    data: &Dataset,
    beta: &DVector<f64>,
    gamma: &DVector<f64>,
) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
    check_dims(spec, beta, gamma)?;
    let (xc, zc) = spec.bind(data)?;
    let n = data.n();
    let mut mu = Vec::with_capacity(n);
    let mut s2 = Vec::with_capacity(n);
    for t in 0..n {
        let eta = spec.mean_deriv().value(beta.as_slice(), &data.row_values(t, &xc)).map_err(|e| obs_err(t, e))?;
        let zeta =
            spec.dispersion_deriv().value(gamma.as_slice(), &data.row_values(t, &zc)).map_err(|e| obs_err(t, e))?;
        mu.push(spec.mean_link().inverse(eta).map_err(|e| obs_err(t, e))?);
        s2.push(spec.dispersion_link().inverse(zeta).map_err(|e| obs_err(t, e))?);
    }
    Ok((mu, s2))
}

/// Log-likelihood only; cheaper than a full assembly.
pub fn loglik(spec: &ModelSpec, data: &Dataset, beta: &DVector<f64>, gamma: &DVector<f64>) -> Result<f64, ModelError> {
    let (mu, s2) = mu_sigma2(spec, data, beta, gamma)?;
    let y = data.response();
    Ok((0..data.n()).map(|t| log_density_unchecked(y[t], 1.0 - y[t], mu[t], s2[t])).sum())
}

/// Builds the full design state at (β, γ).
pub fn assemble(
    spec: &ModelSpec,
    data: &Dataset,
    beta: &DVector<f64>,
    gamma: &DVector<f64>,
) -> Result<DesignState, ModelError> {
    check_dims(spec, beta, gamma)?;
    let (xc, zc) = spec.bind(data)?;
    let (n, k, q) = (data.n(), spec.k(), spec.q());
    let md = spec.mean_deriv();
    let dd = spec.dispersion_deriv();
    let mut st = DesignState {
        beta: beta.clone(),
        gamma: gamma.clone(),
        y: DVector::from_column_slice(data.response()),
        eta: DVector::zeros(n),
        zeta: DVector::zeros(n),
        mu: DVector::zeros(n),
        sigma2: DVector::zeros(n),
        dev: DVector::zeros(n),
        a: DVector::zeros(n),
        u: DVector::zeros(n),
        u_prime: DVector::zeros(n),
        q: DVector::zeros(n),
        v: DVector::zeros(n),
        w: DVector::zeros(n),
        d: DVector::zeros(n),
        nu: DVector::zeros(n),
        m: DVector::zeros(n),
        b: DVector::zeros(n),
        s: DVector::zeros(n),
        t: DVector::zeros(n),
        h: DVector::zeros(n),
        e: DVector::zeros(n),
        g1: DVector::zeros(n),
        g2: DVector::zeros(n),
        h1: DVector::zeros(n),
        h2: DVector::zeros(n),
        x_tilde: DMatrix::zeros(n, k),
        z_tilde: DMatrix::zeros(n, q),
        x_hess: Vec::new(),
        z_hess: Vec::new(),
        b_beta: DVector::zeros(n),
        b_gamma: DVector::zeros(n),
        loglik: 0.0,
    };
    let (bs, gs) = (beta.as_slice(), gamma.as_slice());
    for t in 0..n {
        let xr = data.row_values(t, &xc);
        let zr = data.row_values(t, &zc);
        let err = |e: &dyn std::fmt::Display| obs_err(t, e);
        let eta = md.value(bs, &xr).map_err(|e| err(&e))?;
        let zeta = dd.value(gs, &zr).map_err(|e| err(&e))?;
        st.x_tilde.row_mut(t).copy_from(&md.gradient(bs, &xr).map_err(|e| err(&e))?.transpose());
        st.z_tilde.row_mut(t).copy_from(&dd.gradient(gs, &zr).map_err(|e| err(&e))?.transpose());
        if !md.is_linear_in_params() {
            st.x_hess.push(md.hessian(bs, &xr).map_err(|e| err(&e))?);
        }
        if !dd.is_linear_in_params() {
            st.z_hess.push(dd.hessian(gs, &zr).map_err(|e| err(&e))?);
        }

        let mu = spec.mean_link().inverse(eta).map_err(|e| err(&e))?;
        let s2 = spec.dispersion_link().inverse(zeta).map_err(|e| err(&e))?;
        let g1 = spec.mean_link().d1(mu).map_err(|e| err(&e))?;
        let g2 = spec.mean_link().d2(mu).map_err(|e| err(&e))?;
        let h1 = spec.dispersion_link().d1(s2).map_err(|e| err(&e))?;
        let h2 = spec.dispersion_link().d2(s2).map_err(|e| err(&e))?;

        let y = st.y[t];
        let omy = 1.0 - y;
        let e = y - mu;
        let mm = mu * (1.0 - mu);
        let m2 = mm * mm;
        let dev = deviance_unchecked(y, omy, mu);
        let a = dev / (2.0 * s2 * s2) - 1.0 / (2.0 * s2);
        let u = (dev + 1.0 / m2) / mm;
        let one_m2mu = 1.0 - 2.0 * mu;
        let u_prime = -(2.0 * e * u / mm + 3.0 * one_m2mu / (m2 * m2) + one_m2mu * dev / m2);
        let q = (u - e * u_prime + e * u * g2 / g1) / (g1 * g1);
        let v = s2 * (3.0 * s2 / mm + 1.0 / (m2 * mm));
        let w = v / (s2 * g1 * g1);
        let dt = 1.0 / (2.0 * s2 * s2 * h1 * h1);
        let nu = dt * (2.0 * dev / s2 - 1.0) + a * h2 / (h1 * h1 * h1);
        let ddev_dmu = -2.0 * u * e;
        let om = 1.0 - mu;
        let m = (2.0 / (y * om * om * om) + (1.0 - 3.0 * mu) / (mu * mu * om * om * om) - 0.5 * ddev_dmu) / (y * omy);
        let b = (dev + 2.0 * e / (y * mu * om * om)) / (2.0 * s2 * y * omy);

        st.eta[t] = eta;
        st.zeta[t] = zeta;
        st.mu[t] = mu;
        st.sigma2[t] = s2;
        st.dev[t] = dev;
        st.a[t] = a;
        st.u[t] = u;
        st.u_prime[t] = u_prime;
        st.q[t] = q;
        st.v[t] = v;
        st.w[t] = w;
        st.d[t] = dt;
        st.nu[t] = nu;
        st.m[t] = m;
        st.b[t] = b;
        st.s[t] = 1.0 / s2;
        st.t[t] = 1.0 / g1;
        st.h[t] = 1.0 / h1;
        st.e[t] = e;
        st.g1[t] = g1;
        st.g2[t] = g2;
        st.h1[t] = h1;
        st.h2[t] = h2;
        st.b_beta[t] = u * e / (s2 * g1);
        st.b_gamma[t] = a / h1;
        st.loglik += log_density_unchecked(y, omy, mu, s2);

        let fams = [dev, a, u, u_prime, q, v, w, dt, nu, m, b, st.loglik];
        if fams.iter().any(|x| !x.is_finite()) {
            return Err(obs_err(t, format!("non-finite weights at mu = {mu}, sigma2 = {s2}")));
        }
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinkKind, ModelConfig};

    fn toy() -> (ModelSpec, Dataset) {
        let spec = ModelConfig::new("b1 + b2*x", "g1 + g2*z").build().unwrap();
        let data = Dataset::new(
            vec!["y".into(), "x".into(), "z".into()],
            vec![vec![0.5, 0.3, 0.8], vec![0.0, 1.0, -1.0], vec![0.2, 0.4, 0.6]],
            "y",
        )
        .unwrap();
        (spec, data)
    }

    #[test]
    fn y_equal_mu_cases() {
        let (spec, data) = toy();
        // β = 0 gives μ = 0.5 everywhere; the first response is 0.5.
        let gamma = DVector::from_vec(vec![(0.5f64).ln(), 0.0]);
        let s = assemble(&spec, &data, &DVector::zeros(2), &gamma).unwrap();
        assert!((s.u[0] - 64.0).abs() < 1e-12);
        assert!((s.sigma2[0] - 0.5).abs() < 1e-15);
        assert!((s.a[0] + 1.0).abs() < 1e-12);
        assert_eq!(s.e[0], 0.0);
    }

    #[test]
    fn reports_offending_observation() {
        let (_, data) = toy();
        let mut c = ModelConfig::new("b1 + b2*x", "g1 + g2*z");
        c.dispersion_link = LinkKind::Identity;
        let spec = c.build().unwrap();
        let err = assemble(&spec, &data, &DVector::zeros(2), &DVector::from_vec(vec![0.1, -0.2])).unwrap_err();
        assert!(matches!(err, ModelError::InvalidState { obs: 3, .. }), "{err}");
    }
}
