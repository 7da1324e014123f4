//! Two-step starting values.
//!
//! Step 1 linearizes each predictor around a base point (pinned values for
//! pinned parameters, zero for the rest) and regresses the link-transformed
//! pseudo-response on the free gradient columns. Step 2 takes one
//! Gauss–Newton correction on the full gradient at the step-1 point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::least_squares;
use super::EstimateError;
use crate::data::Dataset;
use crate::dist::deviance_unchecked;
use crate::formula::CompiledDerivatives;
use crate::model::{LinkKind, ModelSpec};

/// How the step-2 correction is combined with the step-1 estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartVariant {
    /// β⁽⁰⁾ = β_L + θ̂, so a linear predictor keeps β_L unchanged.
    #[default]
    WithOffset,
    /// β⁽⁰⁾ = θ̂ alone.
    CorrectionOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartingValues {
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
    /// Ridge fallbacks and similar events worth reporting.
    pub notes: Vec<String>,
}

/// Relative floor on deviance pseudo-observations, so that h(σ²) stays
/// finite when a fitted mean hits a response exactly.
const DEVIANCE_FLOOR: f64 = 1e-6;

struct Submodel<'a> {
    name: &'a str,
    deriv: &'a CompiledDerivatives,
    rows: Vec<Vec<f64>>,
    params: &'a [String],
}

impl Submodel<'_> {
    fn values(&self, p: &[f64]) -> Result<DVector<f64>, EstimateError> {
        let mut out = DVector::zeros(self.rows.len());
        for (t, row) in self.rows.iter().enumerate() {
            out[t] = self.deriv.value(p, row).map_err(|e| self.fail(t, e))?;
        }
        Ok(out)
    }

    fn jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>, EstimateError> {
        let mut j = DMatrix::zeros(self.rows.len(), p.len());
        for (t, row) in self.rows.iter().enumerate() {
            let g = self.deriv.gradient(p, row).map_err(|e| self.fail(t, e))?;
            j.row_mut(t).copy_from(&g.transpose());
        }
        Ok(j)
    }

    fn fail(&self, t: usize, e: impl std::fmt::Display) -> EstimateError {
        EstimateError::Start(format!("{} predictor at observation {}: {e}", self.name, t + 1))
    }

    /// Step 1: least squares on the free columns at the base point.
    fn linear_step(
        &self,
        spec: &ModelSpec,
        r: &DVector<f64>,
        notes: &mut Vec<String>,
    ) -> Result<DVector<f64>, EstimateError> {
        let mut base = DVector::zeros(self.params.len());
        let mut free = Vec::new();
        for (i, p) in self.params.iter().enumerate() {
            match spec.pinned_value(p) {
                Some(v) => base[i] = v,
                None => free.push(i),
            }
        }
        if free.is_empty() {
            return Ok(base);
        }
        let offset = self.values(base.as_slice())?;
        let jac = self.jacobian(base.as_slice())?;
        let xf = jac.select_columns(&free);
        let (coef, ridged) = least_squares(&xf, &(r - offset))
            .ok_or_else(|| EstimateError::Start(format!("singular linearized {} design", self.name)))?;
        if ridged {
            notes.push(format!("{} step 1: singular linearized design, ridge applied", self.name));
        }
        let mut out = base;
        for (c, &i) in coef.iter().zip(&free) {
            out[i] += c;
        }
        Ok(out)
    }

    /// Step 2: one Gauss–Newton correction at `at` towards `r`.
    fn correction(
        &self,
        at: &DVector<f64>,
        r: &DVector<f64>,
        notes: &mut Vec<String>,
    ) -> Result<DVector<f64>, EstimateError> {
        let resid = r - self.values(at.as_slice())?;
        let jac = self.jacobian(at.as_slice())?;
        let (coef, ridged) = least_squares(&jac, &resid)
            .ok_or_else(|| EstimateError::Start(format!("singular {} design at the step-1 estimate", self.name)))?;
        if ridged {
            notes.push(format!("{} step 2: singular design, ridge applied", self.name));
        }
        Ok(coef)
    }
}

fn transform(link: LinkKind, v: &[f64], what: &str) -> Result<DVector<f64>, EstimateError> {
    let mut out = DVector::zeros(v.len());
    for (t, &x) in v.iter().enumerate() {
        out[t] = link.forward(x).map_err(|e| EstimateError::Start(format!("{what} at observation {}: {e}", t + 1)))?;
    }
    Ok(out)
}

fn pseudo_dispersion(y: &[f64], mu: &[f64]) -> Vec<f64> {
    let dev: Vec<f64> = y.iter().zip(mu).map(|(&y, &m)| deviance_unchecked(y, 1.0 - y, m)).collect();
    let mean = dev.iter().sum::<f64>() / dev.len() as f64;
    let floor = (DEVIANCE_FLOOR * mean).max(f64::MIN_POSITIVE);
    dev.into_iter().map(|d| d.max(floor)).collect()
}

fn means(spec: &ModelSpec, eta: &DVector<f64>) -> Result<Vec<f64>, EstimateError> {
    eta.iter()
        .enumerate()
        .map(|(t, &e)| {
            spec.mean_link()
                .inverse(e)
                .map_err(|err| EstimateError::Start(format!("mean at observation {}: {err}", t + 1)))
        })
        .collect()
}

pub fn starting_values(
    spec: &ModelSpec,
    data: &Dataset,
    variant: StartVariant,
) -> Result<StartingValues, EstimateError> {
    let (xc, zc) = spec.bind(data)?;
    let n = data.n();
    let mean = Submodel {
        name: "mean",
        deriv: spec.mean_deriv(),
        rows: (0..n).map(|t| data.row_values(t, &xc)).collect(),
        params: spec.beta_names(),
    };
    let disp = Submodel {
        name: "dispersion",
        deriv: spec.dispersion_deriv(),
        rows: (0..n).map(|t| data.row_values(t, &zc)).collect(),
        params: spec.gamma_names(),
    };
    let combine = |at: &DVector<f64>, corr: DVector<f64>| match variant {
        StartVariant::WithOffset => at + corr,
        StartVariant::CorrectionOnly => corr,
    };
    let mut notes = Vec::new();
    let y = data.response();

    let gy = transform(spec.mean_link(), y, "link-transformed response")?;
    let beta_l = mean.linear_step(spec, &gy, &mut notes)?;
    // The linearization is exact for predictors linear in β.
    let beta_nl = if spec.mean_deriv().is_linear_in_params() {
        beta_l.clone()
    } else {
        combine(&beta_l, mean.correction(&beta_l, &gy, &mut notes)?)
    };

    let mu_l = means(spec, &mean.values(beta_l.as_slice())?)?;
    let hs_l = transform(spec.dispersion_link(), &pseudo_dispersion(y, &mu_l), "dispersion pseudo-response")?;
    let gamma_l = disp.linear_step(spec, &hs_l, &mut notes)?;
    let mu_nl = means(spec, &mean.values(beta_nl.as_slice())?)?;
    let hs_nl = transform(spec.dispersion_link(), &pseudo_dispersion(y, &mu_nl), "dispersion pseudo-response")?;
    let gamma_nl = combine(&gamma_l, disp.correction(&gamma_l, &hs_nl, &mut notes)?);

    Ok(StartingValues { beta: beta_nl, gamma: gamma_nl, notes })
}
