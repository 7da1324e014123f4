use serde::{Deserialize, Serialize};

use super::DiagnosticsError;
use crate::estimate::{constant_dispersion, fit, inference_table, ConstantDispersion, EstimateError, FittedModel};

/// Change of one parameter after deleting a set of cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeRow {
    pub name: String,
    pub estimate_old: f64,
    pub estimate_new: f64,
    /// 100·(new − old)/|old|.
    pub change_pct: f64,
    /// 100·(new − old)/old; the sign follows the direction of the old value.
    pub change_pct_signed: f64,
    pub se_old: f64,
    pub se_new: f64,
    pub se_change_pct: f64,
    pub se_change_pct_signed: f64,
    pub p_value_new: f64,
}

/// The same comparison for the precision 1/σ² of a constant-dispersion model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionChange {
    pub old: ConstantDispersion,
    pub new: ConstantDispersion,
    pub precision_change_pct: f64,
    pub precision_se_change_pct: f64,
}

#[derive(Debug, Clone)]
pub struct DeletionReport {
    /// Deleted cases, 0-based and ascending.
    pub cases: Vec<usize>,
    pub rows: Vec<ChangeRow>,
    pub dispersion: Option<DispersionChange>,
    pub refit: FittedModel,
}

fn pct(new: f64, old: f64, denom: f64) -> f64 {
    if new == old {
        0.0
    } else {
        100.0 * (new - old) / denom
    }
}

/// Refits without `cases` (0-based) using the original fit options, so the
/// starting values come from the same procedure.
pub fn delete_and_refit(original: &FittedModel, cases: &[usize]) -> Result<DeletionReport, DiagnosticsError> {
    if !original.converged {
        return Err(DiagnosticsError::NotConverged);
    }
    let n = original.data.n();
    let mut sorted = cases.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(DiagnosticsError::BadCase(w[0] + 1));
        }
    }
    if let Some(&bad) = sorted.iter().find(|&&c| c >= n) {
        return Err(DiagnosticsError::BadCase(bad + 1));
    }
    let params = original.k() + original.q();
    if n - sorted.len() <= params {
        return Err(EstimateError::TooFewObservations { n: n - sorted.len(), params }.into());
    }
    let data = original.data.without_rows(&sorted).map_err(|e| DiagnosticsError::Invalid(e.to_string()))?;
    let refit = fit(&original.spec, &data, &original.options)?;
    if !refit.converged {
        return Err(EstimateError::NotConverged.into());
    }
    let old = inference_table(original)?;
    let new = inference_table(&refit)?;
    let rows = old
        .iter()
        .zip(&new)
        .map(|(o, r)| ChangeRow {
            name: o.name.clone(),
            estimate_old: o.estimate,
            estimate_new: r.estimate,
            change_pct: pct(r.estimate, o.estimate, o.estimate.abs()),
            change_pct_signed: pct(r.estimate, o.estimate, o.estimate),
            se_old: o.se,
            se_new: r.se,
            se_change_pct: pct(r.se, o.se, o.se.abs()),
            se_change_pct_signed: pct(r.se, o.se, o.se),
            p_value_new: r.p_value,
        })
        .collect();
    let dispersion = match (constant_dispersion(original), constant_dispersion(&refit)) {
        (Some(o), Some(r)) => Some(DispersionChange {
            old: o,
            new: r,
            precision_change_pct: pct(r.precision, o.precision, o.precision),
            precision_se_change_pct: pct(r.precision_se, o.precision_se, o.precision_se),
        }),
        _ => None,
    };
    Ok(DeletionReport { cases: sorted, rows, dispersion, refit })
}
