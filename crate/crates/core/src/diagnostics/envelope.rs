use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::residuals::{weighted_residuals, weighted_residuals_at};
use super::DiagnosticsError;
use crate::estimate::{fit, FitOptions, FittedModel, StartingMode};
use crate::model::assemble;
use crate::simulate::ResponseSimulator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeBands {
    /// Observed weighted residuals, ascending.
    pub observed: Vec<f64>,
    pub lower: Vec<f64>,
    pub median: Vec<f64>,
    pub upper: Vec<f64>,
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub n_replicates: usize,
    pub n_skipped: usize,
    pub seed: u64,
    pub refit: bool,
}

impl EnvelopeBands {
    /// Fraction of observed order statistics inside [lower, upper].
    pub fn coverage(&self) -> f64 {
        let inside = self
            .observed
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .filter(|(o, (l, u))| *o >= *l && *o <= *u)
            .count();
        inside as f64 / self.observed.len() as f64
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sort(v: &mut [f64]) {
    v.sort_by(f64::total_cmp);
}

/// Simulated envelope of the weighted residuals. With `refit`, every
/// simulated response vector is refitted (starting from θ̂); otherwise the
/// residuals are evaluated at θ̂.
pub fn simulated_envelope(
    fit_: &FittedModel,
    n_rep: usize,
    seed: u64,
    refit: bool,
) -> Result<EnvelopeBands, DiagnosticsError> {
    if n_rep < 19 {
        return Err(DiagnosticsError::Invalid(format!("at least 19 replicates are needed, got {n_rep}")));
    }
    let observed = {
        let mut r = weighted_residuals(fit_)?.r_beta;
        sort(&mut r);
        r
    };
    let st = &fit_.terminal_state;
    let sim = ResponseSimulator::new(st.mu.as_slice(), st.sigma2.as_slice())
        .map_err(|e| DiagnosticsError::Invalid(e.to_string()))?;
    let opts = FitOptions {
        starting_mode: StartingMode::UserSupplied {
            beta: fit_.beta_hat.iter().copied().collect(),
            gamma: fit_.gamma_hat.iter().copied().collect(),
        },
        ..fit_.options.clone()
    };
    let replicates: Vec<Option<Vec<f64>>> = (0..n_rep as u64)
        .into_par_iter()
        .map(|i| {
            let y = sim.draw(seed, i);
            let data = fit_.data.with_response(y).ok()?;
            let state = if refit {
                let f = fit(&fit_.spec, &data, &opts).ok()?;
                if !f.converged {
                    return None;
                }
                f.terminal_state
            } else {
                assemble(&fit_.spec, &data, &fit_.beta_hat, &fit_.gamma_hat).ok()?
            };
            let mut r = weighted_residuals_at(&state).ok()?.r_beta;
            sort(&mut r);
            Some(r)
        })
        .collect();
    let ok: Vec<Vec<f64>> = replicates.into_iter().flatten().collect();
    let skipped = n_rep - ok.len();
    if skipped * 10 > n_rep {
        return Err(DiagnosticsError::TooManyFailures { failed: skipped, total: n_rep });
    }
    let n = observed.len();
    let (mut lower, mut median, mut upper) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for j in 0..n {
        let mut col: Vec<f64> = ok.iter().map(|r| r[j]).collect();
        sort(&mut col);
        lower.push(col[0]);
        median.push(quantile_sorted(&col, 0.5));
        upper.push(col[col.len() - 1]);
    }
    let mut pooled: Vec<f64> = ok.into_iter().flatten().collect();
    sort(&mut pooled);
    Ok(EnvelopeBands {
        observed,
        lower,
        median,
        upper,
        omega_lo: quantile_sorted(&pooled, 0.025),
        omega_hi: quantile_sorted(&pooled, 0.975),
        n_replicates: n_rep,
        n_skipped: skipped,
        seed,
        refit,
    })
}
