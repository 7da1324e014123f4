//! Monte Carlo study of the weighted residuals under a known model.
//!
//! A base design of `base_n` rows is drawn once per scenario from uniform
//! covariate ranges and stacked `n / base_n` times, so larger samples keep
//! the same covariate configuration. Responses are redrawn per replicate,
//! the model is refitted, and the sorted residuals are pooled.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::diagnostics::{quantile_sorted, weighted_residuals};
use crate::estimate::{fit, FitOptions};
use crate::model::{assemble, ModelConfig, ModelError};
use crate::simulate::{replicate_rng, ResponseSimulator};

/// Independent uniform covariate on [lo, hi].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformCovariate {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl UniformCovariate {
    pub fn new(name: &str, lo: f64, hi: f64) -> Self {
        Self { name: name.to_string(), lo, hi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub model: ModelConfig,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub covariates: Vec<UniformCovariate>,
    pub base_n: usize,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub fit: FitOptions,
}

impl Default for Scenario {
    /// The central-mean scenario with strong nonconstant dispersion.
    fn default() -> Self {
        Self {
            name: "central".into(),
            model: ModelConfig::new("b1 + x2^b2 + b3*x3 + b4*x4", "g1 + z2^g2"),
            beta: vec![-1.7, -1.8, 1.2, -1.3],
            gamma: vec![-1.3, -1.6],
            covariates: vec![
                UniformCovariate::new("x2", 0.5, 1.5),
                UniformCovariate::new("x3", 0.0, 1.0),
                UniformCovariate::new("x4", -0.5, 0.5),
                UniformCovariate::new("z2", 0.5, 1.5),
            ],
            base_n: 40,
            n: 40,
            replications: 1000,
            seed: 2024,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    /// max σ²_t / min σ²_t over the design at the true γ.
    pub lambda: f64,
    pub mu_range: (f64, f64),
    /// Smallest and largest fitted mean over all successful replicates.
    pub mu_hat_range: (f64, f64),
    /// Mean of each residual order statistic across replicates.
    pub mean_order_statistics: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    /// Raw fourth standardized moment (3 under normality).
    pub kurtosis: f64,
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StudyError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{failed} of {total} replicates failed (limit 5%)")]
    TooManyFailures { failed: usize, total: usize },
}

impl Scenario {
    fn validate(&self) -> Result<(), StudyError> {
        let bad = |m: String| Err(StudyError::Invalid(m));
        if self.base_n < 2 || self.n < self.base_n || self.n % self.base_n != 0 {
            return bad(format!("n = {} must be a positive multiple of base_n = {}", self.n, self.base_n));
        }
        if self.replications == 0 {
            return bad("replications must be positive".into());
        }
        if self.covariates.iter().any(|c| !(c.lo <= c.hi)) {
            return bad("covariate ranges need lo ≤ hi".into());
        }
        Ok(())
    }

    /// Stacked design with a placeholder response column `y`.
    pub fn design(&self) -> Result<Dataset, StudyError> {
        self.validate()?;
        // Stream u64::MAX is reserved for the design; replicates use 0, 1, …
        let mut rng = replicate_rng(self.seed, u64::MAX);
        let mut names = vec!["y".to_string()];
        let mut columns = vec![vec![0.5; self.n]];
        for c in &self.covariates {
            let base: Vec<f64> = (0..self.base_n).map(|_| rng.random_range(c.lo..=c.hi)).collect();
            names.push(c.name.clone());
            columns.push(base.iter().cycle().take(self.n).copied().collect());
        }
        Dataset::new(names, columns, "y").map_err(|e| StudyError::Invalid(e.to_string()))
    }
}

fn moments(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let c = |p: i32| x.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n;
    let (m2, m3, m4) = (c(2), c(3), c(4));
    (mean, x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0), m3 / m2.powf(1.5), m4 / (m2 * m2))
}

struct Replicate {
    sorted: Vec<f64>,
    mu_min: f64,
    mu_max: f64,
}

pub fn run_scenario(sc: &Scenario) -> Result<ScenarioResult, StudyError> {
    let spec = sc.model.build()?;
    let design = sc.design()?;
    let beta = nalgebra::DVector::from_column_slice(&sc.beta);
    let gamma = nalgebra::DVector::from_column_slice(&sc.gamma);
    let truth = assemble(&spec, &design, &beta, &gamma)?;
    let sim = ResponseSimulator::new(truth.mu.as_slice(), truth.sigma2.as_slice())
        .map_err(|e| StudyError::Invalid(e.to_string()))?;

    let reps: Vec<Option<Replicate>> = (0..sc.replications as u64)
        .into_par_iter()
        .map(|r| {
            let data = design.with_response(sim.draw(sc.seed, r)).ok()?;
            let f = fit(&spec, &data, &sc.fit).ok().filter(|f| f.converged)?;
            let mut sorted = weighted_residuals(&f).ok()?.r_beta;
            sorted.sort_by(f64::total_cmp);
            let mu = &f.terminal_state.mu;
            Some(Replicate { sorted, mu_min: mu.min(), mu_max: mu.max() })
        })
        .collect();
    let ok: Vec<Replicate> = reps.into_iter().flatten().collect();
    let failures = sc.replications - ok.len();
    if failures * 20 > sc.replications || ok.is_empty() {
        return Err(StudyError::TooManyFailures { failed: failures, total: sc.replications });
    }

    let n = sc.n;
    let mean_order_statistics = (0..n).map(|j| ok.iter().map(|r| r.sorted[j]).sum::<f64>() / ok.len() as f64).collect();
    let mut pooled: Vec<f64> = ok.iter().flat_map(|r| r.sorted.iter().copied()).collect();
    pooled.sort_by(f64::total_cmp);
    let (mean, variance, skewness, kurtosis) = moments(&pooled);
    let mu_hat_range =
        ok.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.mu_min), hi.max(r.mu_max)));
    Ok(ScenarioResult {
        scenario: sc.clone(),
        lambda: truth.sigma2.max() / truth.sigma2.min(),
        mu_range: (truth.mu.min(), truth.mu.max()),
        mu_hat_range,
        mean_order_statistics,
        mean,
        variance,
        skewness,
        kurtosis,
        omega_lo: quantile_sorted(&pooled, 0.025),
        omega_hi: quantile_sorted(&pooled, 0.975),
        successes: ok.len(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_is_stacked_base() {
        let sc = Scenario { n: 120, ..Scenario::default() };
        let d = sc.design().unwrap();
        let x2 = d.column("x2").unwrap();
        assert_eq!(&x2[..40], &x2[40..80]);
        assert_eq!(&x2[..40], &x2[80..]);
        assert!(x2.iter().all(|&v| (0.5..=1.5).contains(&v)));
        assert_eq!(sc.design().unwrap().column("z2"), d.column("z2"));
    }

    #[test]
    fn rejects_non_multiple_sizes() {
        let sc = Scenario { n: 50, ..Scenario::default() };
        assert!(matches!(sc.design(), Err(StudyError::Invalid(_))));
    }

    #[test]
    fn moments_of_symmetric_sample() {
        let (m, v, s, _) = moments(&[-1.0, 0.0, 1.0]);
        assert_eq!(m, 0.0);
        assert_eq!(v, 1.0);
        assert_eq!(s, 0.0);
    }
}
