//! Synthetic datasets drawn from a simplex regression model.
//!
//! The default generator mimics the layout of a catalytic-cracking yield
//! study: a discrete steam-flow setting, a two-level temperature, and a
//! continuous vanadium content, with a rational steam effect in the mean
//! and a quadratic vanadium effect on the dispersion.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use simplex_core::data::Dataset;
use simplex_core::model::{assemble, ModelConfig};
use simplex_core::simulate::{replicate_rng, ResponseSimulator};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovariateDraw {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Uniform over a finite set of values.
    Choice {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCovariate {
    pub name: String,
    #[serde(flatten)]
    pub draw: CovariateDraw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n: usize,
    pub response: String,
    pub model: ModelConfig,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub covariates: Vec<GeneratedCovariate>,
    /// File name inside the output directory.
    pub output: String,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let mut model =
            ModelConfig::new("b1 + b2*steam/(steam + b3) + b4*temp + b5*sqrt(vanadium)", "g1 + g2*vanadium^2");
        model.pinned_starts = BTreeMap::from([("b3".to_string(), -20.0)]);
        let cov = |name: &str, draw| GeneratedCovariate { name: name.into(), draw };
        Self {
            n: 500,
            response: "yield".into(),
            model,
            beta: vec![2.374, -0.106, -27.8, -0.290, -0.751],
            gamma: vec![0.8246, -1.217],
            covariates: vec![
                cov("steam", CovariateDraw::Choice { values: vec![0.0, 5.0, 12.0, 40.0, 55.8, 80.0] }),
                cov("temp", CovariateDraw::Choice { values: vec![-1.0, 1.0] }),
                cov("vanadium", CovariateDraw::Uniform { lo: 0.5, hi: 2.0 }),
            ],
            output: "simulated.csv".into(),
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.n < 2 {
            return bad("simulate.n must be at least 2");
        }
        if self.output.is_empty() || self.output.contains(['/', '\\']) {
            return bad("simulate.output must be a plain file name");
        }
        for c in &self.covariates {
            match &c.draw {
                CovariateDraw::Uniform { lo, hi } if !(lo <= hi) => return bad("uniform covariate needs lo ≤ hi"),
                CovariateDraw::Choice { values } if values.is_empty() => return bad("choice covariate needs values"),
                _ => {}
            }
            if c.name == self.response {
                return bad("a covariate cannot share the response name");
            }
        }
        Ok(())
    }

    /// Covariates from stream `u64::MAX` of `seed`, responses from stream 0.
    pub fn generate(&self, seed: u64) -> Result<Dataset, CliError> {
        self.validate()?;
        let spec = self.model.build()?;
        let mut rng = replicate_rng(seed, u64::MAX);
        let mut names = vec![self.response.clone()];
        let mut columns = vec![vec![0.5; self.n]];
        for c in &self.covariates {
            let col = (0..self.n)
                .map(|_| match &c.draw {
                    CovariateDraw::Uniform { lo, hi } => rng.random_range(*lo..=*hi),
                    CovariateDraw::Choice { values } => *values.choose(&mut rng).expect("non-empty"),
                })
                .collect();
            names.push(c.name.clone());
            columns.push(col);
        }
        let design = Dataset::new(names, columns, &self.response)?;
        let beta = DVector::from_column_slice(&self.beta);
        let gamma = DVector::from_column_slice(&self.gamma);
        let truth = assemble(&spec, &design, &beta, &gamma)?;
        let sim = ResponseSimulator::new(truth.mu.as_slice(), truth.sigma2.as_slice())
            .map_err(|e| CliError::Config(format!("true parameters: {e}")))?;
        Ok(design.with_response(sim.draw(seed, 0))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_reproducible_and_in_support() {
        let g = GeneratorConfig { n: 50, ..GeneratorConfig::default() };
        let a = g.generate(9).unwrap();
        let b = g.generate(9).unwrap();
        assert_eq!(a.response(), b.response());
        assert!(a.response().iter().all(|&y| y > 0.0 && y < 1.0));
        let steam = a.column("steam").unwrap();
        assert!(steam.iter().all(|s| [0.0, 5.0, 12.0, 40.0, 55.8, 80.0].contains(s)));
        assert_ne!(g.generate(10).unwrap().response(), a.response());
    }

    #[test]
    fn rejects_paths_as_output_names() {
        let g = GeneratorConfig { output: "../x.csv".into(), ..GeneratorConfig::default() };
        assert!(matches!(g.generate(1), Err(CliError::Config(_))));
    }
}
