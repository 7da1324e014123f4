//! Model specification, link functions and the per-observation design state.

mod link;
mod state;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset};
use crate::formula::{CompiledDerivatives, Formula, FormulaError, ParamRule};

pub use link::{link_eval, LinkKind, LinkMode};
pub use state::{assemble, loglik, DesignState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("formula error: {0}")]
    Formula(#[from] FormulaError),
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("link error: {0}")]
    Link(String),
    #[error("covariate '{0}' not found in the dataset")]
    UnknownCovariate(String),
    #[error("invalid state at observation {obs}: {message}")]
    InvalidState { obs: usize, message: String },
    #[error("parameter vector has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Plain description of a model, suitable for configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub mean_formula: String,
    pub dispersion_formula: String,
    #[serde(default = "default_mean_link")]
    pub mean_link: LinkKind,
    #[serde(default = "default_dispersion_link")]
    pub dispersion_link: LinkKind,
    /// Mean parameter names. When absent, identifiers starting with
    /// `beta_prefix` are parameters.
    #[serde(default)]
    pub beta_names: Option<Vec<String>>,
    #[serde(default)]
    pub gamma_names: Option<Vec<String>>,
    #[serde(default = "default_beta_prefix")]
    pub beta_prefix: String,
    #[serde(default = "default_gamma_prefix")]
    pub gamma_prefix: String,
    /// Starting values for parameters a linear reduction cannot identify.
    #[serde(default)]
    pub pinned_starts: BTreeMap<String, f64>,
}

fn default_mean_link() -> LinkKind {
    LinkKind::Logit
}
fn default_dispersion_link() -> LinkKind {
    LinkKind::Log
}
fn default_beta_prefix() -> String {
    "b".into()
}
fn default_gamma_prefix() -> String {
    "g".into()
}

impl ModelConfig {
    pub fn new(mean_formula: &str, dispersion_formula: &str) -> Self {
        Self {
            mean_formula: mean_formula.into(),
            dispersion_formula: dispersion_formula.into(),
            mean_link: default_mean_link(),
            dispersion_link: default_dispersion_link(),
            beta_names: None,
            gamma_names: None,
            beta_prefix: default_beta_prefix(),
            gamma_prefix: default_gamma_prefix(),
            pinned_starts: BTreeMap::new(),
        }
    }

    pub fn build(&self) -> Result<ModelSpec, ModelError> {
        let rule = |names: &Option<Vec<String>>, prefix: &str| match names {
            Some(n) => ParamRule::Declared(n.clone()),
            None => ParamRule::Prefix(prefix.to_string()),
        };
        let mean = Formula::parse(&self.mean_formula, &rule(&self.beta_names, &self.beta_prefix))?;
        let dispersion = Formula::parse(&self.dispersion_formula, &rule(&self.gamma_names, &self.gamma_prefix))?;
        ModelSpec::new(
            mean,
            dispersion,
            self.mean_link,
            self.dispersion_link,
            self.pinned_starts.clone().into_iter().collect(),
        )
    }
}

/// Validated model: two formulas with disjoint parameter sets and links.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    mean: Formula,
    dispersion: Formula,
    mean_link: LinkKind,
    dispersion_link: LinkKind,
    pinned: Vec<(String, f64)>,
    mean_deriv: CompiledDerivatives,
    dispersion_deriv: CompiledDerivatives,
}

impl ModelSpec {
    pub fn new(
        mean: Formula,
        dispersion: Formula,
        mean_link: LinkKind,
        dispersion_link: LinkKind,
        pinned: Vec<(String, f64)>,
    ) -> Result<Self, ModelError> {
        if !mean_link.is_mean_link() {
            return Err(ModelError::InvalidSpec(format!("'{mean_link}' is not a mean link")));
        }
        if !dispersion_link.is_dispersion_link() {
            return Err(ModelError::InvalidSpec(format!("'{dispersion_link}' is not a dispersion link")));
        }
        if mean.params().is_empty() {
            return Err(ModelError::InvalidSpec("mean formula has no parameters".into()));
        }
        if dispersion.params().is_empty() {
            return Err(ModelError::InvalidSpec("dispersion formula has no parameters".into()));
        }
        for (f, which) in [(&mean, "mean"), (&dispersion, "dispersion")] {
            if let Some(p) = f.unused_params().first() {
                return Err(ModelError::InvalidSpec(format!("{which} parameter '{p}' does not occur in its formula")));
            }
        }
        let all: Vec<&String> = mean.params().iter().chain(dispersion.params()).collect();
        for p in mean.params() {
            if dispersion.params().contains(p) {
                return Err(ModelError::InvalidSpec(format!("parameter '{p}' appears in both submodels")));
            }
        }
        for c in mean.covariates().iter().chain(dispersion.covariates()) {
            if all.contains(&c) {
                return Err(ModelError::InvalidSpec(format!(
                    "'{c}' is a parameter of one submodel but used as a covariate in the other"
                )));
            }
        }
        for (name, v) in &pinned {
            if !all.contains(&name) {
                return Err(ModelError::InvalidSpec(format!("pinned start for unknown parameter '{name}'")));
            }
            if !v.is_finite() {
                return Err(ModelError::InvalidSpec(format!("pinned start for '{name}' is not finite")));
            }
        }
        let mean_deriv = mean.compile(None);
        let dispersion_deriv = dispersion.compile(None);
        Ok(Self { mean, dispersion, mean_link, dispersion_link, pinned, mean_deriv, dispersion_deriv })
    }

    pub fn mean(&self) -> &Formula {
        &self.mean
    }

    pub fn dispersion(&self) -> &Formula {
        &self.dispersion
    }

    pub fn mean_link(&self) -> LinkKind {
        self.mean_link
    }

    pub fn dispersion_link(&self) -> LinkKind {
        self.dispersion_link
    }

    pub fn beta_names(&self) -> &[String] {
        self.mean.params()
    }

    pub fn gamma_names(&self) -> &[String] {
        self.dispersion.params()
    }

    pub fn k(&self) -> usize {
        self.mean.params().len()
    }

    pub fn q(&self) -> usize {
        self.dispersion.params().len()
    }

    pub fn pinned(&self) -> &[(String, f64)] {
        &self.pinned
    }

    pub fn pinned_value(&self, name: &str) -> Option<f64> {
        self.pinned.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub(crate) fn mean_deriv(&self) -> &CompiledDerivatives {
        &self.mean_deriv
    }

    pub(crate) fn dispersion_deriv(&self) -> &CompiledDerivatives {
        &self.dispersion_deriv
    }

    /// Dataset column indices for the mean and dispersion covariates.
    pub fn bind(&self, data: &Dataset) -> Result<(Vec<usize>, Vec<usize>), ModelError> {
        let map = |f: &Formula| {
            f.covariates()
                .iter()
                .map(|c| data.column_index(c).ok_or_else(|| ModelError::UnknownCovariate(c.clone())))
                .collect::<Result<Vec<_>, _>>()
        };
        let (xm, xd) = (map(&self.mean)?, map(&self.dispersion)?);
        let resp = data.response_name();
        if self.mean.covariates().iter().chain(self.dispersion.covariates()).any(|c| c == resp) {
            return Err(ModelError::InvalidSpec(format!("response '{resp}' used as a covariate")));
        }
        Ok((xm, xd))
    }
}

impl From<DataError> for ModelError {
    fn from(e: DataError) -> Self {
        ModelError::InvalidSpec(e.to_string())
    }
}
