//! Run configuration: one JSON document shared by every command.
//!
//! Relative paths are resolved against the directory holding the config
//! file. The resolved configuration, with every default filled in, is
//! echoed into each JSON report so any run can be repeated from it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simplex_core::diagnostics::Scheme;
use simplex_core::estimate::FitOptions;
use simplex_core::model::ModelConfig;
use simplex_core::study::Scenario;

use crate::error::CliError;
use crate::generator::GeneratorConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub replicates: usize,
    pub refit: bool,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self { replicates: 100, refit: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfluenceConfig {
    pub schemes: Vec<Scheme>,
    /// Case sets to delete, numbered from 1 as rows of the data file.
    pub deletion_sets: Vec<Vec<usize>>,
}

impl Default for InfluenceConfig {
    fn default() -> Self {
        Self { schemes: vec![Scheme::CaseWeights, Scheme::Response], deletion_sets: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McStudyConfig {
    pub scenarios: Vec<Scenario>,
}

impl Default for McStudyConfig {
    /// Central means, means near one, and the central design at n = 80.
    fn default() -> Self {
        let central = Scenario::default();
        let near_one =
            Scenario { name: "mu_near_one".into(), beta: vec![2.1, -1.5, -1.6, -1.2], ..Scenario::default() };
        let larger = Scenario { name: "central_n80".into(), n: 80, ..Scenario::default() };
        Self { scenarios: vec![central, near_one, larger] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub envelope: EnvelopeConfig,
    #[serde(default)]
    pub influence: InfluenceConfig,
    #[serde(default)]
    pub mc_study: McStudyConfig,
    #[serde(default)]
    pub simulate: GeneratorConfig,
}

fn default_seed() -> u64 {
    1
}

/// Command-line overrides applied after parsing.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(d) = cfg.data.as_mut() {
            d.path = resolve(base, &d.path);
        }
        cfg.out_dir = cfg.out_dir.map(|p| resolve(base, &p));
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
            // An explicit seed also reseeds every Monte Carlo scenario.
            for sc in &mut cfg.mc_study.scenarios {
                sc.seed = seed;
            }
        }
        if let Some(dir) = &overrides.out_dir {
            cfg.out_dir = Some(dir.clone());
        }
        if cfg.out_dir.is_none() {
            cfg.out_dir = Some(base.join("out"));
        }
        Ok(cfg)
    }

    pub fn out_dir(&self) -> &Path {
        self.out_dir.as_deref().expect("resolved at load")
    }

    pub fn data(&self) -> Result<&DataConfig, CliError> {
        self.data.as_ref().ok_or_else(|| CliError::Config("this command needs a \"data\" section".into()))
    }

    pub fn model(&self) -> Result<&ModelConfig, CliError> {
        self.model.as_ref().ok_or_else(|| CliError::Config("this command needs a \"model\" section".into()))
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c =
            RunConfig::from_json(r#"{"model": {"mean_formula": "b1 + b2*x", "dispersion_formula": "g1"}}"#).unwrap();
        assert_eq!(c.seed, 1);
        assert_eq!(c.envelope.replicates, 100);
        assert!(c.envelope.refit);
        assert_eq!(c.mc_study.scenarios.len(), 3);
        assert_eq!(c.fit, FitOptions::default());
    }

    #[test]
    fn unknown_fields_and_links_are_config_errors() {
        assert!(matches!(RunConfig::from_json(r#"{"sede": 3}"#), Err(CliError::Config(_))));
        let bad = r#"{"model": {"mean_formula": "b1", "dispersion_formula": "g1", "mean_link": "tanh"}}"#;
        assert!(matches!(RunConfig::from_json(bad), Err(CliError::Config(_))));
    }

    #[test]
    fn schemes_parse_from_tagged_objects() {
        let c = RunConfig::from_json(
            r#"{"influence": {"schemes": [{"kind": "case_weights"}, {"kind": "covariate", "mean": "iq", "dispersion": null}]}}"#,
        )
        .unwrap();
        assert_eq!(c.influence.schemes[1], Scheme::Covariate { mean: Some("iq".into()), dispersion: None });
    }
}
