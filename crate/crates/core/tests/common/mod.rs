#![allow(dead_code)]

use std::path::PathBuf;

use simplex_core::data::Dataset;
use simplex_core::estimate::{fit, FitOptions, FittedModel};
use simplex_core::model::{ModelConfig, ModelSpec};

/// Reading-accuracy data: `READING_ACCURACY_CSV` if set, else the test fixture.
pub fn reading_path() -> PathBuf {
    std::env::var_os("READING_ACCURACY_CSV")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/reading_accuracy.csv"))
}

pub fn reading() -> Dataset {
    Dataset::from_path(reading_path(), "accuracy").expect("reading-accuracy data")
}

pub fn constant_dispersion_spec() -> ModelSpec {
    ModelConfig::new("b1 + b2*dyslexia + b3*iq + b4*dyslexia*iq", "g1").build().unwrap()
}

pub fn varying_dispersion_spec() -> ModelSpec {
    ModelConfig::new("b1 + b2*dyslexia + b3*iq*iq + b4*dyslexia*iq*iq", "g1 + g2*dyslexia + g3*iq").build().unwrap()
}

pub fn fit_default(spec: &ModelSpec, data: &Dataset) -> FittedModel {
    let f = fit(spec, data, &FitOptions::default()).expect("fit");
    assert!(f.converged, "fit did not converge: {:?}", f.trace.last());
    f
}

pub mod dist_checks;
pub mod oracles;
pub mod structural;
