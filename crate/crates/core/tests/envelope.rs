mod common;

use common::structural::*;
use simplex_core::diagnostics::simulated_envelope;
use simplex_core::estimate::{fit, FitOptions, FittedModel};
use simplex_core::model::assemble;
use simplex_core::simulate::ResponseSimulator;
use simplex_core::study::Scenario;

/// Central-scenario design with one response draw, fitted.
fn simulated_fit(n: usize, seed: u64) -> FittedModel {
    let sc = Scenario { n, seed, ..Scenario::default() };
    let spec = sc.model.build().unwrap();
    let design = sc.design().unwrap();
    let truth = assemble(&spec, &design, &sc.beta.clone().into(), &sc.gamma.clone().into()).unwrap();
    let sim = ResponseSimulator::new(truth.mu.as_slice(), truth.sigma2.as_slice()).unwrap();
    let data = design.with_response(sim.draw(seed, 0)).unwrap();
    let f = fit(&spec, &data, &FitOptions::default()).unwrap();
    assert!(f.converged);
    f
}

#[test]
fn envelope_is_deterministic_and_ordered() {
    let f = simulated_fit(40, 3);
    let a = simulated_envelope(&f, 19, 5, true).unwrap();
    let b = simulated_envelope(&f, 19, 5, true).unwrap();
    assert_eq!(a, b);
    assert!(a.observed.windows(2).all(|w| w[0] <= w[1]));
    for j in 0..a.observed.len() {
        assert!(a.lower[j] <= a.median[j] && a.median[j] <= a.upper[j]);
    }
    assert!(a.omega_lo < a.omega_hi);
    assert!(simulated_envelope(&f, 18, 5, true).is_err());
}

#[test]
fn envelope_covers_well_specified_fit() {
    let f = simulated_fit(40, 21);
    let e = simulated_envelope(&f, 100, 8, true).unwrap();
    assert!(e.coverage() >= 0.9, "coverage {}", e.coverage());
    assert!((e.omega_lo + 2.0).abs() < 0.3 && (e.omega_hi - 2.0).abs() < 0.3, "{} {}", e.omega_lo, e.omega_hi);
    assert!((e.omega_hi - e.omega_lo - 4.0).abs() < 0.6);
    assert!(e.n_skipped * 10 <= e.n_replicates);
}

#[test]
fn envelope_without_refit_uses_fitted_parameters() {
    let f = simulated_fit(40, 4);
    let e = simulated_envelope(&f, 30, 1, false).unwrap();
    assert!(!e.refit);
    assert_eq!(e.observed.len(), 40);
}

#[test]
fn structural_invariants_on_simulated_fits() {
    for (n, seed) in [(40, 1), (80, 2), (120, 3)] {
        let f = simulated_fit(n, seed);
        hat_invariants(&f).unwrap();
        residual_recomputation(&f).unwrap();
        curvature_invariants(&f, seed).unwrap();
        deletion_matches_scratch(&f, &[0, 5]).unwrap();
    }
}
