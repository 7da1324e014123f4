mod common;

use common::*;
use simplex_core::estimate::{fit, Algorithm, FitOptions, Phase, StartVariant, StartingMode};

#[test]
fn all_algorithms_reach_the_same_maximum() {
    let data = reading();
    for spec in [constant_dispersion_spec(), varying_dispersion_spec()] {
        let reference = fit_default(&spec, &data);
        for algorithm in [Algorithm::FisherScoring, Algorithm::QuasiNewton] {
            let opts = FitOptions { algorithm, max_iterations: 2000, ..FitOptions::default() };
            let f = fit(&spec, &data, &opts).unwrap();
            assert!(f.converged, "{algorithm:?}: {:?}", f.trace.last());
            let diff = (f.theta() - reference.theta()).amax();
            assert!(diff < 1e-5, "{algorithm:?} differs by {diff}");
            if algorithm == Algorithm::QuasiNewton {
                assert!(f.trace.iter().skip(1).all(|t| t.phase == Phase::QuasiNewton));
            }
        }
    }
}

#[test]
fn user_supplied_start_at_the_maximum_stops_immediately() {
    let data = reading();
    let f = fit_default(&varying_dispersion_spec(), &data);
    let opts = FitOptions {
        starting_mode: StartingMode::UserSupplied {
            beta: f.beta_hat.iter().copied().collect(),
            gamma: f.gamma_hat.iter().copied().collect(),
        },
        ..FitOptions::default()
    };
    let again = fit(&varying_dispersion_spec(), &data, &opts).unwrap();
    assert!(again.converged);
    assert!(again.iterations <= 1);
    assert!((again.theta() - f.theta()).amax() < 1e-9);
}

#[test]
fn correction_only_start_variant_also_converges() {
    let data = reading();
    let opts = FitOptions { start_variant: StartVariant::CorrectionOnly, ..FitOptions::default() };
    let f = fit(&varying_dispersion_spec(), &data, &opts).unwrap();
    assert!(f.converged);
    assert!((f.theta() - fit_default(&varying_dispersion_spec(), &data).theta()).amax() < 1e-5);
}

#[test]
fn loglikelihood_trace_never_decreases() {
    let data = reading();
    let f = fit_default(&varying_dispersion_spec(), &data);
    for w in f.trace.windows(2) {
        assert!(w[1].loglik >= w[0].loglik - 1e-9 * (1.0 + w[0].loglik.abs()), "{w:?}");
    }
}
