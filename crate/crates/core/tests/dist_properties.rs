mod common;

use common::dist_checks::*;

#[test]
fn density_integrates_to_one() {
    for p in grid() {
        let e = normalization_error(&p);
        assert!(e < 1e-8, "{p:?}: {e:e}");
    }
}

#[test]
fn sampler_passes_ks_against_quadrature_cdf() {
    for (i, p) in grid().enumerate() {
        let pv = ks_p_value(&p, 1000, 100 + i as u64);
        assert!(pv > 0.01, "{p:?}: KS p-value {pv}");
    }
}

#[test]
fn variance_matches_quadrature() {
    for p in grid() {
        let e = variance_error(&p);
        assert!(e < 5e-3, "{p:?}: relative error {e:e}");
    }
}
