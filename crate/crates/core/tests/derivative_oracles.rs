mod common;

use common::oracles::{derivative_errors, random_problem};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn analytic_derivatives_match_finite_differences(seed in any::<u64>()) {
        let p = random_problem(seed);
        let errs = derivative_errors(&p);
        let labels = ["score", "observed information", "case-weight delta", "response delta", "covariate delta"];
        for (e, l) in errs.iter().zip(labels) {
            prop_assert!(*e < 1e-5, "{l}: relative error {e:e} for {} | {}", p.spec.mean(), p.spec.dispersion());
        }
    }
}
