mod common;

use common::oracles::information_identity;

#[test]
fn mean_observed_information_matches_fisher() {
    let (worst_z, block_zero) = information_identity(500, 200, 7);
    assert!(block_zero, "the beta-gamma Fisher block must be exactly zero");
    assert!(worst_z < 3.0, "largest standardized discrepancy {worst_z}");
}
