mod common;

use common::report;

#[test]
fn truncated_draws_match_rejection() {
    assert!(report(&common::truncated_vs_rejection()));
}

#[test]
fn allocation_probabilities_match_enumeration() {
    assert!(report(&[common::allocation_enumeration()]));
}

#[test]
fn dirichlet_moments_match() {
    assert!(report(&[common::dirichlet_moments()]));
}

#[test]
fn allowed_set_endpoints_match_root_finding() {
    assert!(report(&common::allowed_endpoints()));
}

#[test]
fn empty_data_recovers_plain_prior() {
    assert!(report(&common::prior_recovery_plain()));
}

#[test]
fn empty_data_recovers_repulsive_prior() {
    assert!(report(&common::prior_recovery_repulsive()));
}
