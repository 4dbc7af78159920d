mod common;

use std::collections::BTreeSet;

use common::criteria::{ebm_fixture, ebm_scoring};
use kgresearch_core::curate::ebm::score_predictions;
use proptest::prelude::*;

#[test]
fn gap_truth_is_set_difference() {
    ebm_fixture().unwrap();
}

#[test]
fn hand_computed_scores() {
    ebm_scoring().unwrap();
}

proptest! {
    #[test]
    fn recall_is_monotone_in_k(
        truth in prop::collection::btree_set(0u64..40, 1..8),
        ranked in prop::collection::vec(0u64..40, 0..50),
        k in 0usize..50,
    ) {
        let a = score_predictions(&ranked, &truth, k).unwrap().recall_at_k;
        let b = score_predictions(&ranked, &truth, k + 1).unwrap().recall_at_k;
        prop_assert!(a <= b);
        prop_assert!((0.0..=1.0).contains(&b));
        let all: BTreeSet<u64> = ranked.iter().copied().collect();
        if truth.is_subset(&all) {
            prop_assert_eq!(score_predictions(&ranked, &truth, ranked.len()).unwrap().recall_at_k, 1.0);
        }
    }
}
