mod common;

use common::criteria::{bench_properties, litqa_records, trial_records};
use kgresearch_core::bench::{filter_records, prepare_dataset, Benchmark};
use proptest::prelude::*;

#[test]
fn filters_and_counts() {
    bench_properties().unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn filters_are_idempotent(seed in any::<u64>(), n in 0usize..120) {
        for (bench, records) in [(Benchmark::Litqa2, litqa_records(n)), (Benchmark::TrialpanoramaEqa, trial_records(n))] {
            let once = filter_records(&records, bench, seed).unwrap();
            prop_assert_eq!(&filter_records(&once, bench, seed).unwrap(), &once);
            prop_assert_eq!(prepare_dataset(&records, bench, seed).unwrap().len(), once.len());
        }
    }
}
