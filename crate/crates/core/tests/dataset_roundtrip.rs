//! Write/read identity for random valid datasets.

use ced_core::dataset::{read_records, write_records, DatasetRecord, Manifest};
use ced_core::labeler::Priority;
use ced_core::rules::builtin_rules;
use ced_core::simulator::{default_transition_model, generate_dataset, Preset};
use ced_core::AtomicEvent;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn random_records_round_trip(traces in prop::collection::vec(
        prop::collection::vec((0usize..9).prop_map(|i| AtomicEvent::ALL[i]), 1..80), 1..12),
        seeds in prop::collection::vec(any::<u64>(), 12),
    ) {
        let rules = builtin_rules();
        let p = Priority::default();
        let recs: Vec<DatasetRecord> = traces
            .into_iter()
            .enumerate()
            .map(|(i, t)| DatasetRecord::label(format!("r-{i:03}"), seeds[i], t, &rules, &p))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ced.jsonl");
        let m = Manifest::new("test", recs.len(), &rules, &p);
        write_records(&path, &recs, &m).unwrap();
        let back = read_records(&path).unwrap();
        prop_assert_eq!(back.records, recs);
        prop_assert_eq!(back.manifest, Some(m));
    }
}

#[test]
fn generated_dataset_round_trips() {
    let rules = builtin_rules();
    let model = default_transition_model();
    let cfg = ced_core::simulator::GenerationConfig {
        num_traces: 300,
        ..Preset::Test.config(2)
    };
    let p = Priority::default();
    let recs = generate_dataset(&rules, &model, &cfg, &p).unwrap();
    let m = Manifest::new("test", recs.len(), &rules, &p).with_generation(&model, &cfg);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("test.ced.jsonl");
    write_records(&path, &recs, &m).unwrap();
    let back = read_records(&path).unwrap();
    assert_eq!(back.records, recs);
    assert_eq!(back.manifest.unwrap(), m);
}
