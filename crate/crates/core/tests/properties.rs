//! Engine and labeler invariants over random traces.

use ced_core::labeler::{label_trace, stream_step, to_single_label, LabelSession, Priority};
use ced_core::rules::builtin_rules;
use ced_core::{AtomicEvent, CeSet, ComplexEvent};
use proptest::prelude::*;
use rayon::prelude::*;

fn trace(max: usize) -> impl Strategy<Value = Vec<AtomicEvent>> {
    prop::collection::vec((0usize..9).prop_map(|i| AtomicEvent::ALL[i]), 1..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn machine_runs_are_prefix_closed(tr in trace(120)) {
        let rules = builtin_rules();
        for (_, rule) in rules.iter() {
            let full = rule.machine.run(&tr);
            for p in [1, tr.len() / 3, tr.len() / 2, tr.len()] {
                let p = p.max(1);
                prop_assert_eq!(&rule.machine.run(&tr[..p]), &full[..p].to_vec());
            }
        }
    }

    #[test]
    fn values_stay_bounded_and_first_match_fires(tr in trace(200)) {
        let rules = builtin_rules();
        for (_, rule) in rules.iter() {
            let m = &rule.machine;
            let mut st = m.initial_state();
            for (w, &ae) in tr.iter().enumerate() {
                let before = st.clone();
                let out = m.advance(&mut st, ae);
                prop_assert_eq!(st.window as usize, w + 1);
                let ts = m.transitions(before.state);
                match out.transition {
                    Some(i) => {
                        prop_assert!(ts[..i].iter().all(|t| !t.guard.holds(ae, &before)));
                        prop_assert!(ts[i].guard.holds(ae, &before));
                        prop_assert_eq!(out.emitted, ts[i].emit);
                        prop_assert_eq!(st.state, ts[i].target);
                    }
                    None => {
                        prop_assert!(ts.iter().all(|t| !t.guard.holds(ae, &before)));
                        prop_assert_eq!(st.state, before.state);
                        prop_assert!(!out.emitted);
                    }
                }
                for (v, cap) in st.clocks.iter().zip(m.clock_caps()) {
                    prop_assert!(v <= cap);
                }
                for (v, cap) in st.counters.iter().zip(m.counter_caps()) {
                    prop_assert!(v <= cap);
                }
            }
        }
    }

    #[test]
    fn projection_is_sound(ids in prop::collection::vec(0u16..1024, 1..50)) {
        let seq: Vec<CeSet> = ids
            .iter()
            .map(|bits| (1..=10u8).filter(|i| bits & (1 << (i - 1)) != 0).map(ComplexEvent::of).collect())
            .collect();
        let single = to_single_label(&seq, &Priority::default());
        for (s, c) in seq.iter().zip(&single) {
            if s.is_empty() {
                prop_assert!(c.is_default());
            } else {
                prop_assert!(s.contains(*c));
                prop_assert!(s.iter().all(|x| x.id() >= c.id()));
            }
        }
    }
}

fn random_traces(n: usize, len: usize, seed: u64) -> Vec<Vec<AtomicEvent>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            (0..len)
                .map(|_| AtomicEvent::ALL[rng.random_range(0..9)])
                .collect()
        })
        .collect()
}

#[test]
fn labels_equal_streaming_fold_and_prefixes() {
    let rules = builtin_rules();
    for tr in random_traces(1000, 60, 99) {
        let full = label_trace(&rules, &tr);
        let mut s = LabelSession::new(&rules);
        let streamed: Vec<CeSet> = tr.iter().map(|&a| stream_step(&mut s, a)).collect();
        assert_eq!(streamed, full);
        for p in 1..=tr.len() {
            assert_eq!(label_trace(&rules, &tr[..p]), full[..p]);
        }
    }
}

#[test]
fn labels_do_not_depend_on_thread_count() {
    let rules = builtin_rules();
    let traces = random_traces(400, 120, 5);
    let serial: Vec<_> = traces.iter().map(|t| label_trace(&rules, t)).collect();
    let parallel: Vec<_> = traces.par_iter().map(|t| label_trace(&rules, t)).collect();
    assert_eq!(serial, parallel);
}
