//! Compiled built-in machines agree with the procedural reference
//! interpreters on exhaustive short traces and on long random traces.

use ced_core::rules::{builtin_rules, reference_label, RuleSet};
use ced_core::AtomicEvent::{self, *};
use ced_core::ComplexEvent;
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn sub_alphabet(ce: u8) -> [AtomicEvent; 4] {
    match ce {
        1 => [FlushToilet, Wash, Type, Click],
        2 => [Eat, Drink, Sit, Wash],
        3 => [Brush, Walk, Sit, Wash],
        4 => [Brush, Eat, Drink, Walk],
        5 => [Sit, Type, Click, Walk],
        6 => [Wash, Walk, Sit, Eat],
        7 => [Brush, Walk, Sit, Eat],
        8 => [Eat, Type, Click, Sit],
        9 => [Type, Walk, Click, Sit],
        10 => [Sit, Click, Walk, Type],
        _ => unreachable!(),
    }
}

fn check(rules: &RuleSet, ce: ComplexEvent, trace: &[AtomicEvent]) -> usize {
    let machine = rules.machine(ce).unwrap();
    let got = machine.run(trace);
    let want = reference_label(ce, trace).unwrap();
    assert_eq!(got, want, "{ce} disagrees on {trace:?}");
    got.iter().filter(|e| **e).count()
}

#[test]
fn exhaustive_short_traces() {
    let rules = builtin_rules();
    for ce in ComplexEvent::positive() {
        let machine = rules.machine(ce).unwrap();
        let alpha = sub_alphabet(ce.id());
        let mut emitted = 0usize;
        for len in 1..=6u32 {
            for code in 0..4usize.pow(len) {
                let mut c = code;
                let trace: Vec<AtomicEvent> = (0..len)
                    .map(|_| {
                        let a = alpha[c % 4];
                        c /= 4;
                        a
                    })
                    .collect();
                let got = machine.run(&trace);
                let want = reference_label(ce, &trace).unwrap();
                assert_eq!(got, want, "{ce} disagrees on {trace:?}");
                emitted += got.iter().filter(|e| **e).count();
            }
        }
        // rules whose minimum length exceeds 6 cannot fire here
        if !matches!(ce.id(), 7 | 8) {
            assert!(emitted > 0, "{ce} never emitted in exhaustive run");
        }
    }
}

#[test]
fn uniform_random_traces() {
    let rules = builtin_rules();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0e1e_0e10);
    let mut counts = [0usize; 11];
    for _ in 0..10_000 {
        let trace: Vec<AtomicEvent> = (0..60)
            .map(|_| AtomicEvent::ALL[rng.random_range(0..9)])
            .collect();
        for ce in ComplexEvent::positive() {
            counts[ce.id() as usize] += check(&rules, ce, &trace);
        }
    }
    eprintln!("uniform emissions per class: {:?}", &counts[1..]);
}

/// Random traces with per-trace token weights and long dwell, so that the
/// duration and gap rules fire as well.
#[test]
fn biased_random_traces() {
    let rules = builtin_rules();
    let mut rng = ChaCha8Rng::seed_from_u64(0xb1a5);
    let mut counts = [0usize; 11];
    for _ in 0..10_000 {
        let weights: Vec<f64> = (0..9).map(|_| rng.random::<f64>().powi(3)).collect();
        let pick = WeightedIndex::new(&weights).unwrap();
        let dwell: f64 = rng.random_range(0.0..0.97);
        let mut cur = AtomicEvent::ALL[pick.sample(&mut rng)];
        let trace: Vec<AtomicEvent> = (0..60)
            .map(|_| {
                if !rng.random_bool(dwell) {
                    cur = AtomicEvent::ALL[pick.sample(&mut rng)];
                }
                cur
            })
            .collect();
        for ce in ComplexEvent::positive() {
            counts[ce.id() as usize] += check(&rules, ce, &trace);
        }
    }
    eprintln!("biased emissions per class: {:?}", &counts[1..]);
    assert!(counts[1..].iter().all(|&c| c > 0), "{counts:?}");
}

fn all_traces(alpha: &[AtomicEvent], max_len: u32) -> impl Iterator<Item = Vec<AtomicEvent>> + '_ {
    let k = alpha.len();
    (1..=max_len).flat_map(move |len| {
        (0..k.pow(len)).map(move |mut code| {
            (0..len)
                .map(|_| {
                    let a = alpha[code % k];
                    code /= k;
                    a
                })
                .collect()
        })
    })
}

#[test]
fn duration_pattern_matches_e6_reference() {
    use ced_core::fsm::{compile, parse_pattern};
    let e6 = ComplexEvent::of(6);
    let m = compile(&parse_pattern("DUR(wash, 6, consecutive)").unwrap(), e6).unwrap();
    for t in all_traces(&[Wash, Walk], 8) {
        assert_eq!(m.run(&t), reference_label(e6, &t).unwrap(), "{t:?}");
    }
}

/// The e1 rule written with the ABSENT combinator instead of a raw
/// machine behaves identically.
#[test]
fn absent_combinator_matches_e1_reference() {
    use ced_core::fsm::{compile, parse_pattern};
    let e1 = ComplexEvent::of(1);
    let src = "ABSENT(DUR(wash, 4, consecutive), trigger={flush_toilet}, violation={type,click})";
    let m = compile(&parse_pattern(src).unwrap(), e1).unwrap();
    for t in all_traces(&[FlushToilet, Wash, Type, Walk], 7) {
        assert_eq!(m.run(&t), reference_label(e1, &t).unwrap(), "{t:?}");
    }
}
