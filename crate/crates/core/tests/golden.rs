//! Hand-derived fixture traces for every rule, checked against both the
//! compiled machines and the reference interpreters.

use ced_core::labeler::label_trace;
use ced_core::rules::{builtin_rules, reference_label};
use ced_core::{parse_ae_token, AtomicEvent, ComplexEvent};

struct Fixture {
    ce: ComplexEvent,
    kind: String,
    trace: Vec<AtomicEvent>,
    windows: Vec<usize>,
}

fn fixtures() -> Vec<Fixture> {
    include_str!("fixtures/golden.txt")
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let parts: Vec<&str> = l.split('|').map(str::trim).collect();
            let (ce, kind) = parts[0].split_once(' ').unwrap();
            let mut trace = Vec::new();
            for tok in parts[1].split_whitespace() {
                let (name, n) = tok.split_once('*').unwrap_or((tok, "1"));
                let ae = parse_ae_token(name).unwrap();
                trace.extend(std::iter::repeat_n(ae, n.parse().unwrap()));
            }
            let windows = match parts[2] {
                "-" => vec![],
                w => w.split_whitespace().map(|x| x.parse().unwrap()).collect(),
            };
            Fixture {
                ce: ce.parse().unwrap(),
                kind: kind.to_string(),
                trace,
                windows,
            }
        })
        .collect()
}

fn expected(f: &Fixture) -> Vec<bool> {
    (1..=f.trace.len())
        .map(|t| f.windows.contains(&t))
        .collect()
}

#[test]
fn at_least_three_fixtures_per_class() {
    let all = fixtures();
    for ce in ComplexEvent::positive() {
        let mine: Vec<&Fixture> = all.iter().filter(|f| f.ce == ce).collect();
        assert!(mine.len() >= 3, "{ce}");
        for kind in ["positive", "negative", "boundary"] {
            assert!(
                mine.iter().any(|f| f.kind == kind),
                "{ce} lacks a {kind} fixture"
            );
        }
    }
}

#[test]
fn machines_match_fixtures() {
    let rules = builtin_rules();
    for f in fixtures() {
        let got = rules.machine(f.ce).unwrap().run(&f.trace);
        assert_eq!(got, expected(&f), "{} {} {:?}", f.ce, f.kind, f.trace);
    }
}

#[test]
fn reference_matches_fixtures() {
    for f in fixtures() {
        assert_eq!(
            reference_label(f.ce, &f.trace).unwrap(),
            expected(&f),
            "{} {}",
            f.ce,
            f.kind
        );
    }
}

#[test]
fn labeler_positive_fixtures_carry_class() {
    let rules = builtin_rules();
    for f in fixtures().iter().filter(|f| f.kind == "positive") {
        let labels = label_trace(&rules, &f.trace);
        for t in &f.windows {
            assert!(labels[t - 1].contains(f.ce));
        }
    }
}
