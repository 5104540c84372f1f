//! Metric and focal-loss properties.

use ced_core::metrics::*;
use ced_core::{CeSet, ComplexEvent, NUM_COMPLEX};
use proptest::prelude::*;

fn labels(len: usize) -> impl Strategy<Value = Vec<ComplexEvent>> {
    prop::collection::vec(
        prop_oneof![8 => Just(0u8), 2 => 1u8..=10].prop_map(ComplexEvent::of),
        len,
    )
}

fn batch() -> impl Strategy<Value = Vec<Vec<ComplexEvent>>> {
    prop::collection::vec(labels(30), 1..8)
}

fn perfect(refs: &[Vec<ComplexEvent>]) -> Vec<PredictionRecord> {
    refs.iter()
        .enumerate()
        .map(|(i, r)| PredictionRecord {
            id: i.to_string(),
            predicted: r.clone(),
            reference: Reference::Single(r.clone()),
        })
        .collect()
}

proptest! {
    #[test]
    fn perfect_predictions_score_one(refs in batch()) {
        let recs = perfect(&refs);
        prop_assert_eq!(length_accuracy(&recs), Ok(1.0));
        for ce in ComplexEvent::positive() {
            let present = refs.iter().flatten().any(|c| *c == ce);
            let want = present.then_some(1.0);
            prop_assert_eq!(conditional_f1(&recs, ce), want);
            prop_assert_eq!(coarse_f1(&recs, ce), want);
            prop_assert_eq!(window_f1(&recs, ce).unwrap(), want);
        }
        let p = positive_f1(&recs).unwrap();
        prop_assert!(p.score.is_none() || p.score == Some(1.0));
    }

    #[test]
    fn scores_lie_in_unit_interval_and_are_pure(refs in batch(), preds in batch()) {
        let recs: Vec<PredictionRecord> = refs
            .iter()
            .zip(preds.iter().cycle())
            .enumerate()
            .map(|(i, (r, p))| PredictionRecord {
                id: i.to_string(),
                predicted: p[..(i * 7) % 31].to_vec(),
                reference: Reference::Single(r.clone()),
            })
            .collect();
        let all: Vec<ComplexEvent> = ComplexEvent::positive().collect();
        let a = MetricsReport::compute(&recs, &all).unwrap();
        let b = MetricsReport::compute(&recs, &all).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
        for c in &a.per_class {
            for s in [c.conditional_f1, c.coarse_f1, c.window_f1].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&s));
            }
        }
    }

    #[test]
    fn focal_loss_with_unit_params_is_nll(
        raw in prop::collection::vec(prop::collection::vec(0.01f64..1.0, NUM_COMPLEX), 1..20),
        ys in prop::collection::vec(0u8..=10, 20),
    ) {
        let probs: Vec<Vec<f64>> = raw
            .iter()
            .map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(|x| x / s).collect()
            })
            .collect();
        let labels: Vec<ComplexEvent> = ys[..probs.len()].iter().map(|y| ComplexEvent::of(*y)).collect();
        let params = FocalLossParams { gamma: 0.0, alpha: [1.0; NUM_COMPLEX] };
        let got = focal_loss(&probs, &labels, &params).unwrap();
        let nll: f64 = probs.iter().zip(&labels).map(|(p, y)| -p[y.id() as usize].ln()).sum();
        prop_assert!((got - nll).abs() <= 1e-9 * nll.max(1.0));
    }
}

#[test]
fn all_default_predictions_score_zero() {
    let refs = [vec![
        ComplexEvent::of(0),
        ComplexEvent::of(6),
        ComplexEvent::of(2),
    ]];
    let recs: Vec<PredictionRecord> = refs
        .iter()
        .map(|r| PredictionRecord {
            id: "a".into(),
            predicted: vec![ComplexEvent::DEFAULT; r.len()],
            reference: Reference::Single(r.clone()),
        })
        .collect();
    assert_eq!(positive_f1(&recs).unwrap().score, Some(0.0));
    assert_eq!(window_f1(&recs, ComplexEvent::of(6)), Ok(Some(0.0)));
}

#[test]
fn mismatched_batch_has_undefined_conditional_f1() {
    let mut set = CeSet::EMPTY;
    set.insert(ComplexEvent::of(1));
    let recs = vec![PredictionRecord {
        id: "a".into(),
        predicted: vec![ComplexEvent::of(1); 59],
        reference: Reference::Multi(vec![set; 60]),
    }];
    assert_eq!(length_accuracy(&recs), Ok(0.0));
    for ce in ComplexEvent::positive() {
        assert_eq!(conditional_f1(&recs, ce), None);
    }
    assert_eq!(coarse_f1(&recs, ComplexEvent::of(1)), Some(1.0));
}

#[test]
fn focal_loss_decreases_in_true_probability() {
    let params = FocalLossParams::default();
    let mut prev = f64::INFINITY;
    for k in 1..=100 {
        let p = k as f64 / 100.0;
        let mut v = vec![0.0; NUM_COMPLEX];
        v[3] = p;
        v[0] = 1.0 - p;
        let l = focal_loss(&[v], &[ComplexEvent::of(3)], &params).unwrap();
        assert!(l <= prev, "loss rose at p={p}");
        if k < 100 {
            assert!(l < prev);
        }
        prev = l;
    }
    assert_eq!(prev, 0.0);
}

#[test]
fn focal_loss_input_checks() {
    let params = FocalLossParams::default();
    let half = vec![0.5; NUM_COMPLEX];
    assert!(matches!(
        focal_loss(&[half], &[ComplexEvent::of(1)], &params),
        Err(MetricsError::NotNormalized { .. })
    ));
    assert!(matches!(
        focal_loss(&[], &[ComplexEvent::of(1)], &params),
        Err(MetricsError::LengthMismatch { .. })
    ));
}
