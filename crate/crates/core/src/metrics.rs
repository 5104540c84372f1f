//! Evaluation metrics over predicted single-label sequences, plus a
//! forward focal-loss reference for external trainers.
//!
//! Window-level scores pool true/false positives and false negatives over
//! every window of every qualifying record (micro aggregation). A score is
//! `None` (undefined) when the class never occurs in either predictions or
//! references, so an empty denominator is never reported as 0.

use serde::Serialize;
use thiserror::Error;

use crate::model::{CeSet, ComplexEvent, NUM_COMPLEX};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no records to evaluate")]
    EmptyInput,
    #[error("record {id}: predicted {predicted} labels for {expected} windows")]
    LengthMismatch {
        id: String,
        predicted: usize,
        expected: usize,
    },
    #[error("window {window}: {len} probabilities, expected {expected}")]
    Width {
        window: usize,
        len: usize,
        expected: usize,
    },
    #[error("window {window}: probabilities sum to {sum}")]
    NotNormalized { window: usize, sum: f64 },
    #[error("window {window}: probability of the true class is 0")]
    Domain { window: usize },
    #[error("invalid focal loss parameter: {0}")]
    Params(String),
}

/// Ground truth for one record, multi-label or already projected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reference {
    Multi(Vec<CeSet>),
    Single(Vec<ComplexEvent>),
}

impl Reference {
    pub fn len(&self) -> usize {
        match self {
            Reference::Multi(v) => v.len(),
            Reference::Single(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether window `t` carries `ce`.
    pub fn has(&self, t: usize, ce: ComplexEvent) -> bool {
        match self {
            Reference::Multi(v) => v[t].contains(ce),
            Reference::Single(v) => v[t] == ce,
        }
    }

    fn has_anywhere(&self, ce: ComplexEvent) -> bool {
        (0..self.len()).any(|t| self.has(t, ce))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRecord {
    pub id: String,
    pub predicted: Vec<ComplexEvent>,
    pub reference: Reference,
}

impl PredictionRecord {
    pub fn length_matches(&self) -> bool {
        self.predicted.len() == self.reference.len()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => {}
        }
    }

    /// `2TP / (2TP + FP + FN)`, undefined when the denominator is 0.
    pub fn f1(&self) -> Option<f64> {
        let denom = 2 * self.tp + self.fp + self.fn_;
        (denom > 0).then(|| 2.0 * self.tp as f64 / denom as f64)
    }
}

/// Fraction of records whose prediction has exactly one label per window.
pub fn length_accuracy(records: &[PredictionRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let ok = records.iter().filter(|r| r.length_matches()).count();
    Ok(ok as f64 / records.len() as f64)
}

fn window_counts<'a>(
    records: impl Iterator<Item = &'a PredictionRecord>,
    ce: ComplexEvent,
) -> Counts {
    let mut c = Counts::default();
    for r in records {
        for (t, p) in r.predicted.iter().enumerate() {
            c.add(*p == ce, r.reference.has(t, ce));
        }
    }
    c
}

/// Window counts over the length-matching records only; `None` when no
/// record matches.
pub fn conditional_counts(records: &[PredictionRecord], ce: ComplexEvent) -> Option<Counts> {
    let mut matched = records.iter().filter(|r| r.length_matches()).peekable();
    matched.peek()?;
    Some(window_counts(matched, ce))
}

pub fn conditional_f1(records: &[PredictionRecord], ce: ComplexEvent) -> Option<f64> {
    conditional_counts(records, ce)?.f1()
}

/// Record-level presence counts; length mismatches still count.
pub fn coarse_counts(records: &[PredictionRecord], ce: ComplexEvent) -> Counts {
    let mut c = Counts::default();
    for r in records {
        c.add(r.predicted.contains(&ce), r.reference.has_anywhere(ce));
    }
    c
}

pub fn coarse_f1(records: &[PredictionRecord], ce: ComplexEvent) -> Option<f64> {
    coarse_counts(records, ce).f1()
}

fn require_matched(records: &[PredictionRecord]) -> Result<(), MetricsError> {
    match records.iter().find(|r| !r.length_matches()) {
        Some(r) => Err(MetricsError::LengthMismatch {
            id: r.id.clone(),
            predicted: r.predicted.len(),
            expected: r.reference.len(),
        }),
        None => Ok(()),
    }
}

/// Window counts over all records, which must all be length-matched.
pub fn window_counts_all(
    records: &[PredictionRecord],
    ce: ComplexEvent,
) -> Result<Counts, MetricsError> {
    require_matched(records)?;
    Ok(window_counts(records.iter(), ce))
}

pub fn window_f1(
    records: &[PredictionRecord],
    ce: ComplexEvent,
) -> Result<Option<f64>, MetricsError> {
    Ok(window_counts_all(records, ce)?.f1())
}

/// Mean window F1 over positive classes together with the classes left
/// out of the mean because their score is undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositiveF1 {
    pub score: Option<f64>,
    pub excluded: Vec<ComplexEvent>,
}

pub fn positive_f1(records: &[PredictionRecord]) -> Result<PositiveF1, MetricsError> {
    let classes: Vec<ComplexEvent> = ComplexEvent::positive().collect();
    positive_f1_over(records, &classes)
}

pub fn positive_f1_over(
    records: &[PredictionRecord],
    classes: &[ComplexEvent],
) -> Result<PositiveF1, MetricsError> {
    let mut scores = Vec::new();
    let mut excluded = Vec::new();
    for &ce in classes {
        match window_f1(records, ce)? {
            Some(s) => scores.push(s),
            None => excluded.push(ce),
        }
    }
    let score = (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64);
    Ok(PositiveF1 { score, excluded })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub class: ComplexEvent,
    pub conditional_f1: Option<f64>,
    pub coarse_f1: Option<f64>,
    /// Present only when every record is length-matched.
    pub window_f1: Option<f64>,
    pub conditional: Option<Counts>,
    pub coarse: Counts,
    pub window: Option<Counts>,
}

/// Every metric for one batch of predictions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub aggregation: &'static str,
    pub records: usize,
    pub length_matched: usize,
    pub length_accuracy: f64,
    pub window_metrics: bool,
    pub positive_f1: Option<f64>,
    pub positive_f1_excluded: Vec<ComplexEvent>,
    pub per_class: Vec<ClassReport>,
}

impl MetricsReport {
    /// Scores `records` on `classes`. Window F1 and positive F1 are only
    /// computed when every prediction has the reference length.
    pub fn compute(
        records: &[PredictionRecord],
        classes: &[ComplexEvent],
    ) -> Result<Self, MetricsError> {
        let length_accuracy = length_accuracy(records)?;
        let length_matched = records.iter().filter(|r| r.length_matches()).count();
        let window_metrics = length_matched == records.len();
        let per_class = classes
            .iter()
            .map(|&ce| {
                let conditional = conditional_counts(records, ce);
                let coarse = coarse_counts(records, ce);
                let window = window_metrics.then(|| window_counts(records.iter(), ce));
                ClassReport {
                    class: ce,
                    conditional_f1: conditional.and_then(|c| c.f1()),
                    coarse_f1: coarse.f1(),
                    window_f1: window.and_then(|c| c.f1()),
                    conditional,
                    coarse,
                    window,
                }
            })
            .collect::<Vec<_>>();
        let (positive_f1, positive_f1_excluded) = if window_metrics {
            let p = positive_f1_over(records, classes)?;
            (p.score, p.excluded)
        } else {
            (None, Vec::new())
        };
        Ok(MetricsReport {
            aggregation: "micro",
            records: records.len(),
            length_matched,
            length_accuracy,
            window_metrics,
            positive_f1,
            positive_f1_excluded,
            per_class,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One `key=value` line per figure; undefined scores print as
    /// `undefined`.
    pub fn to_text(&self) -> String {
        fn num(v: Option<f64>) -> String {
            v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"))
        }
        let mut lines = vec![
            format!("aggregation={}", self.aggregation),
            format!("records={}", self.records),
            format!("length_matched={}", self.length_matched),
            format!("length_accuracy={:.6}", self.length_accuracy),
        ];
        for c in &self.per_class {
            lines.push(format!(
                "{}.conditional_f1={}",
                c.class,
                num(c.conditional_f1)
            ));
            lines.push(format!("{}.coarse_f1={}", c.class, num(c.coarse_f1)));
            if self.window_metrics {
                lines.push(format!("{}.window_f1={}", c.class, num(c.window_f1)));
            }
        }
        if self.window_metrics {
            lines.push(format!("positive_f1={}", num(self.positive_f1)));
            let ex: Vec<String> = self
                .positive_f1_excluded
                .iter()
                .map(|c| c.to_string())
                .collect();
            lines.push(format!("positive_f1_excluded={}", ex.join(",")));
        }
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FocalLossParams {
    pub gamma: f64,
    /// Weight per class id 0..=10.
    pub alpha: [f64; NUM_COMPLEX],
}

impl Default for FocalLossParams {
    fn default() -> Self {
        let mut alpha = [0.25; NUM_COMPLEX];
        alpha[0] = 0.005;
        FocalLossParams { gamma: 2.0, alpha }
    }
}

/// Sum over windows of `-alpha_y (1 - p_y)^gamma ln p_y`, where `y` is the
/// true class and `p_y` its predicted probability.
pub fn focal_loss(
    probs: &[Vec<f64>],
    labels: &[ComplexEvent],
    params: &FocalLossParams,
) -> Result<f64, MetricsError> {
    if params.gamma.is_nan() || params.gamma < 0.0 {
        return Err(MetricsError::Params(format!(
            "gamma {} is negative",
            params.gamma
        )));
    }
    if let Some(a) = params.alpha.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
        return Err(MetricsError::Params(format!("alpha {a} outside (0, 1]")));
    }
    if probs.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            id: String::new(),
            predicted: probs.len(),
            expected: labels.len(),
        });
    }
    let mut total = 0.0;
    for (window, (p, y)) in probs.iter().zip(labels).enumerate() {
        if p.len() != NUM_COMPLEX {
            return Err(MetricsError::Width {
                window,
                len: p.len(),
                expected: NUM_COMPLEX,
            });
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || p.iter().any(|x| *x < 0.0) {
            return Err(MetricsError::NotNormalized { window, sum });
        }
        let py = p[y.id() as usize];
        if py == 0.0 {
            return Err(MetricsError::Domain { window });
        }
        total -= params.alpha[y.id() as usize] * (1.0 - py).powf(params.gamma) * py.ln();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, pred: &[u8], reference: &[u8]) -> PredictionRecord {
        PredictionRecord {
            id: id.into(),
            predicted: pred.iter().map(|i| ComplexEvent::of(*i)).collect(),
            reference: Reference::Single(reference.iter().map(|i| ComplexEvent::of(*i)).collect()),
        }
    }

    #[test]
    fn length_accuracy_counts_exact_lengths() {
        let a = rec("a", &[0; 60], &[0; 60]);
        let b = rec("b", &[0; 59], &[0; 60]);
        assert_eq!(length_accuracy(&[a.clone(), b]), Ok(0.5));
        assert_eq!(length_accuracy(&[a]), Ok(1.0));
        assert_eq!(length_accuracy(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn conditional_is_undefined_without_matches() {
        let r = [rec("a", &[6, 0], &[6, 0, 0])];
        assert_eq!(conditional_f1(&r, ComplexEvent::of(6)), None);
        let r = [rec("a", &[0, 0, 0], &[0, 6, 0])];
        assert_eq!(conditional_f1(&r, ComplexEvent::of(6)), Some(0.0));
        assert_eq!(conditional_f1(&r, ComplexEvent::of(2)), None);
    }

    #[test]
    fn coarse_uses_presence() {
        let r = [rec("a", &[2, 0, 0], &[0, 0, 2])];
        assert_eq!(coarse_f1(&r, ComplexEvent::of(2)), Some(1.0));
        let r = [rec("a", &[6, 0], &[0, 0])];
        assert_eq!(coarse_f1(&r, ComplexEvent::of(6)), Some(0.0));
        assert_eq!(coarse_f1(&r, ComplexEvent::of(1)), None);
    }

    #[test]
    fn positive_f1_excludes_undefined() {
        let r = [rec("a", &[3, 3, 0], &[3, 0, 0])];
        let p = positive_f1(&r).unwrap();
        assert!((p.score.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.excluded.len(), 9);
        assert!(window_f1(&[rec("a", &[0], &[0, 0])], ComplexEvent::of(1)).is_err());
    }

    #[test]
    fn multi_label_reference() {
        let mut s = CeSet::EMPTY;
        s.insert(ComplexEvent::of(1));
        s.insert(ComplexEvent::of(6));
        let r = PredictionRecord {
            id: "m".into(),
            predicted: vec![ComplexEvent::of(6)],
            reference: Reference::Multi(vec![s]),
        };
        assert_eq!(
            window_f1(std::slice::from_ref(&r), ComplexEvent::of(6)),
            Ok(Some(1.0))
        );
        assert_eq!(window_f1(&[r], ComplexEvent::of(1)), Ok(Some(0.0)));
    }

    #[test]
    fn report_text_marks_undefined() {
        let r = [rec("a", &[1, 0], &[1, 0, 0])];
        let rep = MetricsReport::compute(&r, &[ComplexEvent::of(1)]).unwrap();
        let text = rep.to_text();
        assert!(text.contains("e1.conditional_f1=undefined"));
        assert!(text.contains("e1.coarse_f1=1.000000"));
        assert!(!text.contains("window_f1"));
        assert!(rep.to_json().contains("\"conditional_f1\": null"));
    }

    #[test]
    fn focal_loss_single_window() {
        let mut p = vec![0.0; NUM_COMPLEX];
        p[1] = 0.9;
        p[0] = 0.1;
        let params = FocalLossParams::default();
        let got = focal_loss(&[p.clone()], &[ComplexEvent::of(1)], &params).unwrap();
        let want = 0.25 * 0.01 * -(0.9f64.ln());
        assert!((got - want).abs() < 1e-12);
        assert!((got - 2.634e-4).abs() < 1e-7);
        assert_eq!(
            focal_loss(&[p], &[ComplexEvent::of(2)], &params),
            Err(MetricsError::Domain { window: 0 })
        );
    }
}
