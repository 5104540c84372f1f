//! Prompt construction for the per-window labeling task.

use ced_core::dataset::DatasetRecord;
use ced_core::labeler::Priority;
use ced_core::rules::RuleSet;
use ced_core::simulator::{generate_dataset, GenerationConfig, TransitionModel};
use ced_core::{AtomicEvent, CeSet, ComplexEvent};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::LlmError;

/// Seed of the simulator run that supplies few-shot examples.
pub const FEW_SHOT_SEED: u64 = 0x5eed_f00d;

/// Classes described to the model unless all ten are requested.
pub const DEFAULT_CLASSES: [ComplexEvent; 3] = [
    ComplexEvent::of(1),
    ComplexEvent::of(2),
    ComplexEvent::of(3),
];

/// Plain-language description of each rule, indexed by class id.
fn describe(ce: ComplexEvent) -> &'static str {
    match ce.id() {
        1 => {
            "After a flush_toilet window, the person starts type or click work before having \
              washed for 4 windows in a row. Label the first type/click window. A 4-window wash \
              run clears the condition; a new flush_toilet restarts it."
        }
        2 => {
            "A meal starts (eat or drink, not already in a meal) without a run of 4 consecutive \
              wash windows inside the 24 windows before it. Label the first window of the meal. \
              A meal continues through eat, drink and sit windows."
        }
        3 => {
            "A tooth-brushing session is abandoned: after brushing began, 3 non-brush windows in \
              a row occur before 24 brush windows were accumulated. Label the third non-brush \
              window. Up to 2 idle windows are allowed without ending the session."
        }
        4 => {
            "brush is followed later by both eat and drink, in either order, with only other \
              activities in between. Label the window that completes the pattern."
        }
        5 => {
            "sit, then type or click, then walk, with unrelated activities in between. Label \
              the walk window."
        }
        6 => {
            "6 consecutive wash windows. Label the 6th; a longer run is labeled again every 6 \
              windows."
        }
        7 => {
            "24 brush windows in total, where brushing may pause and resume. Label the 24th \
              brush window."
        }
        8 => {
            "A type or click window at least 36 windows after the most recent eat window. Only \
              the first work window after an eat counts."
        }
        9 => {
            "Three typing sessions begin within 12 windows (a session begins at a type window \
              not preceded by type). Label the start of the third session."
        }
        10 => {
            "Exactly 5 click windows after a sit window and before any walk window. Label the \
               5th click."
        }
        _ => "",
    }
}

/// One demonstration pair rendered before the query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub trace: Vec<AtomicEvent>,
    pub labels: Vec<ComplexEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    classes: Vec<ComplexEvent>,
    few_shot: Vec<Example>,
    query: Vec<AtomicEvent>,
}

impl PromptBundle {
    /// `k` is the requested number of examples and must equal
    /// `few_shot.len()`.
    pub fn new(
        classes: Vec<ComplexEvent>,
        k: usize,
        few_shot: Vec<Example>,
        query: Vec<AtomicEvent>,
    ) -> Result<Self, LlmError> {
        if few_shot.len() != k {
            return Err(LlmError::Config(format!(
                "{k} few-shot examples requested but {} supplied",
                few_shot.len()
            )));
        }
        if classes.is_empty() || classes.iter().any(|c| c.is_default()) {
            return Err(LlmError::Config(
                "class list must name positive classes".into(),
            ));
        }
        if query.is_empty() {
            return Err(LlmError::Config("query trace is empty".into()));
        }
        Ok(PromptBundle {
            classes,
            few_shot,
            query,
        })
    }

    pub fn k(&self) -> usize {
        self.few_shot.len()
    }

    pub fn classes(&self) -> &[ComplexEvent] {
        &self.classes
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

impl Prompt {
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.system.as_bytes());
        h.update([0]);
        h.update(self.user.as_bytes());
        hex::encode(h.finalize())
    }
}

fn render_trace(trace: &[AtomicEvent]) -> String {
    trace
        .iter()
        .map(|a| a.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

fn render_labels(labels: &[ComplexEvent]) -> String {
    labels
        .iter()
        .map(|c| c.id().to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn render_case(trace: &[AtomicEvent]) -> String {
    format!(
        "Input ({} windows): {}\nOutput:",
        trace.len(),
        render_trace(trace)
    )
}

pub fn build_prompt(bundle: &PromptBundle) -> Prompt {
    let events: Vec<&str> = AtomicEvent::ALL.iter().map(|a| a.as_str()).collect();
    let mut system = String::new();
    system.push_str(
        "You label a stream of human activities. Each input item is the activity observed \
         in one 5-second window, one of: ",
    );
    system.push_str(&events.join(", "));
    system.push_str(
        ".\nFor every window output one integer: the number of the complex event that is \
         completed in that window, or 0 if none is. An event that spans several windows is \
         labeled only at the window where it completes. If several complete at once, output \
         the smallest number.\n\nComplex events:\n",
    );
    for ce in &bundle.classes {
        system.push_str(&format!("{}: {}\n", ce.id(), describe(*ce)));
    }
    system.push_str(
        "\nAnswer with the integers only, separated by commas, exactly one per input window \
         and nothing else.",
    );

    let mut user = String::new();
    for (i, ex) in bundle.few_shot.iter().enumerate() {
        user.push_str(&format!(
            "Example {}\n{} {}\n\n",
            i + 1,
            render_case(&ex.trace),
            render_labels(&ex.labels)
        ));
    }
    user.push_str(&format!(
        "Label all {} windows.\n{}",
        bundle.query.len(),
        render_case(&bundle.query)
    ));
    Prompt { system, user }
}

/// Reference labels restricted to `classes`, one per window.
pub fn restricted_labels(record: &DatasetRecord, classes: &[ComplexEvent]) -> Vec<ComplexEvent> {
    let keep: CeSet = classes.iter().copied().collect();
    let p = Priority::default();
    record
        .ce_labels
        .iter()
        .map(|s| p.project(s.intersect(keep)))
        .collect()
}

/// `k` deterministic demonstrations of length `len`, each containing at
/// least one of `classes`.
pub fn few_shot_examples(
    rules: &RuleSet,
    model: &TransitionModel,
    classes: &[ComplexEvent],
    k: usize,
    len: usize,
) -> Vec<Example> {
    if k == 0 {
        return Vec::new();
    }
    let weights = ComplexEvent::positive()
        .map(|c| if classes.contains(&c) { 1.0 } else { 0.0 })
        .collect();
    let cfg = GenerationConfig {
        num_traces: 64 * k,
        trace_len: len.max(1),
        seed: FEW_SHOT_SEED,
        dwell_stretch: model.dwell_stretch,
        background_fraction: 0.0,
        scenario_weights: Some(weights),
        id_prefix: "shot".into(),
    };
    let records =
        generate_dataset(rules, model, &cfg, &Priority::default()).expect("valid few-shot config");
    records
        .iter()
        .map(|r| Example {
            trace: r.ae_seq.clone(),
            labels: restricted_labels(r, classes),
        })
        .filter(|e| e.labels.iter().any(|l| !l.is_default()))
        .take(k)
        .collect()
}
