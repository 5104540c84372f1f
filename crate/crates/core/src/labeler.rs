//! Runs every rule over a trace or a live stream of windows.

use thiserror::Error;

use crate::fsm::FsmState;
use crate::model::{AtomicEvent, CeSet, ComplexEvent, LabelSeq, NUM_COMPLEX};
use crate::rules::RuleSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PriorityError {
    #[error("priority lists {0} more than once")]
    Duplicate(ComplexEvent),
    #[error("priority does not list {0}")]
    Missing(ComplexEvent),
    #[error("priority may not list the default class")]
    Default,
}

/// Order in which co-occurring classes win the single-label projection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Priority {
    order: Vec<ComplexEvent>,
    rank: [u8; NUM_COMPLEX],
}

impl Priority {
    /// Highest priority first; must list e1..e10 exactly once each.
    pub fn new(order: Vec<ComplexEvent>) -> Result<Self, PriorityError> {
        let mut rank = [u8::MAX; NUM_COMPLEX];
        for (i, ce) in order.iter().enumerate() {
            if ce.is_default() {
                return Err(PriorityError::Default);
            }
            if rank[ce.id() as usize] != u8::MAX {
                return Err(PriorityError::Duplicate(*ce));
            }
            rank[ce.id() as usize] = i as u8;
        }
        if let Some(ce) = ComplexEvent::positive().find(|c| rank[c.id() as usize] == u8::MAX) {
            return Err(PriorityError::Missing(ce));
        }
        Ok(Priority { order, rank })
    }

    pub fn order(&self) -> &[ComplexEvent] {
        &self.order
    }

    /// The highest-priority member of `set`, or e0 for the empty set.
    pub fn project(&self, set: CeSet) -> ComplexEvent {
        set.iter()
            .min_by_key(|c| self.rank[c.id() as usize])
            .unwrap_or(ComplexEvent::DEFAULT)
    }
}

impl Default for Priority {
    /// Ascending class id: e1 wins over every other class.
    fn default() -> Self {
        Priority::new(ComplexEvent::positive().collect()).expect("ascending order is complete")
    }
}

/// Labels of every window of `trace`: the set of rules emitting there.
pub fn label_trace(rules: &RuleSet, trace: &[AtomicEvent]) -> LabelSeq {
    let mut labels = vec![CeSet::EMPTY; trace.len()];
    for (ce, rule) in rules.iter() {
        for (slot, hit) in labels.iter_mut().zip(rule.machine.run(trace)) {
            if hit {
                slot.insert(ce);
            }
        }
    }
    labels
}

/// Online detector holding one machine state per rule.
#[derive(Debug, Clone)]
pub struct LabelSession<'r> {
    rules: &'r RuleSet,
    states: Vec<(ComplexEvent, FsmState)>,
    window: u32,
}

impl<'r> LabelSession<'r> {
    pub fn new(rules: &'r RuleSet) -> Self {
        let states = rules
            .iter()
            .map(|(ce, r)| (ce, r.machine.initial_state()))
            .collect();
        LabelSession {
            rules,
            states,
            window: 0,
        }
    }

    /// Number of windows consumed so far.
    pub fn window(&self) -> u32 {
        self.window
    }

    /// Advances every machine by one window and returns its emissions.
    pub fn step(&mut self, ae: AtomicEvent) -> CeSet {
        let mut out = CeSet::EMPTY;
        for (ce, st) in &mut self.states {
            let machine = &self
                .rules
                .get(*ce)
                .expect("session built from this rule set")
                .machine;
            if machine.advance(st, ae).emitted {
                out.insert(*ce);
            }
        }
        self.window += 1;
        out
    }
}

/// One streaming step; equivalent to [`LabelSession::step`].
pub fn stream_step(session: &mut LabelSession<'_>, ae: AtomicEvent) -> CeSet {
    session.step(ae)
}

/// Projects multi-label windows to one class each.
pub fn to_single_label(seq: &[CeSet], priority: &Priority) -> Vec<ComplexEvent> {
    seq.iter().map(|s| priority.project(*s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AtomicEvent::*;
    use crate::rules::builtin_rules;

    fn set(ids: &[u8]) -> CeSet {
        ids.iter().map(|i| ComplexEvent::of(*i)).collect()
    }

    #[test]
    fn trace_labels() {
        let rules = builtin_rules();
        let l = label_trace(&rules, &[Wash; 6]);
        assert_eq!(l, [vec![CeSet::EMPTY; 5], vec![set(&[6])]].concat());
        assert!(label_trace(&rules, &[Walk; 10])
            .iter()
            .all(|s| s.is_empty()));
        assert_eq!(
            label_trace(&rules, &[FlushToilet, Type]),
            vec![CeSet::EMPTY, set(&[1])]
        );
    }

    #[test]
    fn streaming() {
        let rules = builtin_rules();
        let mut s = LabelSession::new(&rules);
        assert!(stream_step(&mut s, Wash).is_empty());
        for _ in 0..4 {
            s.step(Wash);
        }
        assert_eq!(s.step(Wash), set(&[6]));
        assert_eq!(s.window(), 6);
        assert_eq!(LabelSession::new(&rules).step(Eat), set(&[2]));
    }

    #[test]
    fn projection() {
        let p = Priority::default();
        assert_eq!(
            to_single_label(&[CeSet::EMPTY, set(&[6])], &p),
            vec![ComplexEvent::DEFAULT, ComplexEvent::of(6)]
        );
        assert_eq!(
            to_single_label(&[set(&[1, 6])], &p),
            vec![ComplexEvent::of(1)]
        );
        let rev = Priority::new(ComplexEvent::positive().rev().collect()).unwrap();
        assert_eq!(rev.project(set(&[1, 6])), ComplexEvent::of(6));
        assert_eq!(
            Priority::new(vec![ComplexEvent::of(1)]),
            Err(PriorityError::Missing(ComplexEvent::of(2)))
        );
    }
}
