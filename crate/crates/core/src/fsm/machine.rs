//! Timed/counting finite-state machines and their per-window execution.
//!
//! A machine reads exactly one atomic event per window. For the current
//! state, transitions are tried in listed order and the first whose guard
//! holds fires; if none holds the machine stays put with no side effects.
//! Within one window the order is:
//!
//! 1. guards are evaluated against the clock/counter values left by the
//!    previous window;
//! 2. the fired transition's actions are applied in order;
//! 3. every running clock advances by one.
//!
//! So a clock reset at window `w` reads `t - w` when guards are evaluated
//! at window `t`, and a clock resumed on each matching window and paused
//! otherwise reads the number of matching windows seen before `t`.
//!
//! Clock and counter values saturate one past the largest constant any
//! guard compares them against, which keeps memory bounded without
//! changing the outcome of any guard.

use std::fmt;

use thiserror::Error;

use crate::model::{AtomicEvent, ComplexEvent, NUM_ATOMIC};

/// Set of atomic events. Equality ignores member order; the order is kept
/// only so sets print the way they were written.
#[derive(Clone, Copy)]
pub struct EventSet {
    mask: u16,
    order: [u8; NUM_ATOMIC],
    len: u8,
}

const ALL_MASK: u16 = (1 << NUM_ATOMIC) - 1;

impl EventSet {
    pub fn empty() -> Self {
        EventSet {
            mask: 0,
            order: [0; NUM_ATOMIC],
            len: 0,
        }
    }

    pub fn all() -> Self {
        Self::from_mask(ALL_MASK)
    }

    /// Members in canonical alphabet order.
    pub fn from_mask(mask: u16) -> Self {
        let mut s = EventSet::empty();
        for ae in AtomicEvent::ALL {
            if mask & (1 << ae.index()) != 0 {
                s.push(ae);
            }
        }
        s
    }

    pub fn of(events: &[AtomicEvent]) -> Self {
        let mut s = EventSet::empty();
        for &ae in events {
            s.push(ae);
        }
        s
    }

    pub fn single(ae: AtomicEvent) -> Self {
        Self::of(&[ae])
    }

    fn push(&mut self, ae: AtomicEvent) {
        let bit = 1 << ae.index();
        if self.mask & bit == 0 {
            self.mask |= bit;
            self.order[self.len as usize] = ae.index() as u8;
            self.len += 1;
        }
    }

    pub fn mask(&self) -> u16 {
        self.mask
    }

    pub fn contains(&self, ae: AtomicEvent) -> bool {
        self.mask & (1 << ae.index()) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn is_all(&self) -> bool {
        self.mask == ALL_MASK
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = AtomicEvent> + '_ {
        self.order[..self.len as usize]
            .iter()
            .map(|&i| AtomicEvent::from_index(i as usize).expect("valid index"))
    }

    pub fn complement(&self) -> Self {
        Self::from_mask(!self.mask & ALL_MASK)
    }

    /// Keeps `self`'s member order.
    pub fn intersect(&self, other: &EventSet) -> Self {
        let mut s = EventSet::empty();
        for ae in self.iter().filter(|a| other.contains(*a)) {
            s.push(ae);
        }
        s
    }

    pub fn union(&self, other: &EventSet) -> Self {
        let mut s = *self;
        for ae in other.iter() {
            s.push(ae);
        }
        s
    }

    pub fn difference(&self, other: &EventSet) -> Self {
        let mut s = EventSet::empty();
        for ae in self.iter().filter(|a| !other.contains(*a)) {
            s.push(ae);
        }
        s
    }

    /// Short identifier derived from the members, used to name clocks.
    pub(crate) fn slug(&self) -> String {
        if self.len() <= 3 && !self.is_empty() {
            self.iter()
                .map(|a| a.as_str())
                .collect::<Vec<_>>()
                .join("_")
        } else {
            "ev".to_string()
        }
    }
}

impl PartialEq for EventSet {
    fn eq(&self, other: &Self) -> bool {
        self.mask == other.mask
    }
}

impl Eq for EventSet {}

impl std::hash::Hash for EventSet {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.mask.hash(state)
    }
}

impl fmt::Debug for EventSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EventSet({self})")
    }
}

impl fmt::Display for EventSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_all() {
            return f.write_str("*");
        }
        if self.len() > NUM_ATOMIC / 2 {
            let rest = self.complement();
            let names: Vec<&str> = rest.iter().map(|a| a.as_str()).collect();
            return write!(f, "!({})", names.join("|"));
        }
        let names: Vec<&str> = self.iter().map(|a| a.as_str()).collect();
        f.write_str(&names.join("|"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Comparator {
    pub fn holds(self, lhs: u32, rhs: u32) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Eq => lhs == rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Eq => "=",
            Comparator::Ge => ">=",
            Comparator::Gt => ">",
        }
    }
}

/// `var cmp value`, where `var` indexes the machine's clocks or counters
/// depending on which list of the guard holds the predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Predicate {
    pub var: usize,
    pub cmp: Comparator,
    pub value: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Guard {
    pub events: EventSet,
    pub clocks: Vec<Predicate>,
    pub counters: Vec<Predicate>,
}

impl Guard {
    pub fn on(events: EventSet) -> Self {
        Guard {
            events,
            clocks: Vec::new(),
            counters: Vec::new(),
        }
    }

    pub fn any() -> Self {
        Self::on(EventSet::all())
    }

    pub fn clock(mut self, var: usize, cmp: Comparator, value: u32) -> Self {
        self.clocks.push(Predicate { var, cmp, value });
        self
    }

    pub fn counter(mut self, var: usize, cmp: Comparator, value: u32) -> Self {
        self.counters.push(Predicate { var, cmp, value });
        self
    }

    /// Whether the guard admits `ae` given the variable values in `st`.
    pub fn holds(&self, ae: AtomicEvent, st: &FsmState) -> bool {
        self.events.contains(ae)
            && self
                .clocks
                .iter()
                .all(|p| p.cmp.holds(st.clocks[p.var], p.value))
            && self
                .counters
                .iter()
                .all(|p| p.cmp.holds(st.counters[p.var], p.value))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    /// Sets the clock to zero; its running flag is unchanged.
    ResetClock(usize),
    /// Resumes (`true`) or pauses (`false`) per-window ticking.
    SetClockRunning {
        clock: usize,
        running: bool,
    },
    SetCounter {
        counter: usize,
        value: u32,
    },
    IncrementCounter {
        counter: usize,
        by: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub guard: Guard,
    pub actions: Vec<Action>,
    pub target: usize,
    pub emit: bool,
}

impl Transition {
    pub fn new(guard: Guard, target: usize) -> Self {
        Transition {
            guard,
            actions: Vec::new(),
            target,
            emit: false,
        }
    }

    pub fn with(mut self, action: Action) -> Self {
        self.actions.push(action);
        self
    }

    pub fn emitting(mut self) -> Self {
        self.emit = true;
        self
    }
}

/// Editable machine body. Validated and frozen by [`FsmDefinition::new`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Automaton {
    pub states: Vec<String>,
    pub initial: usize,
    pub clocks: Vec<String>,
    pub counters: Vec<String>,
    /// One ordered transition list per state.
    pub transitions: Vec<Vec<Transition>>,
}

impl Automaton {
    pub fn add_state(&mut self, name: impl Into<String>) -> usize {
        self.states.push(name.into());
        self.transitions.push(Vec::new());
        self.states.len() - 1
    }

    pub fn add_clock(&mut self, name: impl Into<String>) -> usize {
        let name = unique_name(&self.clocks, &self.counters, name.into());
        self.clocks.push(name);
        self.clocks.len() - 1
    }

    pub fn add_counter(&mut self, name: impl Into<String>) -> usize {
        let name = unique_name(&self.clocks, &self.counters, name.into());
        self.counters.push(name);
        self.counters.len() - 1
    }

    pub fn push(&mut self, from: usize, t: Transition) {
        self.transitions[from].push(t);
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }
}

fn unique_name(clocks: &[String], counters: &[String], base: String) -> String {
    let taken = |n: &str| clocks.iter().chain(counters).any(|c| c == n);
    if !taken(&base) {
        return base;
    }
    (2..)
        .map(|i| format!("{base}{i}"))
        .find(|n| !taken(n))
        .expect("unbounded suffix search")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FsmError {
    #[error("machine has no states")]
    NoStates,
    #[error("initial state index {0} out of range")]
    BadInitial(usize),
    #[error("duplicate state name `{0}`")]
    DuplicateState(String),
    #[error("transition table has {tables} lists for {states} states")]
    TableShape { states: usize, tables: usize },
    #[error("state `{state}` transition {index}: target {target} out of range")]
    BadTarget {
        state: String,
        index: usize,
        target: usize,
    },
    #[error("state `{state}` transition {index}: guard event set is empty")]
    EmptyGuard { state: String, index: usize },
    #[error("state `{state}` transition {index}: unknown clock #{var}")]
    UnknownClock {
        state: String,
        index: usize,
        var: usize,
    },
    #[error("state `{state}` transition {index}: unknown counter #{var}")]
    UnknownCounter {
        state: String,
        index: usize,
        var: usize,
    },
    #[error("the default class e0 cannot be emitted by a machine")]
    DefaultClass,
}

/// A validated, immutable machine emitting one complex-event class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FsmDefinition {
    machine_id: String,
    ce: ComplexEvent,
    body: Automaton,
    clock_caps: Vec<u32>,
    counter_caps: Vec<u32>,
}

impl FsmDefinition {
    pub fn new(
        machine_id: impl Into<String>,
        ce: ComplexEvent,
        body: Automaton,
    ) -> Result<Self, FsmError> {
        if ce.is_default() {
            return Err(FsmError::DefaultClass);
        }
        validate(&body)?;
        let mut clock_caps = vec![0u32; body.clocks.len()];
        let mut counter_caps = vec![0u32; body.counters.len()];
        for t in body.transitions.iter().flatten() {
            for p in &t.guard.clocks {
                clock_caps[p.var] = clock_caps[p.var].max(p.value);
            }
            for p in &t.guard.counters {
                counter_caps[p.var] = counter_caps[p.var].max(p.value);
            }
        }
        for c in clock_caps.iter_mut().chain(counter_caps.iter_mut()) {
            *c = c.saturating_add(1);
        }
        Ok(FsmDefinition {
            machine_id: machine_id.into(),
            ce,
            body,
            clock_caps,
            counter_caps,
        })
    }

    pub fn machine_id(&self) -> &str {
        &self.machine_id
    }

    pub fn ce(&self) -> ComplexEvent {
        self.ce
    }

    pub fn body(&self) -> &Automaton {
        &self.body
    }

    pub fn states(&self) -> &[String] {
        &self.body.states
    }

    pub fn initial(&self) -> usize {
        self.body.initial
    }

    pub fn clocks(&self) -> &[String] {
        &self.body.clocks
    }

    pub fn counters(&self) -> &[String] {
        &self.body.counters
    }

    pub fn transitions(&self, state: usize) -> &[Transition] {
        &self.body.transitions[state]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.body.state_index(name)
    }

    /// Saturation value of each clock (largest compared constant + 1).
    pub fn clock_caps(&self) -> &[u32] {
        &self.clock_caps
    }

    pub fn counter_caps(&self) -> &[u32] {
        &self.counter_caps
    }

    pub fn initial_state(&self) -> FsmState {
        FsmState {
            state: self.body.initial,
            clocks: vec![0; self.body.clocks.len()],
            running: vec![false; self.body.clocks.len()],
            counters: vec![0; self.body.counters.len()],
            window: 0,
        }
    }

    /// Advances `st` by one window in place.
    pub fn advance(&self, st: &mut FsmState, ae: AtomicEvent) -> StepOutcome {
        let fired = self.body.transitions[st.state]
            .iter()
            .position(|t| t.guard.holds(ae, st));
        let mut emitted = false;
        if let Some(i) = fired {
            let t = &self.body.transitions[st.state][i];
            for a in &t.actions {
                match *a {
                    Action::ResetClock(c) => st.clocks[c] = 0,
                    Action::SetClockRunning { clock, running } => st.running[clock] = running,
                    Action::SetCounter { counter, value } => {
                        st.counters[counter] = value.min(self.counter_caps[counter])
                    }
                    Action::IncrementCounter { counter, by } => {
                        st.counters[counter] = st.counters[counter]
                            .saturating_add(by)
                            .min(self.counter_caps[counter])
                    }
                }
            }
            st.state = t.target;
            emitted = t.emit;
        }
        for (c, running) in st.running.iter().enumerate() {
            if *running {
                st.clocks[c] = (st.clocks[c] + 1).min(self.clock_caps[c]);
            }
        }
        st.window += 1;
        StepOutcome {
            emitted,
            transition: fired,
        }
    }

    /// Pure single-window step.
    pub fn step(&self, st: &FsmState, ae: AtomicEvent) -> (FsmState, bool) {
        let mut next = st.clone();
        let out = self.advance(&mut next, ae);
        (next, out.emitted)
    }

    /// Per-window emission flags from the initial state.
    pub fn run(&self, trace: &[AtomicEvent]) -> Vec<bool> {
        let mut st = self.initial_state();
        trace
            .iter()
            .map(|&ae| self.advance(&mut st, ae).emitted)
            .collect()
    }
}

fn validate(body: &Automaton) -> Result<(), FsmError> {
    let n = body.states.len();
    if n == 0 {
        return Err(FsmError::NoStates);
    }
    if body.initial >= n {
        return Err(FsmError::BadInitial(body.initial));
    }
    if body.transitions.len() != n {
        return Err(FsmError::TableShape {
            states: n,
            tables: body.transitions.len(),
        });
    }
    for (i, s) in body.states.iter().enumerate() {
        if body.states[..i].contains(s) {
            return Err(FsmError::DuplicateState(s.clone()));
        }
    }
    for (si, ts) in body.transitions.iter().enumerate() {
        let state = || body.states[si].clone();
        for (index, t) in ts.iter().enumerate() {
            if t.target >= n {
                return Err(FsmError::BadTarget {
                    state: state(),
                    index,
                    target: t.target,
                });
            }
            if t.guard.events.is_empty() {
                return Err(FsmError::EmptyGuard {
                    state: state(),
                    index,
                });
            }
            let clock_vars =
                t.guard
                    .clocks
                    .iter()
                    .map(|p| p.var)
                    .chain(t.actions.iter().filter_map(|a| match a {
                        Action::ResetClock(c) | Action::SetClockRunning { clock: c, .. } => {
                            Some(*c)
                        }
                        _ => None,
                    }));
            for var in clock_vars {
                if var >= body.clocks.len() {
                    return Err(FsmError::UnknownClock {
                        state: state(),
                        index,
                        var,
                    });
                }
            }
            let counter_vars =
                t.guard
                    .counters
                    .iter()
                    .map(|p| p.var)
                    .chain(t.actions.iter().filter_map(|a| match a {
                        Action::SetCounter { counter, .. }
                        | Action::IncrementCounter { counter, .. } => Some(*counter),
                        _ => None,
                    }));
            for var in counter_vars {
                if var >= body.counters.len() {
                    return Err(FsmError::UnknownCounter {
                        state: state(),
                        index,
                        var,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Runtime state of one machine.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FsmState {
    pub state: usize,
    pub clocks: Vec<u32>,
    pub running: Vec<bool>,
    pub counters: Vec<u32>,
    /// Number of windows consumed so far.
    pub window: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub emitted: bool,
    /// Index of the fired transition, `None` for the implicit self-loop.
    pub transition: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use AtomicEvent::*;

    fn wash_machine() -> FsmDefinition {
        let mut a = Automaton::default();
        let idle = a.add_state("IDLE");
        let run = a.add_state("RUN");
        let clk = a.add_clock("washRun");
        a.push(
            idle,
            Transition::new(Guard::on(EventSet::single(Wash)), run)
                .with(Action::ResetClock(clk))
                .with(Action::SetClockRunning {
                    clock: clk,
                    running: true,
                }),
        );
        a.push(
            run,
            Transition::new(
                Guard::on(EventSet::single(Wash)).clock(clk, Comparator::Ge, 5),
                idle,
            )
            .with(Action::SetClockRunning {
                clock: clk,
                running: false,
            })
            .emitting(),
        );
        a.push(run, Transition::new(Guard::on(EventSet::single(Wash)), run));
        a.push(
            run,
            Transition::new(Guard::any(), idle).with(Action::SetClockRunning {
                clock: clk,
                running: false,
            }),
        );
        FsmDefinition::new("e6", ComplexEvent::of(6), a).unwrap()
    }

    #[test]
    fn event_set_display_and_equality() {
        let s = EventSet::of(&[Type, Click]);
        assert_eq!(s.to_string(), "type|click");
        assert_eq!(s, EventSet::of(&[Click, Type]));
        assert_eq!(EventSet::all().to_string(), "*");
        let u = EventSet::of(&[Brush, Eat, Drink]).complement();
        assert_eq!(u.len(), 6);
        assert_eq!(u.to_string(), "!(brush|drink|eat)");
        assert!(s.intersect(&EventSet::single(Click)).contains(Click));
        assert!(s.difference(&s).is_empty());
    }

    #[test]
    fn clock_counts_windows_since_reset() {
        let m = wash_machine();
        assert_eq!(
            m.run(&[Wash; 6]),
            vec![false, false, false, false, false, true]
        );
        let twelve = m.run(&[Wash; 12]);
        let hits: Vec<usize> = twelve
            .iter()
            .enumerate()
            .filter(|(_, e)| **e)
            .map(|(i, _)| i + 1)
            .collect();
        assert_eq!(hits, vec![6, 12]);
        assert!(m.run(&[Walk; 6]).iter().all(|e| !e));
    }

    #[test]
    fn step_from_run_with_five() {
        let m = wash_machine();
        let mut st = m.initial_state();
        for _ in 0..5 {
            m.advance(&mut st, Wash);
        }
        assert_eq!(m.states()[st.state], "RUN");
        assert_eq!(st.clocks[0], 5);
        let (next, emitted) = m.step(&st, Wash);
        assert!(emitted);
        assert_eq!(m.states()[next.state], "IDLE");
    }

    #[test]
    fn implicit_self_loop() {
        let m = wash_machine();
        let st = m.initial_state();
        let mut s2 = st.clone();
        let out = m.advance(&mut s2, Sit);
        assert_eq!(
            out,
            StepOutcome {
                emitted: false,
                transition: None
            }
        );
        assert_eq!(s2.state, st.state);
        assert_eq!(s2.window, 1);
    }

    #[test]
    fn values_saturate() {
        let m = wash_machine();
        assert_eq!(m.clock_caps(), &[6]);
        let mut a = m.body().clone();
        // keep the clock running forever
        a.transitions[1].clear();
        let m2 = FsmDefinition::new("x", ComplexEvent::of(6), a).unwrap();
        let mut st = m2.initial_state();
        for _ in 0..50 {
            m2.advance(&mut st, Wash);
        }
        assert_eq!(st.clocks[0], 1);
    }

    #[test]
    fn validation_errors() {
        let mut a = Automaton::default();
        assert_eq!(
            FsmDefinition::new("x", ComplexEvent::of(1), a.clone()),
            Err(FsmError::NoStates)
        );
        let s = a.add_state("A");
        a.push(s, Transition::new(Guard::any(), 3));
        assert!(matches!(
            FsmDefinition::new("x", ComplexEvent::of(1), a.clone()),
            Err(FsmError::BadTarget { .. })
        ));
        a.transitions[0][0].target = 0;
        a.transitions[0][0].guard.events = EventSet::empty();
        assert!(matches!(
            FsmDefinition::new("x", ComplexEvent::of(1), a.clone()),
            Err(FsmError::EmptyGuard { .. })
        ));
        a.transitions[0][0].guard.events = EventSet::all();
        a.transitions[0][0].actions.push(Action::ResetClock(0));
        assert!(matches!(
            FsmDefinition::new("x", ComplexEvent::of(1), a.clone()),
            Err(FsmError::UnknownClock { .. })
        ));
        a.transitions[0][0].actions.clear();
        assert_eq!(
            FsmDefinition::new("x", ComplexEvent::DEFAULT, a),
            Err(FsmError::DefaultClass)
        );
    }

    #[test]
    fn unique_var_names() {
        let mut a = Automaton::default();
        a.add_clock("x");
        a.add_counter("x");
        assert_eq!(a.counters, vec!["x2".to_string()]);
    }
}
