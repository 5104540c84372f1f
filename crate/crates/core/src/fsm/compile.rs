//! Compilation of pattern expressions into [`FsmDefinition`]s.
//!
//! Every combinator produces a machine whose emitting transitions return
//! to its initial state, so a completed pattern re-arms immediately and
//! repeated occurrences within one trace are all reported. Composite
//! operators are built from their operands' machines:
//!
//! * `OR` and `AND` use a synchronous product. Transitions of the product
//!   are the pairs of operand transitions (each list extended with a
//!   catch-all) in lexicographic order, which reproduces first-match
//!   semantics of both operands exactly.
//! * `THEN` is a disjoint union: the first operand's completion hands over
//!   to the second operand's initial state.
//! * `WITHIN` and `ABSENT` wrap their operand's states.

use thiserror::Error;

use super::dsl::{DurationMode, Pattern, PatternExpr, SeqStep};
use super::machine::{
    Action, Automaton, Comparator, EventSet, FsmDefinition, FsmError, Guard, Predicate, Transition,
};
use crate::model::ComplexEvent;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Invalid(#[from] FsmError),
    #[error("variable `{0}` is incremented but never compared, so it has no bound")]
    Unbounded(String),
}

/// Compiles a parsed pattern into a machine emitting `ce`.
pub fn compile(pattern: &Pattern, ce: ComplexEvent) -> Result<FsmDefinition, CompileError> {
    let body = match pattern {
        Pattern::Expr(e) => prune(&compile_expr(e)),
        Pattern::Machine(m) => m.clone(),
    };
    check_bounded(&body)?;
    Ok(FsmDefinition::new(ce.to_string(), ce, body)?)
}

/// Compiles a combinator expression to an (unvalidated) automaton.
pub fn compile_expr(expr: &PatternExpr) -> Automaton {
    match expr {
        PatternExpr::Seq(steps) => seq(steps),
        PatternExpr::Dur {
            events,
            windows,
            mode,
            grace,
        } => dur(*events, *windows, *mode, *grace),
        PatternExpr::Gap { after, before, min } => gap(*after, *before, *min),
        PatternExpr::Count {
            events,
            n,
            exact,
            arm,
            disarm,
        } => count(*events, *n, *exact, *arm, *disarm),
        PatternExpr::Within { inner, windows } => within(&compile_expr(inner), *windows),
        PatternExpr::Absent {
            required,
            trigger,
            violation,
            lookback,
        } => {
            let req = compile_expr(required);
            match lookback {
                None => absent(&req, *trigger, *violation),
                Some(l) => absent_lookback(&req, *trigger, *l),
            }
        }
        PatternExpr::Or(l, r) => or(&compile_expr(l), &compile_expr(r)),
        PatternExpr::And(l, r) => and(&compile_expr(l), &compile_expr(r)),
        PatternExpr::Then(l, r) => then(&compile_expr(l), &compile_expr(r)),
    }
}

fn check_bounded(a: &Automaton) -> Result<(), CompileError> {
    let all = a.transitions.iter().flatten();
    for (i, name) in a.counters.iter().enumerate() {
        let incremented = all.clone().any(|t| {
            t.actions
                .iter()
                .any(|x| matches!(x, Action::IncrementCounter { counter, by } if *counter == i && *by > 0))
        });
        let compared = all
            .clone()
            .any(|t| t.guard.counters.iter().any(|p| p.var == i));
        if incremented && !compared {
            return Err(CompileError::Unbounded(name.clone()));
        }
    }
    Ok(())
}

fn start_clock(c: usize) -> [Action; 2] {
    [
        Action::ResetClock(c),
        Action::SetClockRunning {
            clock: c,
            running: true,
        },
    ]
}

fn pause(c: usize) -> Action {
    Action::SetClockRunning {
        clock: c,
        running: false,
    }
}

fn set(counter: usize, value: u32) -> Action {
    Action::SetCounter { counter, value }
}

fn inc(counter: usize) -> Action {
    Action::IncrementCounter { counter, by: 1 }
}

/// Actions returning every variable of `a` to its initial value.
fn reinit(a: &Automaton) -> Vec<Action> {
    let mut v = Vec::new();
    for c in 0..a.clocks.len() {
        v.push(Action::ResetClock(c));
        v.push(pause(c));
    }
    for c in 0..a.counters.len() {
        v.push(set(c, 0));
    }
    v
}

fn seq(steps: &[SeqStep]) -> Automaton {
    let mut a = Automaton::default();
    let k = steps.len();
    for i in 0..k {
        a.add_state(format!("S{i}"));
    }
    let named = steps
        .iter()
        .fold(EventSet::empty(), |acc, s| acc.union(&s.events));
    let first = steps[0].events;
    let advance = |a: &mut Automaton, from: usize, events: EventSet| {
        let t = if from + 1 == k {
            Transition::new(Guard::on(events), 0).emitting()
        } else {
            Transition::new(Guard::on(events), from + 1)
        };
        a.push(from, t);
    };
    advance(&mut a, 0, first);
    for (i, next) in steps.iter().enumerate().take(k).skip(1) {
        advance(&mut a, i, next.events);
        let mut covered = next.events;
        let skip = next
            .skip
            .unwrap_or_else(|| named.complement())
            .difference(&covered);
        if !skip.is_empty() {
            a.push(i, Transition::new(Guard::on(skip), i));
            covered = covered.union(&skip);
        }
        let restart = first.difference(&covered);
        if !restart.is_empty() {
            a.push(i, Transition::new(Guard::on(restart), 1));
            covered = covered.union(&restart);
        }
        let rest = covered.complement();
        if !rest.is_empty() {
            a.push(i, Transition::new(Guard::on(rest), 0));
        }
    }
    a
}

fn dur(events: EventSet, n: u32, mode: DurationMode, grace: Option<u32>) -> Automaton {
    let mut a = Automaton::default();
    let idle = a.add_state("IDLE");
    if n == 1 {
        a.push(idle, Transition::new(Guard::on(events), idle).emitting());
        return a;
    }
    let run = a.add_state("RUN");
    let suffix = match mode {
        DurationMode::Consecutive => "Run",
        DurationMode::Cumulative => "Total",
    };
    let c = a.add_clock(format!("{}{suffix}", events.slug()));
    let gap = grace.map(|_| a.add_counter(format!("{}Gap", events.slug())));
    let mut start = Transition::new(Guard::on(events), run);
    start.actions.extend(start_clock(c));
    if let Some(g) = gap {
        start.actions.push(set(g, 0));
    }
    a.push(idle, start);
    a.push(
        run,
        Transition::new(Guard::on(events).clock(c, Comparator::Ge, n - 1), idle)
            .with(pause(c))
            .emitting(),
    );
    let mut cont = Transition::new(Guard::on(events), run);
    if mode == DurationMode::Cumulative {
        cont.actions.push(Action::SetClockRunning {
            clock: c,
            running: true,
        });
    }
    if let Some(g) = gap {
        cont.actions.push(set(g, 0));
    }
    a.push(run, cont);
    let other = events.complement();
    match (gap, grace, mode) {
        (Some(g), Some(limit), _) => {
            a.push(
                run,
                Transition::new(Guard::on(other).counter(g, Comparator::Ge, limit), idle)
                    .with(pause(c)),
            );
            let mut hold = Transition::new(Guard::on(other), run);
            if mode == DurationMode::Cumulative {
                hold.actions.push(pause(c));
            }
            hold.actions.push(inc(g));
            a.push(run, hold);
        }
        (_, _, DurationMode::Consecutive) => {
            a.push(run, Transition::new(Guard::on(other), idle).with(pause(c)));
        }
        (_, _, DurationMode::Cumulative) => {
            a.push(run, Transition::new(Guard::on(other), run).with(pause(c)));
        }
    }
    a
}

fn gap(after: EventSet, before: EventSet, min: u32) -> Automaton {
    let mut a = Automaton::default();
    let idle = a.add_state("IDLE");
    let armed = a.add_state("ARMED");
    let c = a.add_clock(format!("since_{}", after.slug()));
    let mut arm = Transition::new(Guard::on(after), armed);
    arm.actions.extend(start_clock(c));
    a.push(idle, arm.clone());
    a.push(
        armed,
        Transition::new(Guard::on(before).clock(c, Comparator::Ge, min), idle)
            .with(pause(c))
            .emitting(),
    );
    a.push(
        armed,
        Transition::new(Guard::on(before), idle).with(pause(c)),
    );
    a.push(armed, arm);
    a
}

fn count(
    events: EventSet,
    n: u32,
    exact: bool,
    arm: Option<EventSet>,
    disarm: Option<EventSet>,
) -> Automaton {
    let mut a = Automaton::default();
    let idle = (arm.is_some() || disarm.is_some()).then(|| a.add_state("IDLE"));
    let armed = a.add_state("ARMED");
    a.initial = if arm.is_some() {
        idle.unwrap_or(armed)
    } else {
        armed
    };
    let cnt = a.add_counter(format!("{}Count", events.slug()));
    if let (Some(set_), Some(idle)) = (arm, idle) {
        a.push(
            idle,
            Transition::new(Guard::on(set_), armed).with(set(cnt, 0)),
        );
        a.push(
            armed,
            Transition::new(Guard::on(set_), armed).with(set(cnt, 0)),
        );
    }
    if let (Some(set_), Some(idle)) = (disarm, idle) {
        a.push(armed, Transition::new(Guard::on(set_), idle));
    }
    let after_emit = match (exact, arm, idle) {
        (true, Some(_), Some(idle)) => idle,
        _ => armed,
    };
    let hit = Guard::on(events);
    let hit = if n > 1 {
        hit.counter(cnt, Comparator::Ge, n - 1)
    } else {
        hit
    };
    a.push(
        armed,
        Transition::new(hit, after_emit)
            .with(set(cnt, 0))
            .emitting(),
    );
    if n > 1 {
        a.push(
            armed,
            Transition::new(Guard::on(events), armed).with(inc(cnt)),
        );
    }
    a
}

/// Copies `t` into a larger automaton whose variables of this component
/// start at the given offsets.
fn shift(t: &Transition, clocks: usize, counters: usize, target: usize) -> Transition {
    let mut t = t.clone();
    for p in &mut t.guard.clocks {
        p.var += clocks;
    }
    for p in &mut t.guard.counters {
        p.var += counters;
    }
    for a in &mut t.actions {
        match a {
            Action::ResetClock(c) | Action::SetClockRunning { clock: c, .. } => *c += clocks,
            Action::SetCounter { counter, .. } | Action::IncrementCounter { counter, .. } => {
                *counter += counters
            }
        }
    }
    t.target = target;
    t
}

fn shift_actions(actions: &[Action], clocks: usize, counters: usize) -> Vec<Action> {
    let t = Transition {
        guard: Guard::any(),
        actions: actions.to_vec(),
        target: 0,
        emit: false,
    };
    shift(&t, clocks, counters, 0).actions
}

/// Adds `src`'s variables to `dst`, returning the (clock, counter) offsets.
fn import_vars(dst: &mut Automaton, src: &Automaton) -> (usize, usize) {
    let offsets = (dst.clocks.len(), dst.counters.len());
    for c in &src.clocks {
        dst.add_clock(c.clone());
    }
    for c in &src.counters {
        dst.add_counter(c.clone());
    }
    offsets
}

fn catch_all(state: usize) -> Transition {
    Transition::new(Guard::any(), state)
}

/// Extra bookkeeping for each product transition: whether the left and
/// right operand transitions emitted.
struct Product {
    body: Automaton,
    emits: Vec<Vec<(bool, bool)>>,
    right_states: usize,
    left_vars: (usize, usize),
    right_vars: (usize, usize),
}

fn product(l: &Automaton, r: &Automaton) -> Product {
    let mut body = Automaton::default();
    let nr = r.states.len();
    for ls in &l.states {
        for rs in &r.states {
            body.add_state(format!("{ls}+{rs}"));
        }
    }
    body.initial = l.initial * nr + r.initial;
    let left_vars = import_vars(&mut body, l);
    let right_vars = import_vars(&mut body, r);
    let mut emits = vec![Vec::new(); body.states.len()];
    for li in 0..l.states.len() {
        for ri in 0..nr {
            let from = li * nr + ri;
            let lts: Vec<Transition> = l.transitions[li]
                .iter()
                .cloned()
                .chain([catch_all(li)])
                .collect();
            let rts: Vec<Transition> = r.transitions[ri]
                .iter()
                .cloned()
                .chain([catch_all(ri)])
                .collect();
            for (lk, lt) in lts.iter().enumerate() {
                for (rk, rt) in rts.iter().enumerate() {
                    if lk + 1 == lts.len() && rk + 1 == rts.len() {
                        continue;
                    }
                    let events = lt.guard.events.intersect(&rt.guard.events);
                    if events.is_empty() {
                        continue;
                    }
                    let target = lt.target * nr + rt.target;
                    let a = shift(lt, left_vars.0, left_vars.1, target);
                    let b = shift(rt, right_vars.0, right_vars.1, target);
                    let mut guard = Guard::on(events);
                    guard.clocks = a
                        .guard
                        .clocks
                        .iter()
                        .chain(&b.guard.clocks)
                        .copied()
                        .collect();
                    guard.counters = a
                        .guard
                        .counters
                        .iter()
                        .chain(&b.guard.counters)
                        .copied()
                        .collect();
                    let mut t = Transition::new(guard, target);
                    t.actions = a.actions.into_iter().chain(b.actions).collect();
                    body.push(from, t);
                    emits[from].push((lt.emit, rt.emit));
                }
            }
        }
    }
    Product {
        body,
        emits,
        right_states: nr,
        left_vars,
        right_vars,
    }
}

fn or(l: &Automaton, r: &Automaton) -> Automaton {
    let Product {
        mut body,
        emits,
        left_vars,
        right_vars,
        ..
    } = product(l, r);
    let mut reset = shift_actions(&reinit(l), left_vars.0, left_vars.1);
    reset.extend(shift_actions(&reinit(r), right_vars.0, right_vars.1));
    let init = body.initial;
    for (ts, es) in body.transitions.iter_mut().zip(&emits) {
        for (t, (le, re)) in ts.iter_mut().zip(es) {
            if *le || *re {
                t.emit = true;
                t.target = init;
                t.actions.extend(reset.iter().copied());
            }
        }
    }
    body
}

/// Replaces completion with entry into an absorbing `DONE` state.
fn latch(a: &Automaton) -> Automaton {
    let mut out = a.clone();
    let done = out.add_state("DONE");
    for t in out.transitions.iter_mut().flatten() {
        if t.emit {
            t.emit = false;
            t.target = done;
        }
    }
    out
}

fn and(l: &Automaton, r: &Automaton) -> Automaton {
    let (ll, rl) = (latch(l), latch(r));
    let Product {
        mut body,
        right_states,
        left_vars,
        right_vars,
        ..
    } = product(&ll, &rl);
    let both_done = (ll.states.len() - 1) * right_states + (rl.states.len() - 1);
    let mut reset = shift_actions(&reinit(l), left_vars.0, left_vars.1);
    reset.extend(shift_actions(&reinit(r), right_vars.0, right_vars.1));
    let init = body.initial;
    for t in body.transitions.iter_mut().flatten() {
        if t.target == both_done {
            t.emit = true;
            t.target = init;
            t.actions.extend(reset.iter().copied());
        }
    }
    body
}

fn then(first: &Automaton, second: &Automaton) -> Automaton {
    let mut body = Automaton::default();
    for s in &first.states {
        body.add_state(format!("first.{s}"));
    }
    let off = first.states.len();
    for s in &second.states {
        body.add_state(format!("then.{s}"));
    }
    body.initial = first.initial;
    let fv = import_vars(&mut body, first);
    let sv = import_vars(&mut body, second);
    let reset_first = shift_actions(&reinit(first), fv.0, fv.1);
    let reset_second = shift_actions(&reinit(second), sv.0, sv.1);
    for (si, ts) in first.transitions.iter().enumerate() {
        for t in ts {
            let mut n = shift(t, fv.0, fv.1, t.target);
            if t.emit {
                n.emit = false;
                n.target = off + second.initial;
                n.actions.extend(reset_second.iter().copied());
            }
            body.push(si, n);
        }
    }
    for (si, ts) in second.transitions.iter().enumerate() {
        for t in ts {
            let mut n = shift(t, sv.0, sv.1, off + t.target);
            if t.emit {
                n.target = first.initial;
                n.actions.extend(reset_first.iter().copied());
            }
            body.push(off + si, n);
        }
    }
    body
}

/// Drops predicates that hold when every variable is zero and returns
/// `None` for guards that cannot hold then.
fn at_zero(guard: &Guard) -> Option<Guard> {
    let ok = |p: &Predicate| p.cmp.holds(0, p.value);
    if guard.clocks.iter().chain(&guard.counters).all(ok) {
        Some(Guard::on(guard.events))
    } else {
        None
    }
}

fn within(inner: &Automaton, n: u32) -> Automaton {
    let mut body = inner.clone();
    let span = body.add_clock("span");
    let init = inner.initial;
    let reset_inner = reinit(inner);
    for t in body.transitions[init].iter_mut() {
        if t.target != init {
            t.actions.extend(start_clock(span));
        }
    }
    let restarts: Vec<Transition> = body.transitions[init]
        .iter()
        .filter_map(|t| {
            let g = at_zero(&t.guard)?.clock(span, Comparator::Ge, n);
            let mut actions = reset_inner.clone();
            actions.extend(t.actions.iter().copied());
            if t.target == init {
                actions.push(pause(span));
            }
            Some(Transition {
                guard: g,
                actions,
                target: t.target,
                emit: t.emit,
            })
        })
        .collect();
    for s in 0..body.states.len() {
        if s == init {
            continue;
        }
        let mut ts = restarts.clone();
        let mut expire = Transition::new(Guard::any().clock(span, Comparator::Ge, n), init);
        expire.actions = reset_inner.clone();
        expire.actions.push(pause(span));
        ts.push(expire);
        ts.extend(body.transitions[s].iter().cloned());
        body.transitions[s] = ts;
    }
    body
}

fn absent(req: &Automaton, trigger: EventSet, violation: EventSet) -> Automaton {
    let mut body = Automaton::default();
    let idle = body.add_state("IDLE");
    for s in &req.states {
        body.add_state(format!("MONITOR.{s}"));
    }
    let (co, no) = import_vars(&mut body, req);
    let monitor = |s: usize| 1 + s;
    let reset = reinit(req);
    let mut arm = Transition::new(Guard::on(trigger), monitor(req.initial));
    arm.actions = reset.clone();
    body.push(idle, arm.clone());
    for (si, ts) in req.transitions.iter().enumerate() {
        let from = monitor(si);
        body.push(from, Transition::new(Guard::on(violation), idle).emitting());
        body.push(from, arm.clone());
        for t in ts {
            let mut n = shift(t, co, no, monitor(t.target));
            if t.emit {
                n.emit = false;
                n.target = idle;
            }
            body.push(from, n);
        }
    }
    body
}

/// Emits at each trigger window unless the required pattern completed
/// within the `lookback` windows before it.
fn absent_lookback(req: &Automaton, trigger: EventSet, lookback: u32) -> Automaton {
    let mut body = req.clone();
    let since = body.add_clock("since_required");
    let seen = body.add_counter("required_seen");
    let mut completed = start_clock(since).to_vec();
    completed.push(set(seen, 1));
    for (si, ts) in req.transitions.iter().enumerate() {
        let mut out = Vec::new();
        for t in ts.iter().cloned().chain([catch_all(si)]) {
            let mut actions = t.actions.clone();
            if t.emit {
                actions.extend(completed.iter().copied());
            }
            let fired = t.guard.events.intersect(&trigger);
            if !fired.is_empty() {
                let mut ok = t.guard.clone();
                ok.events = fired;
                let ok = ok
                    .counter(seen, Comparator::Eq, 1)
                    .clock(since, Comparator::Le, lookback);
                out.push(Transition {
                    guard: ok,
                    actions: actions.clone(),
                    target: t.target,
                    emit: false,
                });
                let mut bad = t.guard.clone();
                bad.events = fired;
                out.push(Transition {
                    guard: bad,
                    actions: actions.clone(),
                    target: t.target,
                    emit: true,
                });
            }
            let quiet = t.guard.events.difference(&trigger);
            if !quiet.is_empty() && !(t.target == si && actions.is_empty()) {
                let mut g = t.guard.clone();
                g.events = quiet;
                out.push(Transition {
                    guard: g,
                    actions,
                    target: t.target,
                    emit: false,
                });
            } else if !quiet.is_empty() {
                let mut g = t.guard.clone();
                g.events = quiet;
                out.push(Transition::new(g, si));
            }
        }
        body.transitions[si] = out;
    }
    body
}

/// Removes states unreachable from the initial state, keeping order.
fn prune(a: &Automaton) -> Automaton {
    let n = a.states.len();
    let mut seen = vec![false; n];
    let mut stack = vec![a.initial];
    seen[a.initial] = true;
    while let Some(s) = stack.pop() {
        for t in &a.transitions[s] {
            if !seen[t.target] {
                seen[t.target] = true;
                stack.push(t.target);
            }
        }
    }
    let mut map = vec![usize::MAX; n];
    let mut out = Automaton {
        clocks: a.clocks.clone(),
        counters: a.counters.clone(),
        ..Automaton::default()
    };
    for s in 0..n {
        if seen[s] {
            map[s] = out.states.len();
            out.states.push(a.states[s].clone());
        }
    }
    out.initial = map[a.initial];
    out.transitions = (0..n)
        .filter(|s| seen[*s])
        .map(|s| {
            a.transitions[s]
                .iter()
                .map(|t| Transition {
                    target: map[t.target],
                    ..t.clone()
                })
                .collect()
        })
        .collect();
    out
}
