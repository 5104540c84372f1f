//! Hand-written per-rule interpreters used as an oracle for the compiled
//! machines. They share no code with the FSM engine.

use crate::model::AtomicEvent::{self, *};
use crate::model::ComplexEvent;

use super::RuleError;

/// Emission sequence of rule `ce` over `trace`, computed procedurally.
pub fn reference_label(ce: ComplexEvent, trace: &[AtomicEvent]) -> Result<Vec<bool>, RuleError> {
    let f = match ce.id() {
        1 => e1,
        2 => e2,
        3 => e3,
        4 => e4,
        5 => e5,
        6 => e6,
        7 => e7,
        8 => e8,
        9 => e9,
        10 => e10,
        _ => return Err(RuleError::UnsupportedClass(ce)),
    };
    Ok(f(trace))
}

fn is_work(a: AtomicEvent) -> bool {
    matches!(a, Type | Click)
}

fn e1(trace: &[AtomicEvent]) -> Vec<bool> {
    let mut armed = false;
    let mut run = 0;
    trace
        .iter()
        .map(|&a| {
            if !armed {
                if a == FlushToilet {
                    armed = true;
                    run = 0;
                }
                return false;
            }
            if is_work(a) {
                armed = false;
                return true;
            }
            if a == Wash {
                run += 1;
                if run >= 4 {
                    armed = false;
                }
            } else {
                run = 0;
            }
            false
        })
        .collect()
}

fn e2(trace: &[AtomicEvent]) -> Vec<bool> {
    let mut in_meal = false;
    let mut out = Vec::with_capacity(trace.len());
    for (t, &a) in trace.iter().enumerate() {
        if in_meal && !matches!(a, Eat | Drink | Sit) {
            in_meal = false;
        }
        let mut emit = false;
        if !in_meal && matches!(a, Eat | Drink) {
            in_meal = true;
            let window = &trace[t.saturating_sub(24)..t];
            let clean = window.windows(4).any(|w| w.iter().all(|&x| x == Wash));
            emit = !clean;
        }
        out.push(emit);
    }
    out
}

fn e3(trace: &[AtomicEvent]) -> Vec<bool> {
    let mut session: Option<(u32, u32)> = None;
    trace
        .iter()
        .map(|&a| match (&mut session, a) {
            (None, Brush) => {
                session = Some((1, 0));
                false
            }
            (None, _) => false,
            (Some((total, idle)), Brush) => {
                *total += 1;
                *idle = 0;
                if *total >= 24 {
                    session = None;
                }
                false
            }
            (Some((_, idle)), _) => {
                *idle += 1;
                if *idle >= 3 {
                    session = None;
                    true
                } else {
                    false
                }
            }
        })
        .collect()
}

/// Relaxed sequence: `skips[i]` are tolerated while waiting for step `i`;
/// a token of the first step restarts, anything else abandons.
fn relaxed_sequence(
    trace: &[AtomicEvent],
    steps: &[&[AtomicEvent]],
    skips: &[&[AtomicEvent]],
) -> Vec<bool> {
    let mut at = 0;
    trace
        .iter()
        .map(|a| {
            if at > 0 && steps[at].contains(a) {
                at += 1;
                if at == steps.len() {
                    at = 0;
                    return true;
                }
            } else if at > 0 && skips[at].contains(a) {
            } else if steps[0].contains(a) {
                at = 1;
            } else {
                at = 0;
            }
            false
        })
        .collect()
}

fn except(excluded: &[AtomicEvent]) -> Vec<AtomicEvent> {
    AtomicEvent::ALL
        .into_iter()
        .filter(|a| !excluded.contains(a))
        .collect()
}

fn e4(trace: &[AtomicEvent]) -> Vec<bool> {
    let u = except(&[Brush, Eat, Drink]);
    let skips: [&[AtomicEvent]; 3] = [&[], &u, &u];
    let a = relaxed_sequence(trace, &[&[Brush], &[Eat], &[Drink]], &skips);
    let b = relaxed_sequence(trace, &[&[Brush], &[Drink], &[Eat]], &skips);
    a.into_iter().zip(b).map(|(x, y)| x || y).collect()
}

fn e5(trace: &[AtomicEvent]) -> Vec<bool> {
    let u = except(&[Sit, Type, Click, Walk]);
    let v = except(&[Type, Click, Walk]);
    relaxed_sequence(trace, &[&[Sit], &[Type, Click], &[Walk]], &[&[], &u, &v])
}

fn e6(trace: &[AtomicEvent]) -> Vec<bool> {
    let mut run = 0;
    trace
        .iter()
        .map(|&a| {
            if a != Wash {
                run = 0;
                return false;
            }
            run += 1;
            if run == 6 {
                run = 0;
                return true;
            }
            false
        })
        .collect()
}

fn e7(trace: &[AtomicEvent]) -> Vec<bool> {
    let mut total = 0;
    trace
        .iter()
        .map(|&a| {
            if a == Brush {
                total += 1;
                if total == 24 {
                    total = 0;
                    return true;
                }
            }
            false
        })
        .collect()
}

fn e8(trace: &[AtomicEvent]) -> Vec<bool> {
    let mut last_eat: Option<usize> = None;
    trace
        .iter()
        .enumerate()
        .map(|(t, &a)| {
            if is_work(a) {
                if let Some(e) = last_eat.take() {
                    return t - e >= 36;
                }
            } else if a == Eat {
                last_eat = Some(t);
            }
            false
        })
        .collect()
}

fn e9(trace: &[AtomicEvent]) -> Vec<bool> {
    let mut starts: Vec<usize> = Vec::new();
    let mut prev = None;
    trace
        .iter()
        .enumerate()
        .map(|(t, &a)| {
            let mut emit = false;
            if a == Type && prev != Some(Type) {
                starts.retain(|&s| t - s <= 12);
                starts.push(t);
                if starts.len() == 3 {
                    starts.clear();
                    emit = true;
                }
            }
            prev = Some(a);
            emit
        })
        .collect()
}

fn e10(trace: &[AtomicEvent]) -> Vec<bool> {
    let mut clicks: Option<u32> = None;
    trace
        .iter()
        .map(|&a| {
            match a {
                Sit => clicks = Some(0),
                Walk => clicks = None,
                Click => {
                    if let Some(n) = clicks.as_mut() {
                        *n += 1;
                        if *n == 5 {
                            clicks = None;
                            return true;
                        }
                    }
                }
                _ => {}
            }
            false
        })
        .collect()
}
