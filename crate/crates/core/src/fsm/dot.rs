//! Graphviz rendering of compiled machines.

use std::fmt::Write;

use super::machine::{Action, FsmDefinition, Guard, Transition};

/// Renders `def` as a DOT digraph. Nodes follow declaration order and
/// edges follow transition priority; implicit self-loops are omitted.
pub fn to_dot(def: &FsmDefinition) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote_id(def.machine_id()));
    let _ = writeln!(out, "  rankdir=LR;");
    for (i, name) in def.states().iter().enumerate() {
        let style = if i == def.initial() {
            " style=bold"
        } else {
            ""
        };
        let _ = writeln!(out, "  {} [shape=circle{style}];", quote_id(name));
    }
    for (i, from) in def.states().iter().enumerate() {
        for t in def.transitions(i) {
            let _ = writeln!(
                out,
                "  {} -> {} [label={}];",
                quote_id(from),
                quote_id(&def.states()[t.target]),
                quote_str(&edge_label(def, t))
            );
        }
    }
    out.push_str("}\n");
    out
}

fn guard_label(def: &FsmDefinition, g: &Guard) -> String {
    let mut s = g.events.to_string();
    for p in &g.clocks {
        let _ = write!(
            s,
            " & {} {} {}",
            def.clocks()[p.var],
            p.cmp.symbol(),
            p.value
        );
    }
    for p in &g.counters {
        let _ = write!(
            s,
            " & {} {} {}",
            def.counters()[p.var],
            p.cmp.symbol(),
            p.value
        );
    }
    s
}

fn action_label(def: &FsmDefinition, a: &Action) -> String {
    match *a {
        Action::ResetClock(c) => format!("reset {}", def.clocks()[c]),
        Action::SetClockRunning { clock, running } => {
            let verb = if running { "resume" } else { "pause" };
            format!("{verb} {}", def.clocks()[clock])
        }
        Action::SetCounter { counter, value } => format!("{} := {value}", def.counters()[counter]),
        Action::IncrementCounter { counter, by } => format!("{} += {by}", def.counters()[counter]),
    }
}

fn edge_label(def: &FsmDefinition, t: &Transition) -> String {
    let mut parts: Vec<String> = t.actions.iter().map(|a| action_label(def, a)).collect();
    if t.emit {
        parts.push(format!("emit {}", def.ce()));
    }
    let guard = guard_label(def, &t.guard);
    if parts.is_empty() {
        guard
    } else {
        format!("{guard} / {}", parts.join(", "))
    }
}

fn quote_id(s: &str) -> String {
    if !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !s.starts_with(|c: char| c.is_ascii_digit())
    {
        s.to_string()
    } else {
        quote_str(s)
    }
}

fn quote_str(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsm::compile::compile;
    use crate::fsm::dsl::parse_pattern;
    use crate::model::ComplexEvent;

    #[test]
    fn duration_graph() {
        let def = compile(
            &parse_pattern("DUR(wash, 6, consecutive)").unwrap(),
            ComplexEvent::of(6),
        )
        .unwrap();
        let dot = to_dot(&def);
        assert!(dot.starts_with("digraph e6 {"));
        assert!(dot.contains("IDLE [shape=circle style=bold];"));
        assert!(dot.contains("RUN [shape=circle];"));
        assert!(
            dot.contains("RUN -> IDLE [label=\"wash & washRun >= 5 / pause washRun, emit e6\"];")
        );
        assert_eq!(dot.matches(" -> ").count(), 4);
    }

    #[test]
    fn violation_edge_label() {
        let rules = crate::rules::builtin_rules();
        let dot = to_dot(rules.machine(ComplexEvent::of(1)).unwrap());
        assert!(
            dot.contains("MONITOR -> IDLE [label=\"type|click / emit e1\"];"),
            "{dot}"
        );
    }

    #[test]
    fn stateless_machine_has_no_edges_for_implicit_loops() {
        let src = "machine\n states A B\n initial A\n on A walk -> B\nend";
        let def = compile(&parse_pattern(src).unwrap(), ComplexEvent::of(2)).unwrap();
        let dot = to_dot(&def);
        assert!(dot.contains("B [shape=circle];"));
        assert_eq!(dot.matches(" -> ").count(), 1);
    }
}
