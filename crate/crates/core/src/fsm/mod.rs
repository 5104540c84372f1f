//! Timed and counting finite-state machines: representation, pattern DSL,
//! compiler and per-window execution.

pub mod compile;
pub mod dot;
pub mod dsl;
pub mod machine;

pub use compile::{compile, compile_expr, CompileError};
pub use dot::to_dot;
pub use dsl::{
    parse_pattern, parse_rules, DslError, DurationMode, Pattern, PatternExpr, RuleDecl, SeqStep,
};
pub use machine::{
    Action, Automaton, Comparator, EventSet, FsmDefinition, FsmError, FsmState, Guard, Predicate,
    StepOutcome, Transition,
};
