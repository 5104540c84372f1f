//! The built-in complex-event rules and user-supplied rule files.

pub mod reference;

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fsm::{compile, parse_rules, CompileError, DslError, FsmDefinition};
use crate::model::ComplexEvent;

pub use reference::reference_label;

/// DSL source of the ten built-in rules.
pub const BUILTIN_SOURCE: &str = include_str!("../../../../rules/builtin.ced");

#[derive(Debug, Error)]
pub enum RuleError {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("rule {ce}: {source}")]
    Compile {
        ce: ComplexEvent,
        #[source]
        source: CompileError,
    },
    #[error("rule file declares no rules")]
    Empty,
    #[error("class {0} has no rule")]
    UnsupportedClass(ComplexEvent),
}

/// One compiled rule with the text it was compiled from.
#[derive(Debug, Clone)]
pub struct Rule {
    pub title: String,
    pub source: String,
    pub machine: FsmDefinition,
}

/// Compiled rules keyed by class, iterated in ascending id order.
#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: BTreeMap<ComplexEvent, Rule>,
}

impl RuleSet {
    /// Parses and compiles every declaration of a rule file.
    pub fn from_source(text: &str) -> Result<Self, RuleError> {
        let mut rules = BTreeMap::new();
        for decl in parse_rules(text)? {
            let machine = compile(&decl.pattern, decl.ce).map_err(|source| RuleError::Compile {
                ce: decl.ce,
                source,
            })?;
            rules.insert(
                decl.ce,
                Rule {
                    title: decl.title,
                    source: decl.source,
                    machine,
                },
            );
        }
        if rules.is_empty() {
            return Err(RuleError::Empty);
        }
        Ok(RuleSet { rules })
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn classes(&self) -> impl Iterator<Item = ComplexEvent> + '_ {
        self.rules.keys().copied()
    }

    pub fn get(&self, ce: ComplexEvent) -> Option<&Rule> {
        self.rules.get(&ce)
    }

    pub fn machine(&self, ce: ComplexEvent) -> Option<&FsmDefinition> {
        self.rules.get(&ce).map(|r| &r.machine)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ComplexEvent, &Rule)> {
        self.rules.iter().map(|(k, v)| (*k, v))
    }

    /// SHA-256 over the rule sources in class order, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (ce, rule) in &self.rules {
            h.update(ce.to_string().as_bytes());
            h.update([0]);
            h.update(rule.source.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }
}

/// The ten built-in rules e1..e10.
pub fn builtin_rules() -> RuleSet {
    let set = RuleSet::from_source(BUILTIN_SOURCE).expect("built-in rules compile");
    debug_assert_eq!(set.len(), 10);
    set
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_cover_all_classes() {
        let rules = builtin_rules();
        assert_eq!(rules.len(), 10);
        for (i, (ce, rule)) in rules.iter().enumerate() {
            assert_eq!(ce.id() as usize, i + 1);
            assert_eq!(rule.machine.ce(), ce);
            assert!(rule.source.starts_with(&format!("ce {ce} ")));
        }
    }

    #[test]
    fn builtin_bounds() {
        let rules = builtin_rules();
        let e6 = rules.machine(ComplexEvent::of(6)).unwrap();
        assert_eq!(e6.clocks(), &["washRun"]);
        assert_eq!(e6.clock_caps(), &[6]);
        let e9 = rules.machine(ComplexEvent::of(9)).unwrap();
        assert_eq!(e9.clock_caps(), &[13, 13]);
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = builtin_rules().digest();
        assert_eq!(a, builtin_rules().digest());
        let edited = BUILTIN_SOURCE.replace("DUR(wash, 6,", "DUR(wash, 7,");
        assert_ne!(a, RuleSet::from_source(&edited).unwrap().digest());
    }

    #[test]
    fn subset_files_are_allowed() {
        let set = RuleSet::from_source("ce e3 \"x\"\npattern DUR(wash, 2, consecutive)\n").unwrap();
        assert_eq!(set.classes().collect::<Vec<_>>(), vec![ComplexEvent::of(3)]);
        assert!(matches!(
            RuleSet::from_source("# nothing\n"),
            Err(RuleError::Empty)
        ));
    }
}
