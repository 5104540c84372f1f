//! Pattern DSL: a small line-oriented language with two layers.
//!
//! Combinator expressions:
//!
//! ```text
//! SEQ(brush; eat skip !{brush,eat,drink}; drink skip !{brush,eat,drink})
//! DUR(wash, 6, consecutive)
//! DUR(brush, 24, cumulative, grace=2)
//! WITHIN(SEQ(sit; walk), 10)
//! GAP(eat, {type,click}, min=36)
//! COUNT(click, 5, exact, arm={sit}, disarm={walk})
//! ABSENT(DUR(wash, 4, consecutive), trigger={flush_toilet}, violation={type,click})
//! AND(a, b)   OR(a, b)   THEN(a, b)   EVENT(set)
//! ```
//!
//! and raw machines, one construct per line:
//!
//! ```text
//! machine
//!   states IDLE MONITOR
//!   initial IDLE
//!   counter washRun
//!   on IDLE flush_toilet -> MONITOR : washRun := 0
//!   on MONITOR {type,click} -> IDLE emit
//!   on MONITOR wash & washRun >= 3 -> IDLE
//! end
//! ```
//!
//! A rule file is a sequence of `ce <id> "<title>"` declarations, each
//! followed by `pattern <expr>` or a machine block. `#` starts a comment.

use thiserror::Error;

use super::machine::{Action, Automaton, Comparator, EventSet, Guard, Transition};
use crate::model::{parse_ae_token, ComplexEvent};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("{line}:{col}: syntax error: expected {expected}, found {found}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
        found: String,
    },
    #[error("{line}:{col}: unknown atomic event `{token}`")]
    UnknownToken {
        line: usize,
        col: usize,
        token: String,
    },
    #[error("{line}:{col}: unbound name `{name}`")]
    UnboundName {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("{line}:{col}: rule {ce} declared twice")]
    DuplicateRule {
        line: usize,
        col: usize,
        ce: ComplexEvent,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DurationMode {
    Consecutive,
    Cumulative,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeqStep {
    pub events: EventSet,
    /// Events tolerated while waiting for this step. `None` means every
    /// event not named by any step of the sequence.
    pub skip: Option<EventSet>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternExpr {
    /// Relaxed-order sequence.
    Seq(Vec<SeqStep>),
    /// Duration of an event set, consecutive or accumulated.
    Dur {
        events: EventSet,
        windows: u32,
        mode: DurationMode,
        grace: Option<u32>,
    },
    /// Inner pattern must complete within `windows` of its anchor.
    Within {
        inner: Box<PatternExpr>,
        windows: u32,
    },
    /// `before` occurring at least `min` windows after the latest `after`.
    Gap {
        after: EventSet,
        before: EventSet,
        min: u32,
    },
    /// Repetition count, optionally scoped by arm/disarm events.
    Count {
        events: EventSet,
        n: u32,
        exact: bool,
        arm: Option<EventSet>,
        disarm: Option<EventSet>,
    },
    /// Violation when a required sub-pattern has not completed.
    Absent {
        required: Box<PatternExpr>,
        trigger: EventSet,
        violation: EventSet,
        lookback: Option<u32>,
    },
    And(Box<PatternExpr>, Box<PatternExpr>),
    Or(Box<PatternExpr>, Box<PatternExpr>),
    Then(Box<PatternExpr>, Box<PatternExpr>),
}

/// Result of parsing one pattern: a combinator expression or a raw machine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Expr(PatternExpr),
    Machine(Automaton),
}

/// One `ce` declaration of a rule file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleDecl {
    pub ce: ComplexEvent,
    pub title: String,
    pub pattern: Pattern,
    /// Verbatim source text of the declaration.
    pub source: String,
}

/// Parses a single pattern expression or `machine ... end` block.
pub fn parse_pattern(text: &str) -> Result<Pattern, DslError> {
    let mut p = Parser::new(text)?;
    let pat = p.pattern_body()?;
    p.skip_newlines();
    p.expect_eof()?;
    Ok(pat)
}

/// Parses a rule file.
pub fn parse_rules(text: &str) -> Result<Vec<RuleDecl>, DslError> {
    let mut p = Parser::new(text)?;
    let mut out: Vec<RuleDecl> = Vec::new();
    loop {
        p.skip_newlines();
        if p.at_eof() {
            break;
        }
        let start_tok = p.peek_raw().clone();
        p.keyword("ce")?;
        let id_tok = p.peek_raw().clone();
        let ce = p.ce_id()?;
        if out.iter().any(|d| d.ce == ce) {
            return Err(DslError::DuplicateRule {
                line: id_tok.line,
                col: id_tok.col,
                ce,
            });
        }
        let title = p.string()?;
        p.skip_newlines();
        let pattern = if p.peek_ident() == Some("pattern") {
            p.bump();
            Pattern::Expr(p.expr()?)
        } else if p.peek_ident() == Some("machine") {
            Pattern::Machine(p.machine()?)
        } else {
            return Err(p.syntax("`pattern` or `machine`"));
        };
        let end = p.last_end;
        out.push(RuleDecl {
            ce,
            title,
            pattern,
            source: text[start_tok.offset..end].to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Kind {
    Ident(String),
    Int(u64),
    Str(String),
    Sym(&'static str),
    Newline,
    Eof,
}

#[derive(Debug, Clone)]
struct Tok {
    kind: Kind,
    line: usize,
    col: usize,
    offset: usize,
    end: usize,
}

impl Tok {
    fn describe(&self) -> String {
        match &self.kind {
            Kind::Ident(s) => format!("`{s}`"),
            Kind::Int(n) => format!("`{n}`"),
            Kind::Str(s) => format!("\"{s}\""),
            Kind::Sym(s) => format!("`{s}`"),
            Kind::Newline => "end of line".into(),
            Kind::Eof => "end of input".into(),
        }
    }
}

const SYMBOLS: [&str; 19] = [
    "->", ":=", "+=", "<=", ">=", "(", ")", "{", "}", ",", ";", "!", "=", "&", ":", "*", "<", ">",
    "-",
];

fn lex(src: &str) -> Result<Vec<Tok>, DslError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let (mut i, mut line, mut line_start) = (0usize, 1usize, 0usize);
    while i < bytes.len() {
        let c = bytes[i];
        let col = i - line_start + 1;
        let tok = |kind, end| Tok {
            kind,
            line,
            col,
            offset: i,
            end,
        };
        match c {
            b'\n' => {
                toks.push(tok(Kind::Newline, i + 1));
                i += 1;
                line += 1;
                line_start = i;
            }
            b' ' | b'\t' | b'\r' => i += 1,
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'"' => {
                let start = i + 1;
                let mut j = start;
                while j < bytes.len() && bytes[j] != b'"' && bytes[j] != b'\n' {
                    j += 1;
                }
                if j >= bytes.len() || bytes[j] != b'"' {
                    return Err(DslError::Syntax {
                        line,
                        col,
                        expected: "closing `\"`".into(),
                        found: "end of line".into(),
                    });
                }
                toks.push(tok(Kind::Str(src[start..j].to_string()), j + 1));
                i = j + 1;
            }
            b'0'..=b'9' => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                let n = src[i..j].parse::<u64>().map_err(|_| DslError::Syntax {
                    line,
                    col,
                    expected: "integer that fits 32 bits".into(),
                    found: format!("`{}`", &src[i..j]),
                })?;
                toks.push(tok(Kind::Int(n), j));
                i = j;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_' || bytes[j] == b'.')
                {
                    j += 1;
                }
                toks.push(tok(Kind::Ident(src[i..j].to_string()), j));
                i = j;
            }
            _ => {
                let rest = &src[i..];
                match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                    Some(s) => {
                        toks.push(tok(Kind::Sym(s), i + s.len()));
                        i += s.len();
                    }
                    None => {
                        let ch = rest.chars().next().unwrap_or('?');
                        return Err(DslError::Syntax {
                            line,
                            col,
                            expected: "a token".into(),
                            found: format!("`{ch}`"),
                        });
                    }
                }
            }
        }
    }
    let col = i - line_start + 1;
    toks.push(Tok {
        kind: Kind::Eof,
        line,
        col,
        offset: i,
        end: i,
    });
    Ok(toks)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    last_end: usize,
}

const EXPR_KEYWORDS: [&str; 10] = [
    "SEQ", "DUR", "WITHIN", "GAP", "COUNT", "ABSENT", "AND", "OR", "THEN", "EVENT",
];

impl Parser {
    fn new(src: &str) -> Result<Self, DslError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            last_end: 0,
        })
    }

    fn peek_raw(&self) -> &Tok {
        &self.toks[self.pos]
    }

    fn skip_newlines(&mut self) {
        while self.toks[self.pos].kind == Kind::Newline {
            self.pos += 1;
        }
    }

    /// Next significant token, skipping line breaks.
    fn peek(&mut self) -> &Tok {
        self.skip_newlines();
        &self.toks[self.pos]
    }

    fn peek_ident(&mut self) -> Option<&str> {
        match &self.peek().kind {
            Kind::Ident(s) => Some(s.as_str()),
            _ => None,
        }
    }

    fn peek_sym(&mut self, s: &str) -> bool {
        matches!(self.peek().kind, Kind::Sym(x) if x == s)
    }

    fn at_eof(&self) -> bool {
        self.toks[self.pos].kind == Kind::Eof
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].clone();
        if t.kind != Kind::Eof {
            self.pos += 1;
            self.last_end = t.end;
        }
        t
    }

    fn syntax(&mut self, expected: &str) -> DslError {
        let t = self.peek_raw().clone();
        DslError::Syntax {
            line: t.line,
            col: t.col,
            expected: expected.to_string(),
            found: t.describe(),
        }
    }

    fn expect_eof(&mut self) -> Result<(), DslError> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.syntax("end of input"))
        }
    }

    fn sym(&mut self, s: &str) -> Result<(), DslError> {
        if self.peek_sym(s) {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(&format!("`{s}`")))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), DslError> {
        if self.peek_ident() == Some(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<Tok, DslError> {
        match self.peek().kind {
            Kind::Ident(_) => Ok(self.bump()),
            _ => Err(self.syntax(what)),
        }
    }

    fn string(&mut self) -> Result<String, DslError> {
        match &self.peek().kind {
            Kind::Str(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.syntax("quoted title")),
        }
    }

    fn int(&mut self, what: &str, min: u32) -> Result<u32, DslError> {
        match self.peek().kind {
            Kind::Int(n) if n >= min as u64 && n <= u32::MAX as u64 => {
                self.bump();
                Ok(n as u32)
            }
            _ => Err(self.syntax(what)),
        }
    }

    fn ce_id(&mut self) -> Result<ComplexEvent, DslError> {
        let ce = match self.peek_ident() {
            Some(s) => s.parse::<ComplexEvent>().ok().filter(|c| !c.is_default()),
            None => None,
        };
        match ce {
            Some(c) => {
                self.bump();
                Ok(c)
            }
            None => Err(self.syntax("complex event id e1..e10")),
        }
    }

    fn pattern_body(&mut self) -> Result<Pattern, DslError> {
        if self.peek_ident() == Some("machine") {
            Ok(Pattern::Machine(self.machine()?))
        } else {
            Ok(Pattern::Expr(self.expr()?))
        }
    }

    fn event_set(&mut self) -> Result<EventSet, DslError> {
        let set = self.event_set_inner()?;
        Ok(set)
    }

    fn event_set_inner(&mut self) -> Result<EventSet, DslError> {
        if self.peek_sym("!") {
            let t = self.bump();
            let inner = self.event_set_inner()?;
            let set = inner.complement();
            if set.is_empty() {
                return Err(DslError::Syntax {
                    line: t.line,
                    col: t.col,
                    expected: "non-empty event set".into(),
                    found: "a negation of every event".into(),
                });
            }
            return Ok(set);
        }
        if self.peek_sym("*") {
            self.bump();
            return Ok(EventSet::all());
        }
        if self.peek_sym("{") {
            self.bump();
            let mut members = vec![self.ae()?];
            while self.peek_sym(",") {
                self.bump();
                members.push(self.ae()?);
            }
            self.sym("}")?;
            return Ok(EventSet::of(&members));
        }
        Ok(EventSet::single(self.ae()?))
    }

    fn ae(&mut self) -> Result<crate::model::AtomicEvent, DslError> {
        let t = self.ident("atomic event name")?;
        let Kind::Ident(name) = &t.kind else {
            unreachable!()
        };
        parse_ae_token(name).map_err(|_| DslError::UnknownToken {
            line: t.line,
            col: t.col,
            token: name.clone(),
        })
    }

    fn expr(&mut self) -> Result<PatternExpr, DslError> {
        let head = match self.peek_ident() {
            Some(k) if EXPR_KEYWORDS.contains(&k) => k.to_string(),
            _ => return Err(self.syntax(
                "pattern expression (SEQ, DUR, WITHIN, GAP, COUNT, ABSENT, AND, OR, THEN, EVENT)",
            )),
        };
        self.bump();
        self.sym("(")?;
        let e = match head.as_str() {
            "SEQ" => self.seq()?,
            "EVENT" => PatternExpr::Seq(vec![SeqStep {
                events: self.event_set()?,
                skip: None,
            }]),
            "DUR" => self.dur()?,
            "WITHIN" => {
                let inner = self.expr()?;
                self.sym(",")?;
                let windows = self.int("positive integer", 1)?;
                PatternExpr::Within {
                    inner: Box::new(inner),
                    windows,
                }
            }
            "GAP" => {
                let after = self.event_set()?;
                self.sym(",")?;
                let before = self.event_set()?;
                self.sym(",")?;
                self.keyword("min")?;
                self.sym("=")?;
                let min = self.int("non-negative integer", 0)?;
                PatternExpr::Gap { after, before, min }
            }
            "COUNT" => self.count()?,
            "ABSENT" => self.absent()?,
            op => {
                let mut acc = self.expr()?;
                self.sym(",")?;
                loop {
                    let rhs = Box::new(self.expr()?);
                    let lhs = Box::new(acc);
                    acc = match op {
                        "AND" => PatternExpr::And(lhs, rhs),
                        "OR" => PatternExpr::Or(lhs, rhs),
                        _ => PatternExpr::Then(lhs, rhs),
                    };
                    if !self.peek_sym(",") {
                        break;
                    }
                    self.bump();
                }
                acc
            }
        };
        self.sym(")")?;
        Ok(e)
    }

    fn seq(&mut self) -> Result<PatternExpr, DslError> {
        let mut steps = vec![SeqStep {
            events: self.event_set()?,
            skip: None,
        }];
        while self.peek_sym(";") {
            self.bump();
            let events = self.event_set()?;
            let skip = if self.peek_ident() == Some("skip") {
                self.bump();
                Some(self.event_set()?)
            } else {
                None
            };
            steps.push(SeqStep { events, skip });
        }
        if !self.peek_sym(")") {
            return Err(self.syntax("`;` or `)`"));
        }
        Ok(PatternExpr::Seq(steps))
    }

    fn dur(&mut self) -> Result<PatternExpr, DslError> {
        let events = self.event_set()?;
        self.sym(",")?;
        let windows = self.int("positive integer", 1)?;
        self.sym(",")?;
        let mode = match self.peek_ident() {
            Some("consecutive") => DurationMode::Consecutive,
            Some("cumulative") => DurationMode::Cumulative,
            _ => return Err(self.syntax("`consecutive` or `cumulative`")),
        };
        self.bump();
        let mut grace = None;
        if self.peek_sym(",") {
            self.bump();
            self.keyword("grace")?;
            self.sym("=")?;
            grace = Some(self.int("non-negative integer", 0)?);
        }
        Ok(PatternExpr::Dur {
            events,
            windows,
            mode,
            grace,
        })
    }

    fn count(&mut self) -> Result<PatternExpr, DslError> {
        let events = self.event_set()?;
        self.sym(",")?;
        let n = self.int("positive integer", 1)?;
        let (mut exact, mut arm, mut disarm) = (false, None, None);
        while self.peek_sym(",") {
            self.bump();
            match self.peek_ident() {
                Some("exact") if !exact => {
                    self.bump();
                    exact = true;
                }
                Some("arm") if arm.is_none() => {
                    self.bump();
                    self.sym("=")?;
                    arm = Some(self.event_set()?);
                }
                Some("disarm") if disarm.is_none() => {
                    self.bump();
                    self.sym("=")?;
                    disarm = Some(self.event_set()?);
                }
                _ => return Err(self.syntax("`exact`, `arm=` or `disarm=`")),
            }
        }
        Ok(PatternExpr::Count {
            events,
            n,
            exact,
            arm,
            disarm,
        })
    }

    fn absent(&mut self) -> Result<PatternExpr, DslError> {
        let required = self.expr()?;
        self.sym(",")?;
        self.keyword("trigger")?;
        self.sym("=")?;
        let trigger = self.event_set()?;
        self.sym(",")?;
        self.keyword("violation")?;
        self.sym("=")?;
        let violation = self.event_set()?;
        let mut lookback = None;
        if self.peek_sym(",") {
            self.bump();
            self.keyword("lookback")?;
            self.sym("=")?;
            lookback = Some(self.int("non-negative integer", 0)?);
        }
        Ok(PatternExpr::Absent {
            required: Box::new(required),
            trigger,
            violation,
            lookback,
        })
    }

    fn end_of_line(&mut self) -> Result<(), DslError> {
        match self.peek_raw().kind {
            Kind::Newline => {
                self.bump();
                Ok(())
            }
            Kind::Eof => Ok(()),
            _ => Err(self.syntax("end of line")),
        }
    }

    fn names_until_eol(&mut self, what: &str) -> Result<Vec<Tok>, DslError> {
        let mut names = Vec::new();
        while let Kind::Ident(_) = self.peek_raw().kind {
            names.push(self.bump());
        }
        if names.is_empty() {
            return Err(self.syntax(what));
        }
        self.end_of_line()?;
        Ok(names)
    }

    fn machine(&mut self) -> Result<Automaton, DslError> {
        self.keyword("machine")?;
        self.end_of_line()?;
        let mut m = Automaton::default();
        let mut initial: Option<usize> = None;
        loop {
            let kw = match self.peek_ident() {
                Some(k) => k.to_string(),
                None => return Err(self.syntax("machine statement or `end`")),
            };
            let kw_tok = self.bump();
            match kw.as_str() {
                "end" => break,
                "states" => {
                    for t in self.names_until_eol("state name")? {
                        let Kind::Ident(name) = t.kind else {
                            unreachable!()
                        };
                        if m.state_index(&name).is_some() {
                            return Err(DslError::Syntax {
                                line: t.line,
                                col: t.col,
                                expected: "a new state name".into(),
                                found: format!("duplicate `{name}`"),
                            });
                        }
                        m.add_state(name);
                    }
                }
                "initial" => {
                    let t = self.ident("state name")?;
                    initial = Some(self.state_ref(&m, &t)?);
                    self.end_of_line()?;
                }
                "clock" | "counter" => {
                    for t in self.names_until_eol("variable name")? {
                        let Kind::Ident(name) = t.kind else {
                            unreachable!()
                        };
                        if m.clocks.contains(&name) || m.counters.contains(&name) {
                            return Err(DslError::Syntax {
                                line: t.line,
                                col: t.col,
                                expected: "a new variable name".into(),
                                found: format!("duplicate `{name}`"),
                            });
                        }
                        if kw == "clock" {
                            m.clocks.push(name);
                        } else {
                            m.counters.push(name);
                        }
                    }
                }
                "on" => {
                    let from_tok = self.ident("state name")?;
                    let from = self.state_ref(&m, &from_tok)?;
                    let t = self.transition(&m)?;
                    m.push(from, t);
                    self.end_of_line()?;
                }
                _ => {
                    return Err(DslError::Syntax {
                        line: kw_tok.line,
                        col: kw_tok.col,
                        expected: "`states`, `initial`, `clock`, `counter`, `on` or `end`".into(),
                        found: kw_tok.describe(),
                    })
                }
            }
        }
        if m.states.is_empty() {
            return Err(self.syntax_at_last("a `states` line"));
        }
        m.initial = match initial {
            Some(i) => i,
            None => return Err(self.syntax_at_last("an `initial` line")),
        };
        Ok(m)
    }

    fn syntax_at_last(&self, expected: &str) -> DslError {
        let t = &self.toks[self.pos.saturating_sub(1)];
        DslError::Syntax {
            line: t.line,
            col: t.col,
            expected: expected.into(),
            found: "`end`".into(),
        }
    }

    fn state_ref(&self, m: &Automaton, t: &Tok) -> Result<usize, DslError> {
        let Kind::Ident(name) = &t.kind else {
            unreachable!()
        };
        m.state_index(name).ok_or_else(|| DslError::UnboundName {
            line: t.line,
            col: t.col,
            name: name.clone(),
        })
    }

    fn var_ref(&mut self, m: &Automaton) -> Result<(VarRef, Tok), DslError> {
        let t = self.ident("clock or counter name")?;
        let Kind::Ident(name) = &t.kind else {
            unreachable!()
        };
        if let Some(i) = m.clocks.iter().position(|c| c == name) {
            return Ok((VarRef::Clock(i), t));
        }
        if let Some(i) = m.counters.iter().position(|c| c == name) {
            return Ok((VarRef::Counter(i), t));
        }
        Err(DslError::UnboundName {
            line: t.line,
            col: t.col,
            name: name.clone(),
        })
    }

    fn transition(&mut self, m: &Automaton) -> Result<Transition, DslError> {
        let mut guard = Guard::on(self.event_set()?);
        while self.peek_sym("&") {
            self.bump();
            let (var, _) = self.var_ref(m)?;
            let cmp = match self.peek().kind {
                Kind::Sym("<") => Comparator::Lt,
                Kind::Sym("<=") => Comparator::Le,
                Kind::Sym("=") => Comparator::Eq,
                Kind::Sym(">=") => Comparator::Ge,
                Kind::Sym(">") => Comparator::Gt,
                _ => return Err(self.syntax("comparison operator")),
            };
            self.bump();
            let value = self.int("non-negative integer", 0)?;
            guard = match var {
                VarRef::Clock(i) => guard.clock(i, cmp, value),
                VarRef::Counter(i) => guard.counter(i, cmp, value),
            };
        }
        self.sym("->")?;
        let target_tok = self.ident("state name")?;
        let target = self.state_ref(m, &target_tok)?;
        let mut t = Transition::new(guard, target);
        if let Kind::Ident(s) = &self.peek_raw().kind {
            if s == "emit" {
                self.bump();
                t.emit = true;
            }
        }
        if matches!(self.peek_raw().kind, Kind::Sym(":")) {
            self.bump();
            loop {
                t.actions.push(self.action(m)?);
                if !matches!(self.peek_raw().kind, Kind::Sym(",")) {
                    break;
                }
                self.bump();
            }
        }
        Ok(t)
    }

    fn action(&mut self, m: &Automaton) -> Result<Action, DslError> {
        match self.peek_ident() {
            Some(k @ ("reset" | "resume" | "pause")) => {
                let k = k.to_string();
                self.bump();
                let (var, t) = self.var_ref(m)?;
                let VarRef::Clock(clock) = var else {
                    return Err(DslError::Syntax {
                        line: t.line,
                        col: t.col,
                        expected: "clock name".into(),
                        found: t.describe(),
                    });
                };
                Ok(match k.as_str() {
                    "reset" => Action::ResetClock(clock),
                    "resume" => Action::SetClockRunning {
                        clock,
                        running: true,
                    },
                    _ => Action::SetClockRunning {
                        clock,
                        running: false,
                    },
                })
            }
            Some(_) => {
                let (var, t) = self.var_ref(m)?;
                let VarRef::Counter(counter) = var else {
                    return Err(DslError::Syntax {
                        line: t.line,
                        col: t.col,
                        expected: "counter name".into(),
                        found: t.describe(),
                    });
                };
                if self.peek_sym(":=") {
                    self.bump();
                    let value = self.int("non-negative integer", 0)?;
                    Ok(Action::SetCounter { counter, value })
                } else if self.peek_sym("+=") {
                    self.bump();
                    let by = self.int("non-negative integer", 0)?;
                    Ok(Action::IncrementCounter { counter, by })
                } else {
                    Err(self.syntax("`:=` or `+=`"))
                }
            }
            None => Err(self.syntax("action")),
        }
    }
}

enum VarRef {
    Clock(usize),
    Counter(usize),
}
