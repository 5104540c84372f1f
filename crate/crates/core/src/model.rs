//! Shared vocabulary: the atomic-event alphabet, complex-event classes,
//! window arithmetic and label sequences.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Duration of one observation window in seconds.
pub const WINDOW_SECONDS: u32 = 5;

/// Number of atomic-event classes.
pub const NUM_ATOMIC: usize = 9;

/// Number of complex-event classes including the default class `e0`.
pub const NUM_COMPLEX: usize = 11;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown atomic event token `{0}`")]
    UnknownToken(String),
    #[error("invalid complex event class `{0}`")]
    InvalidClass(String),
    #[error("trace must contain at least one window")]
    EmptyTrace,
}

/// One of the nine per-window activity tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum AtomicEvent {
    Walk = 0,
    Sit,
    Brush,
    Click,
    Drink,
    Eat,
    Type,
    FlushToilet,
    Wash,
}

impl AtomicEvent {
    pub const ALL: [AtomicEvent; NUM_ATOMIC] = [
        AtomicEvent::Walk,
        AtomicEvent::Sit,
        AtomicEvent::Brush,
        AtomicEvent::Click,
        AtomicEvent::Drink,
        AtomicEvent::Eat,
        AtomicEvent::Type,
        AtomicEvent::FlushToilet,
        AtomicEvent::Wash,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Canonical lowercase spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            AtomicEvent::Walk => "walk",
            AtomicEvent::Sit => "sit",
            AtomicEvent::Brush => "brush",
            AtomicEvent::Click => "click",
            AtomicEvent::Drink => "drink",
            AtomicEvent::Eat => "eat",
            AtomicEvent::Type => "type",
            AtomicEvent::FlushToilet => "flush_toilet",
            AtomicEvent::Wash => "wash",
        }
    }
}

/// Parses an atomic-event token, ignoring ASCII case. `click_mouse` is
/// accepted as an alias of `click`.
pub fn parse_ae_token(text: &str) -> Result<AtomicEvent, ModelError> {
    let lower = text.trim().to_ascii_lowercase();
    let ae = match lower.as_str() {
        "walk" => AtomicEvent::Walk,
        "sit" => AtomicEvent::Sit,
        "brush" => AtomicEvent::Brush,
        "click" | "click_mouse" => AtomicEvent::Click,
        "drink" => AtomicEvent::Drink,
        "eat" => AtomicEvent::Eat,
        "type" => AtomicEvent::Type,
        "flush_toilet" => AtomicEvent::FlushToilet,
        "wash" => AtomicEvent::Wash,
        _ => return Err(ModelError::UnknownToken(text.to_string())),
    };
    Ok(ae)
}

impl fmt::Display for AtomicEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AtomicEvent {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_ae_token(s)
    }
}

impl Serialize for AtomicEvent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for AtomicEvent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_ae_token(&s).map_err(serde::de::Error::custom)
    }
}

/// A complex-event class id. `e0` is the default (no event) class and is
/// never a member of a label set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComplexEvent(u8);

impl ComplexEvent {
    pub const DEFAULT: ComplexEvent = ComplexEvent(0);

    pub fn new(id: u8) -> Option<Self> {
        ((id as usize) < NUM_COMPLEX).then_some(ComplexEvent(id))
    }

    /// Like [`ComplexEvent::new`] for ids known to be in range.
    ///
    /// Panics on ids above 10.
    pub const fn of(id: u8) -> Self {
        assert!((id as usize) < NUM_COMPLEX, "complex event id out of range");
        ComplexEvent(id)
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn is_default(self) -> bool {
        self.0 == 0
    }

    /// `e1..=e10` in ascending order.
    pub fn positive() -> impl DoubleEndedIterator<Item = ComplexEvent> + Clone {
        (1..NUM_COMPLEX as u8).map(ComplexEvent)
    }
}

impl fmt::Display for ComplexEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl FromStr for ComplexEvent {
    type Err = ModelError;

    /// Accepts `e6`, `E6` or a bare `6`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let digits = t.strip_prefix(['e', 'E']).unwrap_or(t);
        digits
            .parse::<u8>()
            .ok()
            .and_then(ComplexEvent::new)
            .ok_or_else(|| ModelError::InvalidClass(s.to_string()))
    }
}

impl Serialize for ComplexEvent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for ComplexEvent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let id = u8::deserialize(d)?;
        ComplexEvent::new(id).ok_or_else(|| {
            serde::de::Error::custom(format!("complex event id {id} out of range 0..=10"))
        })
    }
}

/// Converts a duration in seconds to a window count, rounding up.
pub fn seconds_to_windows(seconds: u32) -> u32 {
    seconds.div_ceil(WINDOW_SECONDS)
}

/// 1-based window position within a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct WindowIndex(pub u32);

impl WindowIndex {
    /// Wall-clock span `[start, end)` in seconds.
    pub fn span_seconds(self) -> (u32, u32) {
        let t = self.0.max(1);
        ((t - 1) * WINDOW_SECONDS, t * WINDOW_SECONDS)
    }
}

/// A non-empty sequence of atomic events, one per window.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AeTrace(Vec<AtomicEvent>);

impl AeTrace {
    pub fn new(events: Vec<AtomicEvent>) -> Result<Self, ModelError> {
        if events.is_empty() {
            return Err(ModelError::EmptyTrace);
        }
        Ok(AeTrace(events))
    }

    /// Parses whitespace- or comma-separated tokens.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let events = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(parse_ae_token)
            .collect::<Result<Vec<_>, _>>()?;
        AeTrace::new(events)
    }

    pub fn events(&self) -> &[AtomicEvent] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_inner(self) -> Vec<AtomicEvent> {
        self.0
    }

    /// Tokens joined by `", "`.
    pub fn render(&self) -> String {
        self.0
            .iter()
            .map(|a| a.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl AsRef<[AtomicEvent]> for AeTrace {
    fn as_ref(&self) -> &[AtomicEvent] {
        &self.0
    }
}

/// Set of positive complex-event classes emitted at one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct CeSet(u16);

impl CeSet {
    pub const EMPTY: CeSet = CeSet(0);

    pub fn singleton(ce: ComplexEvent) -> Self {
        let mut s = CeSet::EMPTY;
        s.insert(ce);
        s
    }

    /// Inserting `e0` is a no-op.
    pub fn insert(&mut self, ce: ComplexEvent) {
        if !ce.is_default() {
            self.0 |= 1 << ce.0;
        }
    }

    pub fn contains(self, ce: ComplexEvent) -> bool {
        !ce.is_default() && self.0 & (1 << ce.0) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Members in ascending id order.
    pub fn iter(self) -> impl Iterator<Item = ComplexEvent> {
        ComplexEvent::positive().filter(move |c| self.contains(*c))
    }

    pub fn intersect(self, other: CeSet) -> CeSet {
        CeSet(self.0 & other.0)
    }
}

impl FromIterator<ComplexEvent> for CeSet {
    fn from_iter<I: IntoIterator<Item = ComplexEvent>>(iter: I) -> Self {
        let mut s = CeSet::EMPTY;
        for c in iter {
            s.insert(c);
        }
        s
    }
}

impl fmt::Display for CeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|c| c.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Per-window complex-event label sets for one trace.
pub type LabelSeq = Vec<CeSet>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_tokens() {
        assert_eq!(parse_ae_token("wash").unwrap(), AtomicEvent::Wash);
        assert_eq!(
            parse_ae_token("Flush_Toilet").unwrap(),
            AtomicEvent::FlushToilet
        );
        assert_eq!(parse_ae_token("click_mouse").unwrap(), AtomicEvent::Click);
        assert_eq!(
            parse_ae_token("jump"),
            Err(ModelError::UnknownToken("jump".into()))
        );
    }

    #[test]
    fn canonical_print_round_trips() {
        for ae in AtomicEvent::ALL {
            assert_eq!(parse_ae_token(&ae.to_string()).unwrap(), ae);
            assert_eq!(AtomicEvent::from_index(ae.index()), Some(ae));
        }
        assert_eq!(AtomicEvent::ALL.len(), 9);
    }

    #[test]
    fn window_conversion() {
        assert_eq!(seconds_to_windows(20), 4);
        assert_eq!(seconds_to_windows(0), 0);
        assert_eq!(seconds_to_windows(120), 24);
        assert_eq!(seconds_to_windows(180), 36);
        assert_eq!(seconds_to_windows(7), 2);
        for k in 0..500 {
            assert_eq!(seconds_to_windows(5 * k), k);
        }
    }

    #[test]
    fn window_span() {
        assert_eq!(WindowIndex(1).span_seconds(), (0, 5));
        assert_eq!(WindowIndex(12).span_seconds(), (55, 60));
    }

    #[test]
    fn ce_parse_and_sets() {
        assert_eq!("e6".parse::<ComplexEvent>().unwrap(), ComplexEvent::of(6));
        assert_eq!("10".parse::<ComplexEvent>().unwrap(), ComplexEvent::of(10));
        assert!("e11".parse::<ComplexEvent>().is_err());
        let mut s = CeSet::EMPTY;
        s.insert(ComplexEvent::DEFAULT);
        assert!(s.is_empty());
        s.insert(ComplexEvent::of(6));
        s.insert(ComplexEvent::of(1));
        assert_eq!(s.iter().map(|c| c.id()).collect::<Vec<_>>(), vec![1, 6]);
        assert_eq!(s.to_string(), "{e1, e6}");
    }

    #[test]
    fn empty_trace_rejected() {
        assert_eq!(AeTrace::new(vec![]), Err(ModelError::EmptyTrace));
        let t = AeTrace::parse("walk, Sit  wash").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.render(), "walk, sit, wash");
    }
}
