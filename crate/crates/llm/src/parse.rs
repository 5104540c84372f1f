//! Extraction of a label sequence from free-form model output.
//!
//! The text is split into words (runs of letters, digits and `_`, with `.`
//! allowed between two such characters). A word is a label when it is an
//! integer 0..=10, optionally written `e<id>`. Consecutive labels separated
//! only by commas, semicolons or whitespace form a run; anything else ends
//! the run. The longest run wins, the last one on ties.

use ced_core::ComplexEvent;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no label sequence found in response")]
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub labels: Vec<ComplexEvent>,
    pub expected_len: usize,
    /// Number of candidate runs seen, including the chosen one.
    pub runs: usize,
}

impl ParsedResponse {
    pub fn length_matches(&self) -> bool {
        self.labels.len() == self.expected_len
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn label_value(word: &str) -> Option<ComplexEvent> {
    let digits = word
        .strip_prefix('e')
        .or_else(|| word.strip_prefix('E'))
        .unwrap_or(word);
    if digits.is_empty() || digits.len() > 2 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse::<u8>().ok().and_then(ComplexEvent::new)
}

/// Parses `text` into labels without truncating or padding. Runs shorter
/// than `min(2, expected_len)` are not accepted as an answer.
pub fn parse_response(text: &str, expected_len: usize) -> Result<ParsedResponse, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut best: Vec<ComplexEvent> = Vec::new();
    let mut current: Vec<ComplexEvent> = Vec::new();
    let mut runs = 0;
    let mut broken = false;
    let mut finish = |current: &mut Vec<ComplexEvent>, best: &mut Vec<ComplexEvent>| {
        if !current.is_empty() {
            runs += 1;
            if current.len() >= best.len() {
                *best = std::mem::take(current);
            } else {
                current.clear();
            }
        }
    };
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if is_word_char(c) {
            let start = i;
            while i < chars.len()
                && (is_word_char(chars[i])
                    || (chars[i] == '.'
                        && i + 1 < chars.len()
                        && is_word_char(chars[i + 1])
                        && i > start))
            {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            match label_value(&word) {
                Some(l) => {
                    if broken {
                        finish(&mut current, &mut best);
                        broken = false;
                    }
                    current.push(l);
                }
                None => {
                    finish(&mut current, &mut best);
                    broken = false;
                }
            }
            continue;
        }
        if !(c == ',' || c == ';' || c.is_whitespace()) {
            broken = true;
        }
        i += 1;
    }
    finish(&mut current, &mut best);
    let min_len = expected_len.clamp(1, 2);
    if best.len() < min_len {
        return Err(ParseError::Unparseable);
    }
    Ok(ParsedResponse {
        labels: best,
        expected_len,
        runs,
    })
}
