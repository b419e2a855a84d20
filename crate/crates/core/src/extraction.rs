//! Mileage extraction from free-text completions.
//!
//! Selection order: the first range with a trailing unit (midpoint), else
//! the first number followed by a distance unit, else the first bare number.
//! Kilometres are converted with [`MILES_PER_KM`].

use serde::{Deserialize, Serialize};

pub const MILES_PER_KM: f64 = 0.621371;

/// How far past a number a unit word may appear.
const UNIT_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionRule {
    UnitBearing,
    BareNumber,
    RangeMidpoint,
    None,
}

impl ExtractionRule {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractionRule::UnitBearing => "unit-bearing",
            ExtractionRule::BareNumber => "bare-number",
            ExtractionRule::RangeMidpoint => "range-midpoint",
            ExtractionRule::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub miles: Option<f64>,
    /// Character offsets `[start, end)` of the text the value came from.
    pub source_span: Option<(usize, usize)>,
    pub rule: ExtractionRule,
}

impl ExtractionResult {
    fn none() -> Self {
        Self {
            miles: None,
            source_span: None,
            rule: ExtractionRule::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Unit {
    Miles,
    Kilometres,
}

impl Unit {
    fn parse(word: &str) -> Option<Unit> {
        match word.to_ascii_lowercase().as_str() {
            "mi" | "mile" | "miles" => Some(Unit::Miles),
            "km" | "kms" | "kilometer" | "kilometers" | "kilometre" | "kilometres" => {
                Some(Unit::Kilometres)
            }
            _ => None,
        }
    }

    fn to_miles(self, v: f64) -> f64 {
        match self {
            Unit::Miles => v,
            Unit::Kilometres => v * MILES_PER_KM,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Number(f64),
    Word(String),
    Dash,
    Other,
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    // char offsets
    start: usize,
    end: usize,
}

fn is_dash(c: char) -> bool {
    matches!(c, '-' | '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}' | '~')
}

/// Scans digits with optional `,ddd` groups and an optional `.d+` fraction.
/// Returns the number of chars consumed and the value.
fn scan_number(chars: &[char], start: usize) -> (usize, f64) {
    let mut i = start;
    let mut digits = String::new();
    while i < chars.len() && chars[i].is_ascii_digit() {
        digits.push(chars[i]);
        i += 1;
    }
    // thousands groups only when the leading run is 1..=3 digits
    if digits.len() <= 3 {
        let digit_at = |j: usize| chars.get(j).is_some_and(|c| c.is_ascii_digit());
        while chars.get(i) == Some(&',')
            && (1..=3).all(|d| digit_at(i + d))
            && !digit_at(i + 4)
        {
            digits.extend(&chars[i + 1..i + 4]);
            i += 4;
        }
    }
    if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
        digits.push('.');
        i += 1;
        while i < chars.len() && chars[i].is_ascii_digit() {
            digits.push(chars[i]);
            i += 1;
        }
    }
    // digits is non-empty and well formed here
    (i - start, digits.parse().unwrap_or(0.0))
}

fn tokenize(chars: &[char]) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let (len, value) = scan_number(chars, i);
            tokens.push(Token {
                kind: Kind::Number(value),
                start: i,
                end: i + len,
            });
            i += len;
        } else if c.is_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_alphabetic() {
                i += 1;
            }
            tokens.push(Token {
                kind: Kind::Word(chars[start..i].iter().collect()),
                start,
                end: i,
            });
        } else {
            tokens.push(Token {
                kind: if is_dash(c) { Kind::Dash } else { Kind::Other },
                start: i,
                end: i + 1,
            });
            i += 1;
        }
    }
    tokens
}

/// Unit attached to the number at `idx`: the first unit word within
/// [`UNIT_WINDOW`] tokens, stopping early at another number.
fn unit_after(tokens: &[Token], idx: usize) -> Option<(Unit, usize)> {
    for (j, t) in tokens.iter().enumerate().skip(idx + 1).take(UNIT_WINDOW) {
        match &t.kind {
            Kind::Number(_) => return None,
            Kind::Word(w) => {
                if let Some(u) = Unit::parse(w) {
                    return Some((u, j));
                }
            }
            _ => {}
        }
    }
    None
}

fn word_is(t: &Token, expected: &str) -> bool {
    matches!(&t.kind, Kind::Word(w) if w.eq_ignore_ascii_case(expected))
}

fn number(t: &Token) -> Option<f64> {
    match t.kind {
        Kind::Number(v) if v > 0.0 => Some(v),
        _ => None,
    }
}

/// Tries to read `A [unit] (to|-|and) B unit` starting at token `a`.
/// `and` is accepted only after `between`.
fn range_at(tokens: &[Token], a: usize) -> Option<(f64, usize, usize)> {
    let lo = number(&tokens[a])?;
    let mut i = a + 1;
    let lo_unit = match tokens.get(i).and_then(|t| match &t.kind {
        Kind::Word(w) => Unit::parse(w),
        _ => None,
    }) {
        Some(u) => {
            i += 1;
            Some(u)
        }
        None => None,
    };
    let sep = tokens.get(i)?;
    let after_between = a > 0 && word_is(&tokens[a - 1], "between");
    let ok = match &sep.kind {
        Kind::Dash => true,
        Kind::Word(w) if w.eq_ignore_ascii_case("to") => true,
        Kind::Word(w) if w.eq_ignore_ascii_case("and") => after_between,
        _ => false,
    };
    if !ok {
        return None;
    }
    let b = i + 1;
    let hi = number(tokens.get(b)?)?;
    let (hi_unit, unit_idx) = unit_after(tokens, b)?;
    if lo_unit.is_some_and(|u| u != hi_unit) {
        return None;
    }
    let mid = (hi_unit.to_miles(lo) + hi_unit.to_miles(hi)) / 2.0;
    let start = if after_between { tokens[a - 1].start } else { tokens[a].start };
    Some((mid, start, tokens[unit_idx].end))
}

/// Extracts one mileage estimate. Total over arbitrary input.
pub fn extract_miles(text: &str) -> ExtractionResult {
    let chars: Vec<char> = text.chars().collect();
    let tokens = tokenize(&chars);

    for a in 0..tokens.len() {
        if let Some((mid, start, end)) = range_at(&tokens, a) {
            return ExtractionResult {
                miles: Some(mid),
                source_span: Some((start, end)),
                rule: ExtractionRule::RangeMidpoint,
            };
        }
    }
    for (i, t) in tokens.iter().enumerate() {
        if let (Some(v), Some((unit, u))) = (number(t), unit_after(&tokens, i)) {
            return ExtractionResult {
                miles: Some(unit.to_miles(v)),
                source_span: Some((t.start, tokens[u].end)),
                rule: ExtractionRule::UnitBearing,
            };
        }
    }
    for t in &tokens {
        if let Some(v) = number(t) {
            return ExtractionResult {
                miles: Some(v),
                source_span: Some((t.start, t.end)),
                rule: ExtractionRule::BareNumber,
            };
        }
    }
    ExtractionResult::none()
}
