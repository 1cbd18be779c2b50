//! Character-level acceptor for bounded decimal numerals.
//!
//! Accepted strings are canonical: digits with an optional `.` and 1 to
//! `decimals` fraction digits, no sign, and no leading zero unless the
//! integer part is exactly `0`. A state is live when some continuation
//! reaches an accepting state, so a decoder that only follows live
//! transitions never dead-ends.

use crate::template::{CandidateKind, CandidateSet, NumericRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NumState {
    Start,
    Int { value: u64, leading_zero: bool },
    Frac { int: u64, frac: u64, digits: u32 },
}

#[derive(Debug, Clone)]
pub struct NumericAutomaton {
    range: NumericRange,
}

impl NumericAutomaton {
    /// Panics if `cs` is enumerated.
    pub fn build(cs: &CandidateSet) -> Self {
        match &cs.kind {
            CandidateKind::Integer(r) | CandidateKind::Float(r) => NumericAutomaton { range: *r },
            CandidateKind::Enumerated(_) => panic!("numeric automaton needs a range candidate set"),
        }
    }

    pub fn from_range(range: NumericRange) -> Self {
        NumericAutomaton { range }
    }

    pub fn range(&self) -> &NumericRange {
        &self.range
    }

    pub fn max_decimals(&self) -> u32 {
        self.range.decimals
    }

    pub fn start(&self) -> NumState {
        NumState::Start
    }

    fn scale(&self) -> u64 {
        self.range.scale()
    }

    fn intersects(&self, lo: u128, hi: u128) -> bool {
        lo <= self.range.max_scaled as u128 && hi >= self.range.min_scaled as u128
    }

    pub fn is_accepting(&self, s: NumState) -> bool {
        let (lo, hi) = (self.range.min_scaled as u128, self.range.max_scaled as u128);
        match s {
            NumState::Start => false,
            NumState::Int { value, .. } => {
                let v = value as u128 * self.scale() as u128;
                v >= lo && v <= hi
            }
            NumState::Frac { digits: 0, .. } => false,
            NumState::Frac { int, frac, digits } => {
                let v = self.frac_base(int, frac, digits);
                v >= lo && v <= hi
            }
        }
    }

    fn frac_base(&self, int: u64, frac: u64, digits: u32) -> u128 {
        let pad = 10u128.pow(self.range.decimals - digits);
        int as u128 * self.scale() as u128 + frac as u128 * pad
    }

    pub fn is_live(&self, s: NumState) -> bool {
        let scale = self.scale() as u128;
        let max = self.range.max_scaled as u128;
        match s {
            NumState::Start => self.range.min_scaled <= self.range.max_scaled,
            NumState::Int {
                value,
                leading_zero,
            } => {
                let v = value as u128;
                // The integer itself, or any fraction after it.
                if self.intersects(v * scale, v * scale + scale - 1) {
                    return true;
                }
                if leading_zero {
                    return false;
                }
                let mut mult = 10u128;
                while v * mult * scale <= max {
                    if self.intersects(v * mult * scale, (v + 1) * mult * scale - 1) {
                        return true;
                    }
                    mult *= 10;
                }
                false
            }
            NumState::Frac { int, frac, digits } => {
                let base = self.frac_base(int, frac, digits);
                let width = 10u128.pow(self.range.decimals - digits);
                self.intersects(base, base + width - 1)
            }
        }
    }

    /// Transition on one byte; `None` if the result is dead.
    pub fn feed(&self, s: NumState, b: u8) -> Option<NumState> {
        let next = match (s, b) {
            (NumState::Start, b'0') => NumState::Int {
                value: 0,
                leading_zero: true,
            },
            (NumState::Start, b'1'..=b'9') => NumState::Int {
                value: (b - b'0') as u64,
                leading_zero: false,
            },
            (
                NumState::Int {
                    value,
                    leading_zero: false,
                },
                b'0'..=b'9',
            ) => NumState::Int {
                value: value.checked_mul(10)?.checked_add((b - b'0') as u64)?,
                leading_zero: false,
            },
            (NumState::Int { value, .. }, b'.') if self.range.decimals > 0 => NumState::Frac {
                int: value,
                frac: 0,
                digits: 0,
            },
            (NumState::Frac { int, frac, digits }, b'0'..=b'9') if digits < self.range.decimals => {
                NumState::Frac {
                    int,
                    frac: frac * 10 + (b - b'0') as u64,
                    digits: digits + 1,
                }
            }
            _ => return None,
        };
        self.is_live(next).then_some(next)
    }

    pub fn feed_bytes(&self, mut s: NumState, bytes: &[u8]) -> Option<NumState> {
        for &b in bytes {
            s = self.feed(s, b)?;
        }
        Some(s)
    }

    /// Whether the automaton accepts `text` in full.
    pub fn accepts(&self, text: &str) -> bool {
        self.feed_bytes(self.start(), text.as_bytes())
            .is_some_and(|s| self.is_accepting(s))
    }

    /// Whether any continuation of `s` is possible.
    pub fn can_continue(&self, s: NumState) -> bool {
        (b'0'..=b'9')
            .chain(std::iter::once(b'.'))
            .any(|b| self.feed(s, b).is_some())
    }
}

/// Canonical text for `value` with at most `decimals` fraction digits and
/// trailing zeros removed.
pub fn format_decimal(value: f64, decimals: u32) -> String {
    let s = format!("{:.*}", decimals as usize, value);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn int_range(min: u64, max: u64) -> NumericAutomaton {
        NumericAutomaton::from_range(NumericRange::integer(min, max))
    }

    fn float_range() -> NumericAutomaton {
        NumericAutomaton::from_range(NumericRange {
            min_scaled: 0,
            max_scaled: 20000,
            decimals: 2,
        })
    }

    /// Every string the automaton accepts, by exhaustive traversal.
    fn language(a: &NumericAutomaton) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![(a.start(), String::new())];
        while let Some((s, text)) = stack.pop() {
            if a.is_accepting(s) {
                out.insert(text.clone());
            }
            for b in (b'0'..=b'9').chain(std::iter::once(b'.')) {
                if let Some(n) = a.feed(s, b) {
                    let mut t = text.clone();
                    t.push(b as char);
                    stack.push((n, t));
                }
            }
        }
        out
    }

    #[test]
    fn tiny_integer_range() {
        let lang = language(&int_range(1, 3));
        assert_eq!(
            lang,
            ["1", "2", "3"].iter().map(|s| s.to_string()).collect()
        );
    }

    #[test]
    fn float_examples() {
        let a = float_range();
        assert!(!a.accepts("200.01"));
        assert!(a.accepts("57.9"));
        assert!(a.accepts("0.25"));
        assert!(a.accepts("200"));
        assert!(a.accepts("200.00"));
        assert!(!a.accepts("007"));
        assert!(!a.accepts("4."));
        assert!(!a.accepts(".5"));
        assert!(!a.accepts("1.234"));
        assert!(!a.accepts(""));
    }

    #[test]
    fn formats_canonically() {
        assert_eq!(format_decimal(4.0, 2), "4");
        assert_eq!(format_decimal(4.5, 2), "4.5");
        assert_eq!(format_decimal(0.25, 2), "0.25");
        assert_eq!(format_decimal(12.0, 0), "12");
    }

    /// Oracle: parse the string directly and compare with the bounds.
    fn oracle_accepts(text: &str, min: f64, max: f64, decimals: usize) -> bool {
        let bytes = text.as_bytes();
        if bytes.is_empty() || !bytes.iter().all(|b| b.is_ascii_digit() || *b == b'.') {
            return false;
        }
        let (int, frac) = match text.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (text, None),
        };
        if int.is_empty() || (int.len() > 1 && int.starts_with('0')) {
            return false;
        }
        if let Some(f) = frac {
            if f.is_empty() || f.len() > decimals || f.contains('.') {
                return false;
            }
        }
        let v: f64 = text.parse().unwrap();
        v >= min - 1e-9 && v <= max + 1e-9
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn float_matches_oracle(s in "[0-9.]{1,7}") {
            prop_assert_eq!(float_range().accepts(&s), oracle_accepts(&s, 0.0, 200.0, 2));
        }

        #[test]
        fn float_accepts_in_range_values(scaled in 0u64..=20000) {
            let text = format_decimal(scaled as f64 / 100.0, 2);
            prop_assert!(float_range().accepts(&text));
        }

        #[test]
        fn prefix_feasibility(s in "[0-9.]{0,6}", lo in 0u64..300, span in 0u64..3000, d in 0u32..3) {
            let a = NumericAutomaton::from_range(NumericRange { min_scaled: lo, max_scaled: lo + span, decimals: d });
            if let Some(state) = a.feed_bytes(a.start(), s.as_bytes()) {
                // Walk greedily toward an accepting state.
                let mut cur = state;
                let mut steps = 0;
                while !a.is_accepting(cur) {
                    cur = (b'0'..=b'9').chain(std::iter::once(b'.'))
                        .find_map(|b| a.feed(cur, b))
                        .expect("live state has a live successor");
                    steps += 1;
                    prop_assert!(steps < 40);
                }
            }
        }
    }

    #[test]
    fn integer_language_matches_enumeration() {
        for max in [
            0u64, 1, 9, 10, 11, 99, 100, 101, 999, 1000, 2000, 4999, 5000,
        ] {
            for min in [0u64, 1, 7, 10, 55, 100] {
                if min > max {
                    continue;
                }
                let lang = language(&int_range(min, max));
                let expected: BTreeSet<String> = (min..=max).map(|v| v.to_string()).collect();
                assert_eq!(lang, expected, "range {min}..{max}");
            }
        }
    }
}
