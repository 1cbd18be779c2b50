use std::fmt;
use std::sync::Arc;

use super::{peaked, ProbabilitySource, SourceError, StepContext};
use crate::template::FeatureId;
use crate::token::TokenId;

/// Mass given to the favored token.
pub const FAVORED_MASS: f64 = 0.9;

#[derive(Clone)]
pub enum ContextPredicate {
    Always,
    /// Inside a slot of this feature.
    InFeature(FeatureId),
    /// The context ends with these tokens.
    EndsWith(Vec<TokenId>),
    Custom(Arc<dyn Fn(&StepContext<'_>) -> bool + Send + Sync>),
}

impl fmt::Debug for ContextPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextPredicate::Always => f.write_str("Always"),
            ContextPredicate::InFeature(id) => write!(f, "InFeature({})", id.0),
            ContextPredicate::EndsWith(t) => write!(f, "EndsWith({t:?})"),
            ContextPredicate::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl ContextPredicate {
    pub fn matches(&self, ctx: &StepContext<'_>) -> bool {
        match self {
            ContextPredicate::Always => true,
            ContextPredicate::InFeature(id) => ctx.slot.is_some_and(|s| s.feature == *id),
            ContextPredicate::EndsWith(t) => ctx.tokens.ends_with(t),
            ContextPredicate::Custom(f) => f(ctx),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScriptRule {
    pub predicate: ContextPredicate,
    pub favored: Vec<TokenId>,
}

/// Test double: the first rule whose predicate matches favors the next
/// token of its sequence with mass 0.9; the rest is spread uniformly.
///
/// The next token is found by aligning the longest context suffix that
/// equals a proper prefix of the favored sequence.
#[derive(Debug, Clone)]
pub struct ScriptedSource {
    size: usize,
    rules: Vec<ScriptRule>,
}

impl ScriptedSource {
    /// Panics when `rules` is empty.
    pub fn new(vocab_size: usize, rules: Vec<ScriptRule>) -> Self {
        assert!(!rules.is_empty(), "a script needs at least one rule");
        ScriptedSource {
            size: vocab_size,
            rules,
        }
    }

    fn next_favored(seq: &[TokenId], ctx: &[TokenId]) -> Option<TokenId> {
        if seq.is_empty() {
            return None;
        }
        let max = (seq.len() - 1).min(ctx.len());
        (0..=max)
            .rev()
            .find(|&k| ctx[ctx.len() - k..] == seq[..k])
            .map(|k| seq[k])
    }
}

impl ProbabilitySource for ScriptedSource {
    fn vocab_size(&self) -> usize {
        self.size
    }

    fn next_probs(&self, ctx: &StepContext<'_>) -> Result<Vec<f64>, SourceError> {
        let favored = self
            .rules
            .iter()
            .find(|r| r.predicate.matches(ctx))
            .and_then(|r| Self::next_favored(&r.favored, ctx.tokens));
        Ok(match favored {
            Some(tok) if (tok as usize) < self.size => peaked(self.size, tok, FAVORED_MASS),
            _ => vec![1.0 / self.size as f64; self.size],
        })
    }
}
