//! Next-token probability sources consumed by the decoder.

mod lexical;
mod mock;
mod remote;
mod scripted;
mod uniform;

use thiserror::Error;

use crate::template::FeatureId;
use crate::token::TokenId;

pub use lexical::LexicalSource;
pub use mock::{MockBehavior, MockServer};
pub use remote::{RemoteConfig, RemoteConfigError, RemoteSource, AUTH_ENV, ENDPOINT_PATH};
pub use scripted::{ContextPredicate, ScriptRule, ScriptedSource};
pub use uniform::UniformSource;

/// Where the decoder is inside a feature slot. Sources that only model
/// token sequences can ignore it.
#[derive(Debug, Clone, Copy)]
pub struct SlotHint<'a> {
    pub feature: FeatureId,
    /// Descriptor index for nodule-level features.
    pub descriptor: Option<usize>,
    /// Tokens already emitted inside this slot.
    pub partial: &'a [TokenId],
    /// The token that would end the slot here, when ending is legal.
    pub close_token: Option<TokenId>,
}

#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    /// Prompt followed by every output token so far.
    pub tokens: &'a [TokenId],
    pub slot: Option<SlotHint<'a>>,
}

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("transport failure talking to {endpoint} after {attempts} attempt(s): {message}")]
    Transport {
        endpoint: String,
        attempts: u32,
        message: String,
    },
    #[error("malformed response from {endpoint}: {message}")]
    Malformed { endpoint: String, message: String },
    #[error("vocabulary size mismatch: expected {expected} probabilities, got {got}")]
    VocabMismatch { expected: usize, got: usize },
}

/// A next-token distribution over the whole vocabulary.
///
/// Implementations return exactly `vocab_size()` non-negative entries that
/// sum to 1 within 1e-6.
pub trait ProbabilitySource: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn next_probs(&self, ctx: &StepContext<'_>) -> Result<Vec<f64>, SourceError>;
}

impl<T: ProbabilitySource + ?Sized> ProbabilitySource for &T {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_probs(&self, ctx: &StepContext<'_>) -> Result<Vec<f64>, SourceError> {
        (**self).next_probs(ctx)
    }
}

impl<T: ProbabilitySource + ?Sized> ProbabilitySource for Box<T> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_probs(&self, ctx: &StepContext<'_>) -> Result<Vec<f64>, SourceError> {
        (**self).next_probs(ctx)
    }
}

impl<T: ProbabilitySource + ?Sized> ProbabilitySource for std::sync::Arc<T> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_probs(&self, ctx: &StepContext<'_>) -> Result<Vec<f64>, SourceError> {
        (**self).next_probs(ctx)
    }
}

/// Scales `weights` in place to sum to 1. An all-zero vector becomes
/// uniform.
pub fn normalize(weights: &mut [f64]) {
    let sum: f64 = weights.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        let inv = 1.0 / sum;
        weights.iter_mut().for_each(|w| *w *= inv);
    } else if !weights.is_empty() {
        let u = 1.0 / weights.len() as f64;
        weights.iter_mut().for_each(|w| *w = u);
    }
}

/// Vector with `favored` at `mass` and the rest spread uniformly.
pub(crate) fn peaked(size: usize, favored: TokenId, mass: f64) -> Vec<f64> {
    if size <= 1 {
        return vec![1.0; size];
    }
    let rest = (1.0 - mass) / (size - 1) as f64;
    let mut v = vec![rest; size];
    v[favored as usize] = mass;
    v
}

#[cfg(test)]
pub(crate) fn assert_distribution(v: &[f64], size: usize) {
    assert_eq!(v.len(), size);
    assert!(v.iter().all(|p| p.is_finite() && *p >= 0.0));
    let sum: f64 = v.iter().sum();
    assert!((sum - 1.0).abs() <= 1e-6, "sum {sum}");
}
