//! Template-constrained greedy decoding.
//!
//! Format text is forced one token at a time. Inside a slot the allowed set
//! comes from the feature's acceptor: a candidate trie for enumerated
//! features, a numeral automaton (plus a `null` path) for ranges. A slot
//! closes by emitting the first token of the following format text, which
//! is legal only from an accepting acceptor state. The count slot is
//! decoded first and re-expands the template for that many descriptors.

mod compiled;
mod state;

use std::sync::Arc;

use thiserror::Error;

use crate::lm::{ProbabilitySource, SourceError};
use crate::report::StructuredReport;
use crate::template::{Template, TemplateError};
use crate::token::{Vocab, VocabError};

pub use compiled::CompiledTemplate;
pub use state::{start_session, DecodeState, Phase, StepOutcome, TraceRecord};

pub const DEFAULT_INSTRUCTION: &str = "Convert the lung nodule findings of the following report into the structured JSON template. Use null for any feature the report does not state.";

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("template has no nodule or report features")]
    EmptyTemplate,
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error("probability vector has {got} entries, vocabulary has {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("probability at index {index} is {value}; entries must be finite and non-negative")]
    InvalidProbability { index: usize, value: f64 },
    #[error("decoding already finished")]
    Finished,
    #[error("decoding has not finished")]
    NotFinished,
    #[error("no allowed token at segment {segment}")]
    DeadEnd { segment: usize },
    #[error("decode exceeded its step budget of {0}")]
    BudgetExceeded(usize),
}

/// Compiles `t` over `v` and decodes one report.
pub fn run(
    instruction: &str,
    free_text: &str,
    t: &Template,
    v: &Vocab,
    lm: &dyn ProbabilitySource,
) -> Result<StructuredReport, DecodeError> {
    let compiled = CompiledTemplate::new(t.clone(), v)?;
    run_compiled(&compiled, instruction, free_text, lm)
}

/// Decodes one report with an already compiled template.
pub fn run_compiled(
    compiled: &Arc<CompiledTemplate>,
    instruction: &str,
    free_text: &str,
    lm: &dyn ProbabilitySource,
) -> Result<StructuredReport, DecodeError> {
    let state = decode_session(compiled, instruction, free_text, lm, false)?;
    state.report()
}

/// Runs a full session and returns the finished state, with per-step trace
/// records when `trace` is set.
pub fn decode_session(
    compiled: &Arc<CompiledTemplate>,
    instruction: &str,
    free_text: &str,
    lm: &dyn ProbabilitySource,
    trace: bool,
) -> Result<DecodeState, DecodeError> {
    let expected = compiled.vocab().len();
    if lm.vocab_size() != expected {
        return Err(SourceError::VocabMismatch {
            expected,
            got: lm.vocab_size(),
        }
        .into());
    }
    let mut state = start_session(compiled, instruction, free_text)?;
    if trace {
        state.enable_trace();
    }
    while !state.is_done() {
        let probs = lm.next_probs(&state.step_context())?;
        state.step(&probs)?;
        if state.steps() > state.step_budget() {
            return Err(DecodeError::BudgetExceeded(state.step_budget()));
        }
    }
    Ok(state)
}
