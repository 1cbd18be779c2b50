use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::DecodeError;
use crate::template::{instantiate, CandidateKind, ExpandedTemplate, FeatureId, Segment, Template};
use crate::token::{CandidateTrie, NumericAutomaton, TokenId, TokenKind, Vocab};

pub(crate) enum Acceptor {
    Trie(CandidateTrie),
    Numeric {
        automaton: NumericAutomaton,
        /// Path for the literal `null` when the feature is nullable.
        null: Option<CandidateTrie>,
    },
}

impl Acceptor {
    /// Upper bound on tokens emitted inside one slot.
    fn max_tokens(&self) -> usize {
        let depth = |t: &CandidateTrie| t.paths().iter().map(|p| p.0.len()).max().unwrap_or(0);
        match self {
            Acceptor::Trie(t) => depth(t),
            Acceptor::Numeric { automaton, null } => {
                let r = automaton.range();
                let int_digits = (r.max_scaled / r.scale()).to_string().len();
                let frac = if r.decimals > 0 {
                    1 + r.decimals as usize
                } else {
                    0
                };
                (int_digits + frac).max(null.as_ref().map_or(0, depth))
            }
        }
    }
}

/// A template expanded for one descriptor count, with its format text
/// pre-tokenized.
pub(crate) struct Expansion {
    pub template: ExpandedTemplate,
    /// Tokens of each format segment; empty for slot segments.
    pub format_tokens: Vec<Arc<[TokenId]>>,
    /// Upper bound on output tokens for a full decode of this expansion.
    pub budget: usize,
}

#[derive(Default)]
struct Cache {
    expansions: HashMap<usize, Arc<Expansion>>,
    formats: HashMap<String, Arc<[TokenId]>>,
}

/// Template, vocabulary, and per-feature acceptors, built once and shared
/// read-only by any number of decode sessions.
pub struct CompiledTemplate {
    template: Template,
    vocab: Arc<Vocab>,
    acceptors: Vec<Acceptor>,
    slot_budget: Vec<usize>,
    numeric_tokens: Vec<TokenId>,
    cache: Mutex<Cache>,
}

impl std::fmt::Debug for CompiledTemplate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompiledTemplate")
            .field("template", &self.template.name)
            .field("vocab_size", &self.vocab.len())
            .finish()
    }
}

impl CompiledTemplate {
    /// Registers the template's special tokens in a copy of `vocab` and
    /// builds every acceptor.
    pub fn new(template: Template, vocab: &Vocab) -> Result<Arc<Self>, DecodeError> {
        if template.nodule_features.is_empty() && template.report_features.is_empty() {
            return Err(DecodeError::EmptyTemplate);
        }
        let vocab = Arc::new(vocab.register_special_tokens(&template)?);
        let acceptors: Vec<Acceptor> = template
            .features()
            .map(|(_, f)| match &f.candidates.kind {
                CandidateKind::Enumerated(_) => {
                    Acceptor::Trie(CandidateTrie::build(&f.candidates, &vocab))
                }
                CandidateKind::Integer(_) | CandidateKind::Float(_) => Acceptor::Numeric {
                    automaton: NumericAutomaton::build(&f.candidates),
                    null: f
                        .candidates
                        .nullable
                        .then(|| CandidateTrie::null_only(&vocab)),
                },
            })
            .collect();
        let slot_budget = acceptors.iter().map(Acceptor::max_tokens).collect();
        let numeric_tokens = (0..vocab.len() as TokenId)
            .filter(|&id| {
                let b = vocab.token_bytes(id);
                vocab.kind(id) != TokenKind::Special
                    && !b.is_empty()
                    && b.iter().all(|c| c.is_ascii_digit() || *c == b'.')
            })
            .collect();
        Ok(Arc::new(CompiledTemplate {
            template,
            vocab,
            acceptors,
            slot_budget,
            numeric_tokens,
            cache: Mutex::new(Cache::default()),
        }))
    }

    pub fn template(&self) -> &Template {
        &self.template
    }

    /// The vocabulary with special tokens registered. Probability sources
    /// must be built over this vocabulary.
    pub fn vocab(&self) -> &Arc<Vocab> {
        &self.vocab
    }

    pub(crate) fn acceptor(&self, f: FeatureId) -> &Acceptor {
        &self.acceptors[f.0]
    }

    /// Tokens made only of digits and `.`.
    pub(crate) fn numeric_tokens(&self) -> &[TokenId] {
        &self.numeric_tokens
    }

    /// Template text shown to the model: one descriptor block with special
    /// placeholder tokens in the slots.
    pub fn preamble(&self) -> String {
        let n = (self.template.max_count() as usize).min(1);
        instantiate(&self.template, n)
            .expect("count within range")
            .render_with_placeholders(&self.template)
    }

    /// Full prompt text: instruction, free text, and preamble on separate
    /// lines.
    pub fn prompt_text(&self, instruction: &str, free_text: &str) -> String {
        format!("{instruction}\n{free_text}\n{}\n", self.preamble())
    }

    pub(crate) fn expansion(&self, n: usize) -> Result<Arc<Expansion>, DecodeError> {
        let mut cache = self.cache.lock().expect("cache lock");
        if let Some(e) = cache.expansions.get(&n) {
            return Ok(e.clone());
        }
        let template = instantiate(&self.template, n)?;
        let mut budget = 0;
        let mut format_tokens = Vec::with_capacity(template.segments.len());
        for seg in &template.segments {
            match seg {
                Segment::Format(text) => {
                    let toks = cache
                        .formats
                        .entry(text.clone())
                        .or_insert_with(|| self.vocab.encode(text).into())
                        .clone();
                    budget += toks.len();
                    format_tokens.push(toks);
                }
                Segment::Slot { feature, .. } => {
                    budget += self.slot_budget[feature.0];
                    format_tokens.push(Arc::from(Vec::new()));
                }
            }
        }
        let e = Arc::new(Expansion {
            template,
            format_tokens,
            budget,
        });
        cache.expansions.insert(n, e.clone());
        Ok(e)
    }
}
