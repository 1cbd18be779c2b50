use std::sync::Arc;

use indexmap::IndexMap;
use serde::Serialize;

use super::compiled::{Acceptor, CompiledTemplate, Expansion};
use super::DecodeError;
use crate::lm::{SlotHint, StepContext};
use crate::report::{FeatureValue, NoduleDescriptor, StructuredReport};
use crate::template::{FeatureId, Segment};
use crate::token::{CandidateTrie, NodeId, NumState, TokenId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Count,
    Descriptors,
    ReportFeatures,
    Done,
}

/// Position inside the current segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Frontier {
    Format,
    Trie(NodeId),
    Num(NumState),
    /// Inside the `null` path of a numeric slot.
    NumNull(NodeId),
    Done,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub chosen_token: TokenId,
    pub allowed_set_size: usize,
    /// Feature name and decoded value text (`null` for the null candidate)
    /// when this step closed a slot.
    pub slot_completed: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceRecord {
    pub step: usize,
    pub segment: usize,
    pub allowed: usize,
    pub chosen: TokenId,
}

/// One in-flight decode. Sequential by nature; `Send`, so a session may
/// move between worker threads between steps.
pub struct DecodeState {
    compiled: Arc<CompiledTemplate>,
    expansion: Arc<Expansion>,
    context: Vec<TokenId>,
    prompt_len: usize,
    cursor: usize,
    offset: usize,
    frontier: Frontier,
    slot_start: usize,
    phase: Phase,
    count: Option<Option<u32>>,
    nodules: Vec<NoduleDescriptor>,
    report_features: IndexMap<String, FeatureValue>,
    allowed: Vec<TokenId>,
    steps: usize,
    trace: Option<Vec<TraceRecord>>,
}

/// Starts a session whose context is the tokenized prompt.
pub fn start_session(
    compiled: &Arc<CompiledTemplate>,
    instruction: &str,
    free_text: &str,
) -> Result<DecodeState, DecodeError> {
    let context = compiled
        .vocab()
        .encode(&compiled.prompt_text(instruction, free_text));
    let expansion = compiled.expansion(0)?;
    let prompt_len = context.len();
    let mut s = DecodeState {
        compiled: compiled.clone(),
        expansion,
        context,
        prompt_len,
        cursor: 0,
        offset: 0,
        frontier: Frontier::Format,
        slot_start: prompt_len,
        phase: Phase::Count,
        count: None,
        nodules: Vec::new(),
        report_features: IndexMap::new(),
        allowed: Vec::new(),
        steps: 0,
        trace: None,
    };
    s.enter_segment();
    Ok(s)
}

impl DecodeState {
    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    pub fn context(&self) -> &[TokenId] {
        &self.context
    }

    pub fn prompt_len(&self) -> usize {
        self.prompt_len
    }

    pub fn output_tokens(&self) -> &[TokenId] {
        &self.context[self.prompt_len..]
    }

    /// Raw output text as emitted token by token. Enumerated values appear
    /// quoted, so a null candidate reads `"null"` here; the structured
    /// report uses the JSON literal instead.
    pub fn output_text(&self) -> String {
        self.compiled.vocab().decode(self.output_tokens())
    }

    pub fn segment_cursor(&self) -> usize {
        self.cursor
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Upper bound on output tokens for the current expansion.
    pub fn step_budget(&self) -> usize {
        self.expansion.budget
    }

    pub fn descriptor_count(&self) -> Option<usize> {
        self.count.map(|c| c.unwrap_or(0) as usize)
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[TraceRecord] {
        self.trace.as_deref().unwrap_or(&[])
    }

    /// Trace records as JSON lines.
    pub fn trace_jsonl(&self) -> String {
        let mut out = String::new();
        for r in self.trace() {
            out.push_str(&serde_json::to_string(r).expect("trace serializes"));
            out.push('\n');
        }
        out
    }

    fn current_slot(&self) -> Option<(FeatureId, Option<usize>)> {
        match self.expansion.template.segments.get(self.cursor) {
            Some(Segment::Slot {
                feature,
                descriptor,
            }) => Some((*feature, *descriptor)),
            _ => None,
        }
    }

    fn numeric_parts(
        &self,
        f: FeatureId,
    ) -> (&crate::token::NumericAutomaton, Option<&CandidateTrie>) {
        match self.compiled.acceptor(f) {
            Acceptor::Numeric { automaton, null } => (automaton, null.as_ref()),
            Acceptor::Trie(_) => unreachable!("numeric frontier on an enumerated slot"),
        }
    }

    fn trie(&self, f: FeatureId) -> &CandidateTrie {
        match self.compiled.acceptor(f) {
            Acceptor::Trie(t) => t,
            Acceptor::Numeric { null, .. } => null.as_ref().expect("null path exists"),
        }
    }

    /// Value of the count slot if it closed now.
    fn pending_count(&self) -> usize {
        match self.frontier {
            Frontier::Num(NumState::Int { value, .. }) => value as usize,
            _ => 0,
        }
    }

    /// The token that ends the current slot, when the acceptor is in an
    /// accepting state.
    pub fn close_token(&self) -> Option<TokenId> {
        let (feature, _) = self.current_slot()?;
        let accepting = match self.frontier {
            Frontier::Trie(n) | Frontier::NumNull(n) => self.trie(feature).is_terminal(n),
            Frontier::Num(s) => self.numeric_parts(feature).0.is_accepting(s),
            Frontier::Format | Frontier::Done => false,
        };
        if !accepting {
            return None;
        }
        if feature == self.compiled.template().count_id() {
            let e = self.compiled.expansion(self.pending_count()).ok()?;
            return e.format_tokens[self.cursor + 1].first().copied();
        }
        self.expansion.format_tokens[self.cursor + 1]
            .first()
            .copied()
    }

    fn collect_allowed(&self, close: Option<TokenId>, out: &mut Vec<TokenId>) {
        out.clear();
        match self.frontier {
            Frontier::Format => {
                out.push(self.expansion.format_tokens[self.cursor][self.offset]);
            }
            Frontier::Trie(n) | Frontier::NumNull(n) => {
                let (feature, _) = self.current_slot().expect("slot frontier");
                out.extend(self.trie(feature).allowed(n));
            }
            Frontier::Num(s) => {
                let (feature, _) = self.current_slot().expect("slot frontier");
                let (automaton, null) = self.numeric_parts(feature);
                let vocab = self.compiled.vocab();
                for &tok in self.compiled.numeric_tokens() {
                    if automaton.feed_bytes(s, vocab.token_bytes(tok)).is_some() {
                        out.push(tok);
                    }
                }
                if s == NumState::Start {
                    if let Some(t) = null {
                        out.extend(t.allowed(CandidateTrie::ROOT));
                    }
                }
            }
            Frontier::Done => {}
        }
        if let Some(c) = close {
            out.push(c);
        }
    }

    /// The set of tokens the next step may choose, in ascending id order.
    pub fn allowed_tokens(&self) -> Vec<TokenId> {
        let mut out = Vec::new();
        self.collect_allowed(self.close_token(), &mut out);
        out.sort_unstable();
        out
    }

    /// Context handed to the probability source for the next step.
    pub fn step_context(&self) -> StepContext<'_> {
        let slot = self.current_slot().map(|(feature, descriptor)| SlotHint {
            feature,
            descriptor,
            partial: &self.context[self.slot_start..],
            close_token: self.close_token(),
        });
        StepContext {
            tokens: &self.context,
            slot,
        }
    }

    /// Chooses the most probable allowed token (ties: the slot-closing
    /// token, then the lowest id) and advances.
    pub fn step(&mut self, probs: &[f64]) -> Result<StepOutcome, DecodeError> {
        if self.phase == Phase::Done {
            return Err(DecodeError::Finished);
        }
        let vocab_len = self.compiled.vocab().len();
        if probs.len() != vocab_len {
            return Err(DecodeError::WrongLength {
                expected: vocab_len,
                got: probs.len(),
            });
        }
        // Branch-free pass first; NaN fails both comparisons.
        #[allow(clippy::manual_range_contains)]
        let valid = probs
            .iter()
            .fold(true, |ok, &p| ok & (p >= 0.0) & (p <= f64::MAX));
        if !valid {
            let (index, &value) = probs
                .iter()
                .enumerate()
                .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
                .expect("an invalid entry exists");
            return Err(DecodeError::InvalidProbability { index, value });
        }
        let close = self.close_token();
        let mut allowed = std::mem::take(&mut self.allowed);
        self.collect_allowed(close, &mut allowed);
        self.allowed = allowed;
        let mut best: Option<TokenId> = None;
        let mut best_p = f64::NEG_INFINITY;
        for &tok in &self.allowed {
            let p = probs[tok as usize];
            let better = match best {
                None => true,
                Some(b) => {
                    p > best_p
                        || (p == best_p && Some(b) != close && (Some(tok) == close || tok < b))
                }
            };
            if better {
                best = Some(tok);
                best_p = p;
            }
        }
        let chosen = best.ok_or(DecodeError::DeadEnd {
            segment: self.cursor,
        })?;
        let allowed_set_size = self.allowed.len();
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceRecord {
                step: self.steps,
                segment: self.cursor,
                allowed: allowed_set_size,
                chosen,
            });
        }
        let slot_completed = self.apply(chosen, close)?;
        Ok(StepOutcome {
            chosen_token: chosen,
            allowed_set_size,
            slot_completed,
        })
    }

    fn apply(
        &mut self,
        tok: TokenId,
        close: Option<TokenId>,
    ) -> Result<Option<(String, String)>, DecodeError> {
        self.steps += 1;
        let frontier = self.frontier;
        if frontier == Frontier::Format {
            self.context.push(tok);
            self.offset += 1;
            if self.offset == self.expansion.format_tokens[self.cursor].len() {
                self.cursor += 1;
                self.enter_segment();
            }
            return Ok(None);
        }
        let (feature, descriptor) = self.current_slot().expect("slot frontier");
        if Some(tok) == close {
            let value = self.slot_value(feature);
            let text = match &value {
                FeatureValue::Null => "null".to_string(),
                FeatureValue::Text(s) => s.clone(),
                FeatureValue::Number(_) => self
                    .compiled
                    .vocab()
                    .decode(&self.context[self.slot_start..]),
            };
            self.context.push(tok);
            let name = self.compiled.template().feature(feature).name.clone();
            self.record(feature, descriptor, value)?;
            self.cursor += 1;
            self.offset = 1;
            self.frontier = Frontier::Format;
            if self.offset == self.expansion.format_tokens[self.cursor].len() {
                self.cursor += 1;
                self.enter_segment();
            }
            return Ok(Some((name, text)));
        }
        self.context.push(tok);
        self.frontier = match frontier {
            Frontier::Trie(n) => Frontier::Trie(self.trie(feature).next(n, tok).ok_or(
                DecodeError::DeadEnd {
                    segment: self.cursor,
                },
            )?),
            Frontier::NumNull(n) => Frontier::NumNull(self.trie(feature).next(n, tok).ok_or(
                DecodeError::DeadEnd {
                    segment: self.cursor,
                },
            )?),
            Frontier::Num(s) => {
                let (automaton, null) = self.numeric_parts(feature);
                let bytes = self.compiled.vocab().token_bytes(tok);
                match automaton.feed_bytes(s, bytes) {
                    Some(next) => Frontier::Num(next),
                    None => {
                        let node = null.and_then(|t| t.next(CandidateTrie::ROOT, tok)).ok_or(
                            DecodeError::DeadEnd {
                                segment: self.cursor,
                            },
                        )?;
                        Frontier::NumNull(node)
                    }
                }
            }
            Frontier::Format | Frontier::Done => unreachable!(),
        };
        Ok(None)
    }

    fn slot_value(&self, feature: FeatureId) -> FeatureValue {
        match self.frontier {
            Frontier::Trie(n) => match self.trie(feature).value(n) {
                Some(Some(s)) => FeatureValue::Text(s.to_string()),
                _ => FeatureValue::Null,
            },
            Frontier::Num(_) => {
                let text = self
                    .compiled
                    .vocab()
                    .decode(&self.context[self.slot_start..]);
                FeatureValue::Number(text.parse().expect("accepted numeral parses"))
            }
            _ => FeatureValue::Null,
        }
    }

    fn record(
        &mut self,
        feature: FeatureId,
        descriptor: Option<usize>,
        value: FeatureValue,
    ) -> Result<(), DecodeError> {
        let t = self.compiled.template();
        if feature == t.count_id() {
            let n = value.as_number().map(|v| v as u32);
            self.count = Some(n);
            let n = n.unwrap_or(0) as usize;
            self.expansion = self.compiled.expansion(n)?;
            self.nodules = vec![NoduleDescriptor::default(); n];
            self.phase = if n > 0 {
                Phase::Descriptors
            } else {
                Phase::ReportFeatures
            };
            return Ok(());
        }
        let name = t.feature(feature).name.clone();
        match descriptor {
            Some(d) => self.nodules[d].set(&name, value),
            None => {
                self.report_features.insert(name, value);
            }
        }
        Ok(())
    }

    /// Moves onto the segment at `cursor`, skipping empty format text.
    fn enter_segment(&mut self) {
        loop {
            match self.expansion.template.segments.get(self.cursor) {
                None => {
                    self.frontier = Frontier::Done;
                    self.phase = Phase::Done;
                    return;
                }
                Some(Segment::Format(_)) => {
                    self.offset = 0;
                    if self.expansion.format_tokens[self.cursor].is_empty() {
                        self.cursor += 1;
                        continue;
                    }
                    self.frontier = Frontier::Format;
                    return;
                }
                Some(Segment::Slot { feature, .. }) => {
                    let feature = *feature;
                    self.slot_start = self.context.len();
                    self.frontier = match self.compiled.acceptor(feature) {
                        Acceptor::Trie(_) => Frontier::Trie(CandidateTrie::ROOT),
                        Acceptor::Numeric { .. } => Frontier::Num(NumState::Start),
                    };
                    if self.compiled.template().feature(feature).level
                        == crate::template::Level::Report
                    {
                        self.phase = Phase::ReportFeatures;
                    }
                    return;
                }
            }
        }
    }

    /// The structured report once decoding is done.
    pub fn report(&self) -> Result<StructuredReport, DecodeError> {
        if self.phase != Phase::Done {
            return Err(DecodeError::NotFinished);
        }
        Ok(StructuredReport {
            number_of_nodules: self.count.flatten(),
            nodules: self.nodules.clone(),
            report_features: self.report_features.clone(),
            ..Default::default()
        })
    }
}
