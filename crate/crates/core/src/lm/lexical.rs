//! Lexical-overlap heuristic standing in for an LLM.
//!
//! The free text is split into paragraphs and words. Candidate phrases and
//! feature labels are claimed greedily, longest match first. Each candidate
//! is scored per feature scope: an exact phrase claim scores
//! [`PHRASE_WEIGHT`], each of its words found among unclaimed words scores
//! [`TOKEN_WEIGHT`], and null scores [`NULL_WEIGHT`]. At every step a token
//! receives the best score of the candidates it would extend.
//!
//! Candidates shared by several features, or that look like numbers, count
//! only when a label of the feature ends at most [`ANCHOR_GAP`] words
//! before them. Numeric features take the first numeral anchored by their
//! label; the average diameter also accepts an unlabeled `N mm` before
//! `nodule`, or failing that the first one after it.

use std::collections::HashMap;
use std::sync::Arc;

use super::{normalize, ProbabilitySource, SourceError, StepContext};
use crate::template::{CandidateKind, FeatureId, Template};
use crate::token::{NumericAutomaton, TokenId, TokenKind, Vocab};

pub const PHRASE_WEIGHT: f64 = 10.0;
pub const TOKEN_WEIGHT: f64 = 1.0;
pub const NULL_WEIGHT: f64 = 0.5;
pub const ANCHOR_GAP: usize = 3;
const FLOOR: f64 = 1e-3;
const AVERAGE_DIAMETER: &str = "average_diameter_mm";

#[derive(Debug, Clone, PartialEq)]
struct Word {
    text: String,
    /// Followed directly by `:`.
    colon: bool,
}

fn is_numeral(s: &str) -> bool {
    let mut parts = s.splitn(2, '.');
    let int = parts.next().unwrap_or("");
    let frac = parts.next();
    !int.is_empty()
        && int.bytes().all(|b| b.is_ascii_digit())
        && frac.is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()))
}

fn numeric_looking(phrase: &[String]) -> bool {
    phrase
        .first()
        .and_then(|w| w.chars().next())
        .is_some_and(|c| c.is_ascii_digit())
}

/// Lower-cased words. `-` and `/` stay inside a word between alphanumerics,
/// `.` stays between digits.
fn words(text: &str) -> Vec<Word> {
    let chars: Vec<char> = text.chars().collect();
    let mut out: Vec<Word> = Vec::new();
    let mut cur = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let next = chars.get(i + 1).copied();
        let keep = c.is_alphanumeric()
            || (matches!(c, '-' | '/')
                && !cur.is_empty()
                && next.is_some_and(char::is_alphanumeric))
            || (c == '.'
                && cur.chars().last().is_some_and(|l| l.is_ascii_digit())
                && next.is_some_and(|n| n.is_ascii_digit()));
        if keep {
            cur.extend(c.to_lowercase());
            continue;
        }
        if !cur.is_empty() {
            out.push(Word {
                text: std::mem::take(&mut cur),
                colon: false,
            });
        }
        if c == ':' {
            if let Some(w) = out.last_mut() {
                w.colon = true;
            }
        }
    }
    if !cur.is_empty() {
        out.push(Word {
            text: cur,
            colon: false,
        });
    }
    out
}

fn phrase(text: &str) -> Vec<String> {
    words(text).into_iter().map(|w| w.text).collect()
}

fn paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                out.push(cur.join("\n"));
                cur.clear();
            }
        } else {
            cur.push(line);
        }
    }
    if !cur.is_empty() {
        out.push(cur.join("\n"));
    }
    out
}

#[derive(Debug, Clone, Default)]
struct PhraseEntry {
    /// (feature, original candidate text)
    candidates: Vec<(FeatureId, String)>,
    label: Option<FeatureId>,
}

#[derive(Debug, Clone)]
enum ClaimKind {
    Label(FeatureId),
    /// Candidate text assigned to a feature, or `None` when it could not be
    /// attributed.
    Candidate(Option<(FeatureId, String)>),
}

#[derive(Debug, Clone)]
struct Claim {
    end: usize,
    kind: ClaimKind,
}

struct Lexicon {
    phrases: HashMap<Vec<String>, PhraseEntry>,
    max_len: usize,
}

impl Lexicon {
    fn new(t: &Template) -> Self {
        let mut phrases: HashMap<Vec<String>, PhraseEntry> = HashMap::new();
        for (id, f) in t.features() {
            if let CandidateKind::Enumerated(_) = f.candidates.kind {
                for c in f.candidates.distinct_values() {
                    let p = phrase(&c);
                    if p.is_empty() {
                        continue;
                    }
                    let e = phrases.entry(p).or_default();
                    if !e.candidates.iter().any(|(fid, _)| *fid == id) {
                        e.candidates.push((id, c));
                    }
                }
            }
        }
        for (id, f) in t.features() {
            let p = phrase(&f.label());
            if p.is_empty() {
                continue;
            }
            let e = phrases.entry(p).or_default();
            if e.label.is_none() {
                e.label = Some(id);
            }
        }
        let max_len = phrases.keys().map(Vec::len).max().unwrap_or(0);
        Lexicon { phrases, max_len }
    }

    /// Greedy left-to-right longest-match claims over `ws`.
    fn claims(&self, ws: &[Word]) -> (Vec<Claim>, Vec<bool>) {
        let mut claims: Vec<Claim> = Vec::new();
        let mut claimed = vec![false; ws.len()];
        let mut i = 0;
        while i < ws.len() {
            let mut found = None;
            for len in (1..=self.max_len.min(ws.len() - i)).rev() {
                let key: Vec<String> = ws[i..i + len].iter().map(|w| w.text.clone()).collect();
                if let Some(e) = self.phrases.get(&key) {
                    found = Some((len, e));
                    break;
                }
            }
            let Some((len, entry)) = found else {
                i += 1;
                continue;
            };
            let end = i + len;
            let as_label = entry
                .label
                .filter(|_| entry.candidates.is_empty() || ws[end - 1].colon);
            let kind = match as_label {
                Some(f) => ClaimKind::Label(f),
                None => {
                    let key: Vec<String> = ws[i..end].iter().map(|w| w.text.clone()).collect();
                    let ambiguous = entry.candidates.len() > 1 || numeric_looking(&key);
                    let assigned = if ambiguous {
                        let anchor = nearest_label(&claims, i);
                        entry
                            .candidates
                            .iter()
                            .find(|(f, _)| Some(*f) == anchor)
                            .cloned()
                    } else {
                        entry.candidates.first().cloned()
                    };
                    ClaimKind::Candidate(assigned)
                }
            };
            claims.push(Claim { end, kind });
            claimed[i..end].iter_mut().for_each(|c| *c = true);
            i = end;
        }
        (claims, claimed)
    }
}

/// Feature of the closest label claim ending within the anchor gap before
/// word `pos`.
fn nearest_label(claims: &[Claim], pos: usize) -> Option<FeatureId> {
    claims
        .iter()
        .rev()
        .filter(|c| c.end <= pos)
        .find_map(|c| match c.kind {
            ClaimKind::Label(f) => Some((f, c.end)),
            _ => None,
        })
        .filter(|(_, end)| pos - end <= ANCHOR_GAP)
        .map(|(f, _)| f)
}

/// One scope (a nodule paragraph, or the report-level text).
struct Scope {
    words: Vec<Word>,
    claims: Vec<Claim>,
    claimed: Vec<bool>,
}

impl Scope {
    fn new(lex: &Lexicon, words: Vec<Word>) -> Self {
        let (claims, claimed) = lex.claims(&words);
        Scope {
            words,
            claims,
            claimed,
        }
    }

    fn enumerated_scores(&self, feature: FeatureId, cands: &[String]) -> Vec<f64> {
        let residual: Vec<&str> = self
            .words
            .iter()
            .zip(&self.claimed)
            .filter(|(w, c)| !**c && !is_numeral(&w.text))
            .map(|(w, _)| w.text.as_str())
            .collect();
        cands
            .iter()
            .map(|c| {
                let hit = self.claims.iter().any(|cl| {
                    matches!(&cl.kind, ClaimKind::Candidate(Some((f, v))) if *f == feature && v == c)
                });
                let tokens = phrase(c)
                    .iter()
                    .filter(|w| !is_numeral(w) && residual.contains(&w.as_str()))
                    .count() as f64;
                if hit {
                    PHRASE_WEIGHT + tokens * TOKEN_WEIGHT
                } else {
                    tokens * TOKEN_WEIGHT
                }
            })
            .collect()
    }

    fn anchored_numeral(&self, feature: FeatureId) -> Option<String> {
        self.words.iter().enumerate().find_map(|(i, w)| {
            (is_numeral(&w.text) && nearest_label(&self.claims, i) == Some(feature))
                .then(|| w.text.clone())
        })
    }

    /// Unlabeled `N mm` followed within a few words by `nodule`, else the
    /// first unlabeled `N mm` after a `nodule`.
    fn unlabeled_size(&self) -> Option<String> {
        let ws = &self.words;
        let size_at = |i: usize| {
            is_numeral(&ws[i].text)
                && ws.get(i + 1).is_some_and(|w| w.text == "mm")
                && nearest_label(&self.claims, i).is_none()
        };
        let before = (0..ws.len()).find(|&i| {
            size_at(i)
                && ws[(i + 2).min(ws.len())..(i + 6).min(ws.len())]
                    .iter()
                    .any(|w| w.text == "nodule")
        });
        let after = || {
            let first = ws.iter().position(|w| w.text == "nodule")?;
            (first + 1..ws.len()).find(|&i| size_at(i))
        };
        before.or_else(after).map(|i| ws[i].text.clone())
    }
}

#[derive(Debug, Clone)]
enum Target {
    /// Scores aligned with the feature's candidate paths.
    Enumerated(Vec<f64>),
    Numeric(Option<String>),
}

/// Deterministic extractor over one free-text report.
pub struct LexicalSource {
    vocab: Arc<Vocab>,
    count: FeatureId,
    /// Per feature: candidate token paths and values (`None` is null).
    paths: Vec<Vec<(Vec<TokenId>, Option<String>)>>,
    null_path: Vec<TokenId>,
    numeric_tokens: Vec<TokenId>,
    count_target: Option<String>,
    nodule_targets: Vec<Vec<Target>>,
    report_targets: Vec<Target>,
    blank_nodule: Vec<Target>,
    n_nodule: usize,
}

impl LexicalSource {
    pub fn new(free_text: &str, t: &Template, vocab: Arc<Vocab>) -> Self {
        let lex = Lexicon::new(t);
        let null_path = vocab.encode("null");
        let paths: Vec<Vec<(Vec<TokenId>, Option<String>)>> = t
            .features()
            .map(|(_, f)| {
                if !f.candidates.is_enumerated() {
                    return Vec::new();
                }
                let mut p: Vec<(Vec<TokenId>, Option<String>)> = f
                    .candidates
                    .distinct_values()
                    .into_iter()
                    .map(|c| (vocab.encode(&c), Some(c)))
                    .collect();
                if f.candidates.nullable {
                    p.push((null_path.clone(), None));
                }
                p
            })
            .collect();
        let numeric_tokens = (0..vocab.len() as TokenId)
            .filter(|&id| {
                let b = vocab.token_bytes(id);
                vocab.kind(id) != TokenKind::Special
                    && !b.is_empty()
                    && b.iter().all(|c| c.is_ascii_digit() || *c == b'.')
            })
            .collect();

        let paras = paragraphs(free_text);
        let mut nodule_scopes = Vec::new();
        let mut other_words = Vec::new();
        for p in &paras {
            let ws = words(p);
            let header = ws.len() >= 2 && ws[0].text == "nodule" && is_numeral(&ws[1].text);
            if header {
                nodule_scopes.push(Scope::new(&lex, ws[2..].to_vec()));
            } else {
                other_words.extend(ws);
            }
        }
        let all_words = words(free_text);
        let whole = Scope::new(&lex, all_words.clone());
        let report_scope = if nodule_scopes.is_empty() {
            Scope::new(&lex, all_words.clone())
        } else {
            Scope::new(&lex, other_words)
        };

        let count_auto = NumericAutomaton::build(&t.count_feature.candidates);
        let count_target = whole
            .anchored_numeral(t.count_id())
            .or_else(|| {
                if !nodule_scopes.is_empty() {
                    Some(nodule_scopes.len().to_string())
                } else if all_words
                    .iter()
                    .any(|w| w.text == "nodule" || w.text == "nodules")
                {
                    Some("1".to_string())
                } else {
                    Some("0".to_string())
                }
            })
            .filter(|s| count_auto.accepts(s));
        if nodule_scopes.is_empty() {
            nodule_scopes.push(Scope::new(&lex, all_words));
        }

        let target_for = |scope: &Scope, id: FeatureId, name: &str| -> Target {
            let f = t.feature(id);
            match &f.candidates.kind {
                CandidateKind::Enumerated(_) => {
                    let cands: Vec<String> =
                        paths[id.0].iter().filter_map(|p| p.1.clone()).collect();
                    let mut scores = scope.enumerated_scores(id, &cands);
                    if f.candidates.nullable {
                        scores.push(NULL_WEIGHT);
                    }
                    Target::Enumerated(scores)
                }
                CandidateKind::Integer(_) | CandidateKind::Float(_) => {
                    let auto = NumericAutomaton::build(&f.candidates);
                    let mut found = scope.anchored_numeral(id);
                    if found.is_none() && name == AVERAGE_DIAMETER {
                        found = scope.unlabeled_size();
                    }
                    Target::Numeric(found.filter(|s| auto.accepts(s)))
                }
            }
        };
        let nodule_targets = nodule_scopes
            .iter()
            .map(|scope| {
                t.nodule_features
                    .iter()
                    .enumerate()
                    .map(|(i, f)| target_for(scope, t.nodule_id(i), &f.name))
                    .collect()
            })
            .collect();
        let empty = Scope::new(&lex, Vec::new());
        let blank_nodule = t
            .nodule_features
            .iter()
            .enumerate()
            .map(|(i, f)| target_for(&empty, t.nodule_id(i), &f.name))
            .collect();
        let report_targets = t
            .report_features
            .iter()
            .enumerate()
            .map(|(i, f)| target_for(&report_scope, t.report_id(i), &f.name))
            .collect();
        LexicalSource {
            vocab,
            count: t.count_id(),
            paths,
            null_path,
            numeric_tokens,
            count_target,
            nodule_targets,
            report_targets,
            blank_nodule,
            n_nodule: t.nodule_features.len(),
        }
    }

    fn target(&self, feature: FeatureId, descriptor: Option<usize>) -> Option<&Target> {
        match descriptor {
            Some(d) if feature.0 < self.n_nodule => {
                Some(&self.nodule_targets.get(d).unwrap_or(&self.blank_nodule)[feature.0])
            }
            _ => self.report_targets.get(feature.0 - self.n_nodule),
        }
    }

    fn favor_path(
        weights: &mut [f64],
        path: &[TokenId],
        partial: &[TokenId],
        close: Option<TokenId>,
        score: f64,
    ) {
        if !path.starts_with(partial) {
            return;
        }
        let next = if path.len() > partial.len() {
            Some(path[partial.len()])
        } else {
            close
        };
        if let Some(n) = next {
            let w = &mut weights[n as usize];
            *w = w.max(score);
        }
    }

    fn favor_numeral(
        &self,
        weights: &mut [f64],
        target: Option<&str>,
        partial: &[TokenId],
        close: Option<TokenId>,
    ) {
        Self::favor_path(weights, &self.null_path, partial, close, NULL_WEIGHT);
        let Some(target) = target else { return };
        let done = self.vocab.decode(partial);
        let Some(rest) = target.strip_prefix(done.as_str()) else {
            return;
        };
        if rest.is_empty() {
            if let Some(c) = close {
                weights[c as usize] = weights[c as usize].max(PHRASE_WEIGHT);
            }
            return;
        }
        let best = self
            .numeric_tokens
            .iter()
            .filter(|&&id| rest.as_bytes().starts_with(self.vocab.token_bytes(id)))
            .max_by_key(|&&id| (self.vocab.token_bytes(id).len(), std::cmp::Reverse(id)));
        if let Some(&id) = best {
            weights[id as usize] = weights[id as usize].max(PHRASE_WEIGHT);
        }
    }
}

impl ProbabilitySource for LexicalSource {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn next_probs(&self, ctx: &StepContext<'_>) -> Result<Vec<f64>, SourceError> {
        let mut weights = vec![FLOOR; self.vocab.len()];
        if let Some(h) = ctx.slot {
            if h.feature == self.count {
                self.favor_numeral(
                    &mut weights,
                    self.count_target.as_deref(),
                    h.partial,
                    h.close_token,
                );
            } else {
                match self.target(h.feature, h.descriptor) {
                    Some(Target::Enumerated(scores)) => {
                        for ((path, _), &score) in self.paths[h.feature.0].iter().zip(scores) {
                            Self::favor_path(&mut weights, path, h.partial, h.close_token, score);
                        }
                    }
                    Some(Target::Numeric(t)) => {
                        self.favor_numeral(&mut weights, t.as_deref(), h.partial, h.close_token)
                    }
                    None => {}
                }
            }
        }
        normalize(&mut weights);
        Ok(weights)
    }
}
