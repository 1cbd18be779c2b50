use serde::Serialize;

use super::{Op, QueryExpr};
use crate::analytics::value_of;
use crate::report::{Corpus, FeatureValue, StructuredReport};
use crate::template::Template;

/// Features summarised when a caller does not pick any.
pub const DEFAULT_DISTRIBUTIONS: [&str; 5] = [
    "average_diameter_mm",
    "lobe",
    "shape",
    "fissure",
    "peripheral",
];

const DIAMETER_BINS: [(&str, Option<f64>, Option<f64>); 4] = [
    ("<6", None, Some(6.0)),
    ("6-10", Some(6.0), Some(10.0)),
    ("10-15", Some(10.0), Some(15.0)),
    (">=15", Some(15.0), None),
];

/// Where a matched feature's value occurs in the stored source text, as a
/// byte range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Span {
    pub feature: String,
    pub value: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Match {
    pub report_id: String,
    pub index: usize,
    /// Values of the features named by non-negated predicates.
    pub values: Vec<(String, FeatureValue)>,
    /// Found occurrences of those values in the source text. A value can
    /// match without appearing verbatim.
    pub spans: Vec<Span>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalResult {
    pub query: String,
    pub count: usize,
    pub matches: Vec<Match>,
}

/// Evaluates `q` on descriptor `index` of `r`.
pub fn evaluate(q: &QueryExpr, t: &Template, r: &StructuredReport, index: usize) -> bool {
    match q {
        QueryExpr::And(a, b) => evaluate(a, t, r, index) && evaluate(b, t, r, index),
        QueryExpr::Or(a, b) => evaluate(a, t, r, index) || evaluate(b, t, r, index),
        QueryExpr::Not(a) => !evaluate(a, t, r, index),
        QueryExpr::Pred(p) => p.test(&value_of(t, r, Some(index), &p.feature)),
    }
}

fn is_word(b: u8) -> bool {
    b.is_ascii_alphanumeric()
}

/// First case-insensitive occurrence of `needle` bounded by non-word bytes.
fn find_word(haystack: &str, needle: &str) -> Option<(usize, usize)> {
    if needle.is_empty() {
        return None;
    }
    let hay = haystack.to_lowercase();
    let nee = needle.to_lowercase();
    if hay.len() != haystack.len() {
        // Lower-casing changed byte offsets; fall back to an exact search.
        return haystack.find(needle).map(|s| (s, s + needle.len()));
    }
    let hb = hay.as_bytes();
    let mut from = 0;
    while let Some(rel) = hay[from..].find(&nee) {
        let s = from + rel;
        let e = s + nee.len();
        let left_ok = s == 0 || !is_word(hb[s - 1]);
        let right_ok = e == hb.len() || !is_word(hb[e]);
        if left_ok && right_ok {
            return Some((s, e));
        }
        from = s + 1;
        while !hay.is_char_boundary(from) {
            from += 1;
        }
    }
    None
}

fn provenance(
    q: &QueryExpr,
    t: &Template,
    r: &StructuredReport,
    index: usize,
) -> (Vec<(String, FeatureValue)>, Vec<Span>) {
    let mut values: Vec<(String, FeatureValue)> = Vec::new();
    let mut spans = Vec::new();
    for p in q.positive_predicates() {
        if values.iter().any(|(f, _)| *f == p.feature) {
            continue;
        }
        let v = value_of(t, r, Some(index), &p.feature);
        if !p.test(&v) || matches!(p.op, Op::IsNull) {
            continue;
        }
        if let (Some(text), false) = (&r.source_text, v.is_null()) {
            let needle = v.to_string();
            if let Some((start, end)) = find_word(text, &needle) {
                spans.push(Span {
                    feature: p.feature.clone(),
                    value: needle,
                    start,
                    end,
                });
            }
        }
        values.push((p.feature.clone(), v));
    }
    (values, spans)
}

/// Full linear scan; matches are ordered by report id, then descriptor index.
pub fn execute(q: &QueryExpr, c: &Corpus, t: &Template) -> RetrievalResult {
    let mut matches = Vec::new();
    for r in c.iter() {
        for index in 0..r.nodules.len() {
            if evaluate(q, t, r, index) {
                let (values, spans) = provenance(q, t, r, index);
                matches.push(Match {
                    report_id: r.report_id().to_string(),
                    index,
                    values,
                    spans,
                });
            }
        }
    }
    matches.sort_by(|a, b| (&a.report_id, a.index).cmp(&(&b.report_id, b.index)));
    RetrievalResult {
        query: q.to_string(),
        count: matches.len(),
        matches,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bucket {
    pub label: String,
    pub count: u64,
}

/// Counts of one feature over the matched descriptors. `total` equals the
/// bucket counts plus `null`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Distribution {
    pub feature: String,
    pub buckets: Vec<Bucket>,
    pub null: u64,
    pub total: u64,
}

/// Per-feature distributions over the matches of `r`. Enumerated features
/// count candidates, `_mm` features use the `<6, 6-10, 10-15, >=15` bins
/// and other numeric features count distinct values.
pub fn result_stats(
    r: &RetrievalResult,
    c: &Corpus,
    t: &Template,
    features: &[&str],
) -> Result<Vec<Distribution>, String> {
    for f in features {
        if t.feature_by_name(f).is_none() {
            return Err(format!("unknown feature {f:?}"));
        }
    }
    let values: Vec<Vec<FeatureValue>> = features
        .iter()
        .map(|f| {
            r.matches
                .iter()
                .map(|m| {
                    c.get(&m.report_id)
                        .map_or(FeatureValue::Null, |rep| value_of(t, rep, Some(m.index), f))
                })
                .collect()
        })
        .collect();
    Ok(features
        .iter()
        .zip(values)
        .map(|(f, vals)| distribution(t, f, &vals))
        .collect())
}

fn distribution(t: &Template, feature: &str, vals: &[FeatureValue]) -> Distribution {
    let (_, spec) = t.feature_by_name(feature).expect("checked");
    let mut buckets: Vec<Bucket> = if spec.candidates.is_enumerated() {
        spec.candidates
            .distinct_values()
            .into_iter()
            .map(|label| Bucket { label, count: 0 })
            .collect()
    } else if feature.ends_with("_mm") {
        DIAMETER_BINS
            .iter()
            .map(|(l, _, _)| Bucket {
                label: l.to_string(),
                count: 0,
            })
            .collect()
    } else {
        let mut nums: Vec<f64> = vals.iter().filter_map(FeatureValue::as_number).collect();
        nums.sort_by(f64::total_cmp);
        nums.dedup();
        nums.into_iter()
            .map(|n| Bucket {
                label: FeatureValue::Number(n).to_string(),
                count: 0,
            })
            .collect()
    };
    let mut null = 0;
    for v in vals {
        let label = match v {
            FeatureValue::Null => {
                null += 1;
                continue;
            }
            FeatureValue::Number(x) if feature.ends_with("_mm") => DIAMETER_BINS
                .iter()
                .find(|(_, lo, hi)| lo.is_none_or(|lo| *x >= lo) && hi.is_none_or(|hi| *x < hi))
                .map(|(l, _, _)| l.to_string())
                .expect("bins cover the line"),
            other => other.to_string(),
        };
        if let Some(b) = buckets.iter_mut().find(|b| b.label == label) {
            b.count += 1;
        }
    }
    Distribution {
        feature: feature.to_string(),
        buckets,
        null,
        total: vals.len() as u64,
    }
}
