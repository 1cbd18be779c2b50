use std::fmt;

use indexmap::IndexMap;

use super::{count_key, FeatureValue, StructuredReport};
use crate::template::{CandidateKind, FeatureSpec, Template};

/// One schema violation, displayed as `path: message`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn push(out: &mut Vec<Violation>, path: impl Into<String>, message: impl Into<String>) {
    out.push(Violation {
        path: path.into(),
        message: message.into(),
    });
}

/// Checks `value` against the candidate set of `spec`; `None` when valid.
pub(crate) fn check_value(spec: &FeatureSpec, value: &FeatureValue) -> Option<&'static str> {
    let cs = &spec.candidates;
    match (value, &cs.kind) {
        (FeatureValue::Null, _) => (!cs.nullable).then_some("null not allowed"),
        (FeatureValue::Text(s), CandidateKind::Enumerated(_)) => {
            (!cs.contains_text(s)).then_some("not a candidate")
        }
        (FeatureValue::Number(v), CandidateKind::Integer(r) | CandidateKind::Float(r)) => {
            (!r.contains(*v)).then_some("out of range")
        }
        _ => Some("wrong value type"),
    }
}

fn check_map(
    features: &[FeatureSpec],
    values: &IndexMap<String, FeatureValue>,
    prefix: &str,
    out: &mut Vec<Violation>,
) {
    for f in features {
        let path = format!("{prefix}{}", f.name);
        match values.get(&f.name) {
            None => push(out, path, "missing"),
            Some(v) => {
                if let Some(msg) = check_value(f, v) {
                    let shown = match v {
                        FeatureValue::Text(s) => format!("{s:?}"),
                        other => other.to_string(),
                    };
                    push(out, path, format!("{shown} {msg}"));
                }
            }
        }
    }
    for k in values.keys() {
        if !features.iter().any(|f| &f.name == k) {
            push(out, format!("{prefix}{k}"), "unknown feature");
        }
    }
}

/// Every violation of `r` against `t`; empty means valid.
pub fn validate_report(r: &StructuredReport, t: &Template) -> Vec<Violation> {
    let mut out = Vec::new();
    let expected = match r.number_of_nodules {
        None if !t.count_feature.candidates.nullable => {
            push(&mut out, count_key(), "null not allowed");
            0
        }
        None => 0,
        Some(n) => {
            if !t.count_range().contains(n as f64) {
                push(&mut out, count_key(), "out of range");
            }
            n as usize
        }
    };
    if r.nodules.len() != expected {
        push(&mut out, "nodules", "nodules length mismatch");
    }
    for (i, d) in r.nodules.iter().enumerate() {
        check_map(
            &t.nodule_features,
            &d.values,
            &format!("nodules[{i}]."),
            &mut out,
        );
    }
    check_map(&t.report_features, &r.report_features, "", &mut out);
    out
}
