//! Deterministic free-text rendering of a structured report.

use super::{FeatureValue, NoduleDescriptor, StructuredReport};
use crate::template::{FeatureSpec, Template};
use crate::token::format_decimal;

/// Features folded into the opening sentence of a nodule paragraph.
const LEAD: [&str; 4] = ["stability", "average_diameter_mm", "type", "lobe"];

fn unit(name: &str) -> &'static str {
    if name.ends_with("_mm3") {
        " mm3"
    } else if name.ends_with("_mm") {
        " mm"
    } else if name.ends_with("_mg") {
        " mg"
    } else {
        ""
    }
}

/// Display name without its parenthesized unit.
fn heading(spec: &FeatureSpec) -> String {
    match spec.display_name.find('(') {
        Some(i) => spec.display_name[..i].trim_end().to_string(),
        None => spec.display_name.clone(),
    }
}

fn value_text(spec: &FeatureSpec, v: &FeatureValue) -> Option<String> {
    match v {
        FeatureValue::Null => None,
        FeatureValue::Text(s) => Some(s.clone()),
        FeatureValue::Number(x) => {
            let decimals = spec.candidates.range().map_or(2, |r| r.decimals);
            Some(format_decimal(*x, decimals))
        }
    }
}

fn article(word: &str) -> &'static str {
    match word.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

fn lead_sentence(t: &Template, d: &NoduleDescriptor) -> Option<String> {
    let get = |name: &str| {
        t.feature_by_name(name)
            .and_then(|(_, spec)| value_text(spec, d.get(name)))
    };
    let stability = get("stability");
    let size = get("average_diameter_mm").map(|s| format!("{s} mm"));
    let kind = get("type");
    let lobe = get("lobe");
    if stability.is_none() && size.is_none() && kind.is_none() && lobe.is_none() {
        return None;
    }
    let words: Vec<String> = [stability, size, kind]
        .into_iter()
        .flatten()
        .chain(std::iter::once("nodule".to_string()))
        .collect();
    let phrase = words.join(" ");
    let mut s = format!("There is {} {phrase}", article(&phrase));
    if let Some(l) = lobe {
        s.push_str(&format!(" in the {l}"));
    }
    s.push('.');
    Some(s)
}

fn clauses<'a>(
    specs: impl Iterator<Item = &'a FeatureSpec>,
    value: impl Fn(&str) -> &'a FeatureValue,
    skip: &[&str],
) -> Vec<String> {
    specs
        .filter(|f| !skip.contains(&f.name.as_str()))
        .filter_map(|f| {
            value_text(f, value(&f.name)).map(|v| format!("{}: {v}{}.", heading(f), unit(&f.name)))
        })
        .collect()
}

/// English rendering that mentions every non-null value verbatim, one
/// paragraph per nodule descriptor and an impression paragraph for the
/// report-level features. Paragraphs are separated by blank lines.
pub fn render_lsr(r: &StructuredReport, t: &Template) -> String {
    let mut paragraphs = Vec::new();
    match r.number_of_nodules {
        Some(0) => paragraphs.push("Number of nodules: 0. No pulmonary nodules.".to_string()),
        Some(n) => paragraphs.push(format!("Number of nodules: {n}.")),
        None => {}
    }
    for (i, d) in r.nodules.iter().enumerate() {
        let mut parts = vec![lead_sentence(t, d).unwrap_or_else(|| "A nodule is noted.".into())];
        parts.extend(clauses(t.nodule_features.iter(), |name| d.get(name), &LEAD));
        paragraphs.push(format!("Nodule {}: {}", i + 1, parts.join(" ")));
    }
    let impression = clauses(t.report_features.iter(), |name| r.report_value(name), &[]);
    if !impression.is_empty() {
        paragraphs.push(format!("IMPRESSION: {}", impression.join(" ")));
    }
    paragraphs.join("\n\n")
}
