//! Line-oriented template DSL.
//!
//! ```text
//! @template lung_nodule
//! @emission_order count nodules report
//! lobe | Lobe | nodule | enum | right upper lobe; lingula | nullable
//! average_diameter_mm | Average Diameter (mm) | nodule | float | 0.00..200.00 | nullable
//! number_of_nodules | Number of Nodules | auxiliary | integer | 0..50 | nullable
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::collections::HashSet;

use super::{
    CandidateKind, CandidateSet, EmissionOrder, FeatureSpec, Level, NumericRange, Template,
    TemplateError,
};

const DEFAULT_FLOAT_DECIMALS: u32 = 2;

pub fn parse_template(spec_text: &str) -> Result<Template, TemplateError> {
    let mut name = String::from("template");
    let mut features: Vec<FeatureSpec> = Vec::new();
    let mut seen = HashSet::new();

    for (line_idx, raw) in spec_text.lines().enumerate() {
        let line_no = line_idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(directive) = trimmed.strip_prefix('@') {
            parse_directive(directive, line_no, raw, &mut name)?;
            continue;
        }
        let feature = parse_stanza(raw, line_no)?;
        if !seen.insert(feature.name.clone()) {
            return Err(TemplateError::DuplicateFeature(feature.name));
        }
        features.push(feature);
    }

    let mut nodule_features = Vec::new();
    let mut report_features = Vec::new();
    let mut counts = Vec::new();
    for f in features {
        match f.level {
            Level::Nodule => nodule_features.push(f),
            Level::Report => report_features.push(f),
            Level::Auxiliary => counts.push(f),
        }
    }
    if counts.len() != 1 {
        return Err(TemplateError::CountFeature(counts.len()));
    }
    let count_feature = counts.pop().unwrap();
    if !matches!(count_feature.candidates.kind, CandidateKind::Integer(_)) {
        return Err(TemplateError::CountKind(count_feature.name));
    }

    Ok(Template {
        name,
        nodule_features,
        report_features,
        count_feature,
        emission_order: EmissionOrder::CountNodulesReport,
    })
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> TemplateError {
    TemplateError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn parse_directive(
    directive: &str,
    line: usize,
    raw: &str,
    name: &mut String,
) -> Result<(), TemplateError> {
    let column = raw.find('@').unwrap_or(0) + 1;
    let mut words = directive.split_whitespace();
    match words.next() {
        Some("template") => {
            let value = words
                .next()
                .ok_or_else(|| syntax(line, column, "@template needs a name"))?;
            if !is_identifier(value) {
                return Err(syntax(
                    line,
                    column,
                    format!("invalid template name {value:?}"),
                ));
            }
            *name = value.to_string();
            Ok(())
        }
        Some("emission_order") => {
            let order: Vec<&str> = words.collect();
            if order == ["count", "nodules", "report"] {
                Ok(())
            } else {
                Err(syntax(
                    line,
                    column,
                    "only `@emission_order count nodules report` is supported",
                ))
            }
        }
        Some(other) => Err(syntax(line, column, format!("unknown directive @{other}"))),
        None => Err(syntax(line, column, "empty directive")),
    }
}

/// Fields of a stanza with their 1-based starting columns.
fn split_fields(raw: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, ch) in raw.char_indices() {
        if ch == '|' {
            out.push((start, &raw[start..i]));
            start = i + 1;
        }
    }
    out.push((start, &raw[start..]));
    out.into_iter()
        .map(|(off, field)| {
            let lead = field.len() - field.trim_start().len();
            (raw[..off + lead].chars().count() + 1, field.trim())
        })
        .collect()
}

fn parse_stanza(raw: &str, line: usize) -> Result<FeatureSpec, TemplateError> {
    let fields = split_fields(raw);
    if fields.len() != 6 {
        return Err(syntax(
            line,
            1,
            format!(
                "expected 6 `|`-separated fields (name | display | level | kind | candidates | nullable), found {}",
                fields.len()
            ),
        ));
    }
    let (name_col, name) = fields[0];
    if !is_identifier(name) {
        return Err(syntax(
            line,
            name_col,
            format!("invalid feature name {name:?}"),
        ));
    }
    let (display_col, display) = fields[1];
    if display.is_empty() {
        return Err(syntax(line, display_col, "empty display name"));
    }
    let (level_col, level) = fields[2];
    let level = match level {
        "nodule" => Level::Nodule,
        "report" => Level::Report,
        "auxiliary" => Level::Auxiliary,
        other => return Err(syntax(line, level_col, format!("unknown level {other:?}"))),
    };
    let (null_col, nullable) = fields[5];
    let nullable = match nullable {
        "nullable" => true,
        "required" => false,
        other => {
            return Err(syntax(
                line,
                null_col,
                format!("expected `nullable` or `required`, found {other:?}"),
            ))
        }
    };
    let (kind_col, kind) = fields[3];
    let (cand_col, cands) = fields[4];
    let kind = match kind {
        "enum" => {
            if cands.is_empty() {
                return Err(TemplateError::EmptyEnumerated(name.to_string()));
            }
            let mut values = Vec::new();
            for item in cands.split(';') {
                let item = item.trim();
                if item.is_empty() {
                    return Err(syntax(line, cand_col, "empty candidate in list"));
                }
                if let Some(bad) = item.chars().find(|c| forbidden_in_candidate(*c)) {
                    return Err(syntax(
                        line,
                        cand_col,
                        format!("candidate {item:?} contains forbidden character {bad:?}"),
                    ));
                }
                if item == "null" {
                    return Err(syntax(
                        line,
                        cand_col,
                        "`null` is not a candidate; use the nullable field",
                    ));
                }
                values.push(item.to_string());
            }
            CandidateKind::Enumerated(values)
        }
        "integer" => {
            let range = parse_range(cands, line, cand_col, Some(0), name)?;
            CandidateKind::Integer(range)
        }
        "float" => {
            let range = parse_range(cands, line, cand_col, None, name)?;
            CandidateKind::Float(range)
        }
        other => return Err(syntax(line, kind_col, format!("unknown kind {other:?}"))),
    };
    Ok(FeatureSpec {
        name: name.to_string(),
        display_name: display.to_string(),
        level,
        candidates: CandidateSet { kind, nullable },
    })
}

pub(crate) fn forbidden_in_candidate(c: char) -> bool {
    matches!(c, '"' | '\\' | '|' | ';' | '<' | '>') || c.is_control()
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Parses `digits[.digits]` into (integer part, fraction digits).
fn parse_decimal(s: &str) -> Option<(u64, String)> {
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if s.contains('.') && (frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit())) {
        return None;
    }
    Some((int.parse().ok()?, frac.to_string()))
}

fn parse_range(
    text: &str,
    line: usize,
    column: usize,
    fixed_decimals: Option<u32>,
    name: &str,
) -> Result<NumericRange, TemplateError> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| syntax(line, column, format!("expected `min..max`, found {text:?}")))?;
    let lo = parse_decimal(lo.trim())
        .ok_or_else(|| syntax(line, column, format!("invalid bound {:?}", lo.trim())))?;
    let hi = parse_decimal(hi.trim())
        .ok_or_else(|| syntax(line, column, format!("invalid bound {:?}", hi.trim())))?;
    let decimals = match fixed_decimals {
        Some(d) => {
            if !lo.1.is_empty() || !hi.1.is_empty() {
                return Err(syntax(
                    line,
                    column,
                    "integer bounds cannot have a fraction",
                ));
            }
            d
        }
        None => {
            let d = lo.1.len().max(hi.1.len()) as u32;
            if d == 0 {
                DEFAULT_FLOAT_DECIMALS
            } else {
                d
            }
        }
    };
    if decimals > 6 {
        return Err(syntax(
            line,
            column,
            "at most 6 fractional digits are supported",
        ));
    }
    let scale = 10u64.pow(decimals);
    let to_scaled = |(int, frac): (u64, String)| -> Option<u64> {
        let mut frac = frac;
        while (frac.len() as u32) < decimals {
            frac.push('0');
        }
        let frac_val: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().ok()?
        };
        int.checked_mul(scale)?.checked_add(frac_val)
    };
    let min_scaled = to_scaled(lo).ok_or_else(|| syntax(line, column, "bound overflows"))?;
    let max_scaled = to_scaled(hi).ok_or_else(|| syntax(line, column, "bound overflows"))?;
    if min_scaled > max_scaled {
        return Err(TemplateError::InvertedRange(name.to_string()));
    }
    Ok(NumericRange {
        min_scaled,
        max_scaled,
        decimals,
    })
}

/// Serializes a template back into the DSL.
pub fn render_template(t: &Template) -> String {
    let mut out = String::new();
    out.push_str(&format!("@template {}\n", t.name));
    out.push_str("@emission_order count nodules report\n\n");
    let all = t
        .nodule_features
        .iter()
        .chain(t.report_features.iter())
        .chain(std::iter::once(&t.count_feature));
    for f in all {
        let (kind, cands) = match &f.candidates.kind {
            CandidateKind::Enumerated(v) => ("enum", v.join("; ")),
            CandidateKind::Integer(r) => (
                "integer",
                format!(
                    "{}..{}",
                    r.format_scaled(r.min_scaled),
                    r.format_scaled(r.max_scaled)
                ),
            ),
            CandidateKind::Float(r) => (
                "float",
                format!(
                    "{}..{}",
                    r.format_scaled(r.min_scaled),
                    r.format_scaled(r.max_scaled)
                ),
            ),
        };
        out.push_str(&format!(
            "{} | {} | {} | {} | {} | {}\n",
            f.name,
            f.display_name,
            f.level.as_str(),
            kind,
            cands,
            if f.candidates.nullable {
                "nullable"
            } else {
                "required"
            }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::LUNG_NODULE_TEMPLATE;

    const COUNT: &str =
        "number_of_nodules | Number of Nodules | auxiliary | integer | 0..50 | nullable\n";

    #[test]
    fn float_row() {
        let src = format!(
            "average_diameter_mm | Average Diameter (mm) | nodule | float | 0.00..200.00 | nullable\n{COUNT}"
        );
        let t = parse_template(&src).unwrap();
        let f = &t.nodule_features[0];
        assert!(f.candidates.nullable);
        match f.candidates.kind {
            CandidateKind::Float(r) => {
                assert_eq!(r.min_scaled, 0);
                assert_eq!(r.max_scaled, 20000);
                assert_eq!(r.decimals, 2);
            }
            ref k => panic!("unexpected kind {k:?}"),
        }
    }

    #[test]
    fn empty_enumerated_set() {
        let src = format!("lobe | Lobe | nodule | enum |  | nullable\n{COUNT}");
        let err = parse_template(&src).unwrap_err();
        assert_eq!(err, TemplateError::EmptyEnumerated("lobe".into()));
        assert!(err.to_string().contains("empty enumerated set"));
    }

    #[test]
    fn duplicate_feature() {
        let src = format!(
            "lobe | Lobe | nodule | enum | a | nullable\nlobe | Lobe | nodule | enum | b | nullable\n{COUNT}"
        );
        assert_eq!(
            parse_template(&src).unwrap_err(),
            TemplateError::DuplicateFeature("lobe".into())
        );
    }

    #[test]
    fn inverted_range() {
        let src = format!("x | X | nodule | integer | 9..3 | nullable\n{COUNT}");
        assert_eq!(
            parse_template(&src).unwrap_err(),
            TemplateError::InvertedRange("x".into())
        );
    }

    #[test]
    fn syntax_error_reports_position() {
        let src = format!("{COUNT}lobe | Lobe | organ | enum | a | nullable\n");
        match parse_template(&src).unwrap_err() {
            TemplateError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 15);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn requires_one_count_feature() {
        let src = "lobe | Lobe | nodule | enum | a | nullable\n";
        assert_eq!(
            parse_template(src).unwrap_err(),
            TemplateError::CountFeature(0)
        );
    }

    #[test]
    fn shipped_template_round_trips() {
        let t = parse_template(LUNG_NODULE_TEMPLATE).unwrap();
        let again = parse_template(&render_template(&t)).unwrap();
        assert_eq!(t, again);
        assert_eq!(t.name, "lung_nodule");
    }

    #[test]
    fn recommend_imaging_keeps_commas() {
        let t = parse_template(LUNG_NODULE_TEMPLATE).unwrap();
        let (_, f) = t.feature_by_name("recommend_imaging").unwrap();
        assert_eq!(f.candidates.values().len(), 16);
        assert_eq!(f.candidates.values()[1], "LDCT, PET/CT");
    }
}
