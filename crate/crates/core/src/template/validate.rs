use std::fmt;

use super::{normalize_candidate, CandidateKind, Template};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateWarning {
    /// A candidate equal to an earlier one after normalization; the later
    /// copy can never be decoded.
    DuplicateCandidate {
        feature: String,
        candidate: String,
    },
    MissingNull {
        feature: String,
    },
}

impl fmt::Display for TemplateWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateWarning::DuplicateCandidate { feature, candidate } => {
                write!(f, "{feature}: duplicate candidate: {candidate}")
            }
            TemplateWarning::MissingNull { feature } => write!(f, "{feature}: missing null"),
        }
    }
}

pub fn validate_template(t: &Template) -> Vec<TemplateWarning> {
    let mut out = Vec::new();
    for (_, f) in t.features() {
        if let CandidateKind::Enumerated(values) = &f.candidates.kind {
            let mut seen: Vec<String> = Vec::with_capacity(values.len());
            for v in values {
                let n = normalize_candidate(v);
                if seen.contains(&n) {
                    out.push(TemplateWarning::DuplicateCandidate {
                        feature: f.name.clone(),
                        candidate: n,
                    });
                } else {
                    seen.push(n);
                }
            }
        }
        if !f.candidates.nullable {
            out.push(TemplateWarning::MissingNull {
                feature: f.name.clone(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::{CandidateSet, FeatureSpec, Level};

    fn with_lobe(values: &[&str], nullable: bool) -> Template {
        let mut t = Template::lung_nodule();
        t.nodule_features = vec![FeatureSpec {
            name: "lobe".into(),
            display_name: "Lobe".into(),
            level: Level::Nodule,
            candidates: CandidateSet::enumerated(values.iter().copied(), nullable),
        }];
        t.report_features.clear();
        t
    }

    #[test]
    fn printed_lobe_row_has_duplicate() {
        let t = with_lobe(
            &[
                "right upper lobe",
                "right middle lobe",
                "right lower lobe",
                "left upper lobe",
                "lingula",
                "right lower lobe",
            ],
            true,
        );
        let w = validate_template(&t);
        assert_eq!(w.len(), 1);
        assert!(w[0]
            .to_string()
            .contains("duplicate candidate: right lower lobe"));
    }

    #[test]
    fn shipped_template_is_clean() {
        assert!(validate_template(&Template::lung_nodule()).is_empty());
    }

    #[test]
    fn whitespace_normalization_duplicate() {
        let t = with_lobe(&["a", "a "], true);
        let w = validate_template(&t);
        assert_eq!(
            w,
            vec![TemplateWarning::DuplicateCandidate {
                feature: "lobe".into(),
                candidate: "a".into()
            }]
        );
    }

    #[test]
    fn case_is_significant() {
        let t = with_lobe(&["4A", "4a"], true);
        assert!(validate_template(&t).is_empty());
    }

    #[test]
    fn missing_null_and_purity() {
        let t = with_lobe(&["a"], false);
        let first = validate_template(&t);
        assert_eq!(
            first,
            vec![TemplateWarning::MissingNull {
                feature: "lobe".into()
            }]
        );
        assert_eq!(first, validate_template(&t));
    }
}
