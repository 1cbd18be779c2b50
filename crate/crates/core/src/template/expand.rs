//! Expansion of a template into the flat segment list the decoder walks.

use super::{FeatureId, FeatureSpec, Template, TemplateError, NODULES_KEY};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    /// Literal output text.
    Format(String),
    /// A feature value; `descriptor` is set for nodule-level slots.
    Slot {
        feature: FeatureId,
        descriptor: Option<usize>,
    },
}

/// A template with its descriptor block replicated `descriptor_count` times.
///
/// Segments alternate strictly between format text and slots, beginning and
/// ending with format text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandedTemplate {
    pub descriptor_count: usize,
    pub segments: Vec<Segment>,
}

impl ExpandedTemplate {
    pub fn slots(&self) -> impl Iterator<Item = (FeatureId, Option<usize>)> + '_ {
        self.segments.iter().filter_map(|s| match s {
            Segment::Slot {
                feature,
                descriptor,
            } => Some((*feature, *descriptor)),
            Segment::Format(_) => None,
        })
    }

    /// The template text with each slot replaced by its special token.
    pub fn render_with_placeholders(&self, t: &Template) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Format(text) => out.push_str(text),
                Segment::Slot { feature, .. } => out.push_str(&t.feature(*feature).special_token()),
            }
        }
        out
    }
}

struct Builder {
    segments: Vec<Segment>,
    pending: String,
}

impl Builder {
    fn text(&mut self, s: &str) {
        self.pending.push_str(s);
    }

    fn slot(&mut self, spec: &FeatureSpec, feature: FeatureId, descriptor: Option<usize>) {
        let quoted = spec.candidates.is_enumerated();
        if quoted {
            self.pending.push('"');
        }
        self.segments
            .push(Segment::Format(std::mem::take(&mut self.pending)));
        self.segments.push(Segment::Slot {
            feature,
            descriptor,
        });
        if quoted {
            self.pending.push('"');
        }
    }

    fn finish(mut self) -> Vec<Segment> {
        self.segments.push(Segment::Format(self.pending));
        self.segments
    }
}

/// Expands `t` for `n` nodule descriptors. With `n == 0` the `nodules` key
/// is left out entirely.
pub fn instantiate(t: &Template, n: usize) -> Result<ExpandedTemplate, TemplateError> {
    let range = t.count_range();
    if (n as u64) > range.max_scaled {
        return Err(TemplateError::CountOutOfRange {
            requested: n as u64,
            min: 0,
            max: range.max_scaled,
        });
    }
    let mut b = Builder {
        segments: Vec::new(),
        pending: String::new(),
    };
    b.text(&format!("{{\"{}\": ", t.count_feature.name));
    b.slot(&t.count_feature, t.count_id(), None);

    if n > 0 {
        b.text(&format!(", \"{NODULES_KEY}\": ["));
        for d in 0..n {
            b.text(if d == 0 { "{" } else { ", {" });
            for (i, f) in t.nodule_features.iter().enumerate() {
                if i > 0 {
                    b.text(", ");
                }
                b.text(&format!("\"{}\": ", f.name));
                b.slot(f, t.nodule_id(i), Some(d));
            }
            b.text("}");
        }
        b.text("]");
    }
    for (i, f) in t.report_features.iter().enumerate() {
        b.text(&format!(", \"{}\": ", f.name));
        b.slot(f, t.report_id(i), None);
    }
    b.text("}");
    Ok(ExpandedTemplate {
        descriptor_count: n,
        segments: b.finish(),
    })
}
