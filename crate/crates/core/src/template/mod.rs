//! Report templates: the declarative feature schema that drives decoding,
//! validation, and querying.
//!
//! A [`Template`] lists nodule-level features (one descriptor block per
//! nodule), report-level features, and a single auxiliary count feature that
//! decides how many descriptor blocks the output holds.

mod dsl;
mod expand;
mod random;
mod validate;

pub use dsl::{parse_template, render_template};
pub use expand::{instantiate, ExpandedTemplate, Segment};
pub use random::{random_template, RandomTemplateParams};
pub use validate::validate_template;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The shipped lung-nodule template source.
pub const LUNG_NODULE_TEMPLATE: &str = include_str!("../../templates/lung_nodule.template");

/// Key under which the nodule descriptor array is emitted.
pub const NODULES_KEY: &str = "nodules";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate feature name: {0}")]
    DuplicateFeature(String),
    #[error("empty enumerated set for feature {0}")]
    EmptyEnumerated(String),
    #[error("min > max for feature {0}")]
    InvertedRange(String),
    #[error("template must declare exactly one auxiliary count feature, found {0}")]
    CountFeature(usize),
    #[error("count feature {0} must be an integer range")]
    CountKind(String),
    #[error("count out of range: {requested} not in {min}..={max}")]
    CountOutOfRange { requested: u64, min: u64, max: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Nodule,
    Report,
    Auxiliary,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Nodule => "nodule",
            Level::Report => "report",
            Level::Auxiliary => "auxiliary",
        }
    }
}

/// Inclusive non-negative decimal range held as integers scaled by
/// `10^decimals`, so bounds such as `0.00..200.00` compare exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NumericRange {
    pub min_scaled: u64,
    pub max_scaled: u64,
    pub decimals: u32,
}

impl NumericRange {
    pub fn integer(min: u64, max: u64) -> Self {
        NumericRange {
            min_scaled: min,
            max_scaled: max,
            decimals: 0,
        }
    }

    pub fn scale(&self) -> u64 {
        10u64.pow(self.decimals)
    }

    pub fn min(&self) -> f64 {
        self.min_scaled as f64 / self.scale() as f64
    }

    pub fn max(&self) -> f64 {
        self.max_scaled as f64 / self.scale() as f64
    }

    /// Whether `value` lies in range and has no more than `decimals`
    /// fractional digits.
    pub fn contains(&self, value: f64) -> bool {
        if !value.is_finite() || value < 0.0 {
            return false;
        }
        let scaled = value * self.scale() as f64;
        let rounded = scaled.round();
        if (scaled - rounded).abs() > 1e-6 * scaled.abs().max(1.0) {
            return false;
        }
        let r = rounded as u64;
        r >= self.min_scaled && r <= self.max_scaled
    }

    /// Bound formatted with exactly `decimals` fractional digits.
    pub fn format_scaled(&self, scaled: u64) -> String {
        if self.decimals == 0 {
            return scaled.to_string();
        }
        let scale = self.scale();
        format!(
            "{}.{:0width$}",
            scaled / scale,
            scaled % scale,
            width = self.decimals as usize
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CandidateKind {
    Enumerated(Vec<String>),
    Integer(NumericRange),
    Float(NumericRange),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub kind: CandidateKind,
    pub nullable: bool,
}

impl CandidateSet {
    pub fn enumerated<I, S>(values: I, nullable: bool) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        CandidateSet {
            kind: CandidateKind::Enumerated(values.into_iter().map(Into::into).collect()),
            nullable,
        }
    }

    pub fn integer(min: u64, max: u64, nullable: bool) -> Self {
        CandidateSet {
            kind: CandidateKind::Integer(NumericRange::integer(min, max)),
            nullable,
        }
    }

    pub fn float(range: NumericRange, nullable: bool) -> Self {
        CandidateSet {
            kind: CandidateKind::Float(range),
            nullable,
        }
    }

    pub fn is_enumerated(&self) -> bool {
        matches!(self.kind, CandidateKind::Enumerated(_))
    }

    pub fn is_numeric(&self) -> bool {
        !self.is_enumerated()
    }

    pub fn values(&self) -> &[String] {
        match &self.kind {
            CandidateKind::Enumerated(v) => v,
            _ => &[],
        }
    }

    pub fn range(&self) -> Option<&NumericRange> {
        match &self.kind {
            CandidateKind::Integer(r) | CandidateKind::Float(r) => Some(r),
            CandidateKind::Enumerated(_) => None,
        }
    }

    /// Normalized candidates in declaration order with later duplicates
    /// dropped.
    pub fn distinct_values(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for v in self.values() {
            let n = normalize_candidate(v);
            if !out.contains(&n) {
                out.push(n);
            }
        }
        out
    }

    /// Whether `text` (already normalized) names one of the candidates.
    pub fn contains_text(&self, text: &str) -> bool {
        self.values().iter().any(|v| normalize_candidate(v) == text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub name: String,
    pub display_name: String,
    pub level: Level,
    pub candidates: CandidateSet,
}

impl FeatureSpec {
    /// Placeholder text marking this feature's slot in the prompt template.
    pub fn special_token(&self) -> String {
        format!("<{}>", self.name)
    }

    /// Display name lower-cased with any parenthesized unit removed, e.g.
    /// `Average Diameter (mm)` becomes `average diameter`.
    pub fn label(&self) -> String {
        let mut out = String::new();
        let mut depth = 0usize;
        for ch in self.display_name.chars() {
            match ch {
                '(' => depth += 1,
                ')' => depth = depth.saturating_sub(1),
                _ if depth == 0 => out.extend(ch.to_lowercase()),
                _ => {}
            }
        }
        normalize_candidate(&out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmissionOrder {
    /// Count first, then the descriptor array, then report-level features.
    #[default]
    CountNodulesReport,
}

/// Index of a feature in [`Template::features`] order: nodule features,
/// then report features, then the count feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub name: String,
    pub nodule_features: Vec<FeatureSpec>,
    pub report_features: Vec<FeatureSpec>,
    pub count_feature: FeatureSpec,
    pub emission_order: EmissionOrder,
}

impl Template {
    /// The shipped lung-nodule template.
    pub fn lung_nodule() -> Template {
        parse_template(LUNG_NODULE_TEMPLATE).expect("shipped template parses")
    }

    pub fn feature_count(&self) -> usize {
        self.nodule_features.len() + self.report_features.len() + 1
    }

    pub fn features(&self) -> impl Iterator<Item = (FeatureId, &FeatureSpec)> {
        self.nodule_features
            .iter()
            .chain(self.report_features.iter())
            .chain(std::iter::once(&self.count_feature))
            .enumerate()
            .map(|(i, f)| (FeatureId(i), f))
    }

    /// Every feature except the auxiliary count.
    pub fn evaluated_features(&self) -> impl Iterator<Item = &FeatureSpec> {
        self.nodule_features
            .iter()
            .chain(self.report_features.iter())
    }

    pub fn feature(&self, id: FeatureId) -> &FeatureSpec {
        let n = self.nodule_features.len();
        let r = self.report_features.len();
        match id.0 {
            i if i < n => &self.nodule_features[i],
            i if i < n + r => &self.report_features[i - n],
            i if i == n + r => &self.count_feature,
            i => panic!("feature id {i} out of range"),
        }
    }

    pub fn count_id(&self) -> FeatureId {
        FeatureId(self.nodule_features.len() + self.report_features.len())
    }

    pub fn nodule_id(&self, index: usize) -> FeatureId {
        FeatureId(index)
    }

    pub fn report_id(&self, index: usize) -> FeatureId {
        FeatureId(self.nodule_features.len() + index)
    }

    pub fn feature_by_name(&self, name: &str) -> Option<(FeatureId, &FeatureSpec)> {
        self.features().find(|(_, f)| f.name == name)
    }

    pub fn max_count(&self) -> u64 {
        self.count_range().max_scaled
    }

    pub fn count_range(&self) -> NumericRange {
        *self
            .count_feature
            .candidates
            .range()
            .expect("count feature is an integer range")
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_template(self))
    }
}

/// Trim and collapse internal whitespace runs; comparison stays
/// case-sensitive.
pub fn normalize_candidate(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
