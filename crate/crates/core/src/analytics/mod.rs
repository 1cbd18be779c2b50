//! Evaluation and descriptive statistics over corpora of structured reports.

mod align;
mod eval;
mod stats;
mod tables;

use thiserror::Error;

use crate::report::{FeatureValue, StructuredReport};
use crate::template::{Level, Template};

pub use align::{align_descriptors, AlignedPair, NODULE_ID};
pub use eval::{
    bootstrap_ci, compare, evaluate, feature_counts, feature_f1, paired_outcome, Counts,
    EvalOptions, EvalReport, FeatureScore, PairedOutcome, PairedResult, DEFAULT_RESAMPLES,
    DEFAULT_SEED,
};
pub use stats::{mcnemar, mcnemar_chi2, mcnemar_exact, two_proportion_ztest, EXACT_LIMIT};
pub use tables::{
    crosstab, format_pct, stratified_counts, AgeBin, AgeBins, ColKind, ColSpec, CrossTab,
    CrossTabRow, StratifiedRow, StratifiedTable, Stratum, NULL_ROW,
};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("corpora differ in length: {pred} predicted vs {gold} gold reports")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("report {index}: predicted id {pred:?} does not match gold id {gold:?}")]
    ReportMismatch {
        index: usize,
        pred: String,
        gold: String,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("at least 100 bootstrap resamples are required, got {0}")]
    TooFewResamples(usize),
    #[error("age bins {0} and {1} overlap")]
    OverlappingBins(String, String),
    #[error("invalid bin spec {0:?}")]
    BadSpec(String),
    #[error("sample sizes must be at least 1")]
    EmptySample,
    #[error("successes {x} exceed sample size {n}")]
    InvalidCount { x: u64, n: u64 },
    #[error("column feature {col:?} is nodule-level but rows {row:?} are report-level")]
    MixedLevels { row: String, col: String },
}

/// Counting unit: a descriptor for nodule-level features, a report otherwise.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Unit<'a> {
    pub report: &'a StructuredReport,
    pub descriptor: Option<usize>,
}

impl<'a> Unit<'a> {
    /// Value of `feature` for this unit. Report-level values are shared by
    /// all descriptors of the report.
    pub fn value(&self, t: &Template, feature: &str) -> FeatureValue {
        value_of(t, self.report, self.descriptor, feature)
    }
}

pub(crate) fn value_of(
    t: &Template,
    r: &StructuredReport,
    descriptor: Option<usize>,
    feature: &str,
) -> FeatureValue {
    if feature == t.count_feature.name {
        return r
            .number_of_nodules
            .map_or(FeatureValue::Null, |n| FeatureValue::Number(n as f64));
    }
    match (level_of(t, feature), descriptor) {
        (Some(Level::Nodule), Some(d)) => r
            .nodules
            .get(d)
            .map_or(FeatureValue::Null, |n| n.get(feature).clone()),
        (Some(Level::Report), _) => r.report_value(feature).clone(),
        _ => FeatureValue::Null,
    }
}

pub(crate) fn level_of(t: &Template, feature: &str) -> Option<Level> {
    t.feature_by_name(feature).map(|(_, f)| f.level)
}

pub(crate) fn require_feature(t: &Template, feature: &str) -> Result<Level, AnalyticsError> {
    level_of(t, feature).ok_or_else(|| AnalyticsError::UnknownFeature(feature.to_string()))
}

/// Descriptors of every report for nodule-level features, whole reports
/// otherwise.
pub(crate) fn units<'a>(
    reports: impl IntoIterator<Item = &'a StructuredReport>,
    level: Level,
) -> Vec<Unit<'a>> {
    let mut out = Vec::new();
    for r in reports {
        if level == Level::Nodule {
            out.extend((0..r.nodules.len()).map(|d| Unit {
                report: r,
                descriptor: Some(d),
            }));
        } else {
            out.push(Unit {
                report: r,
                descriptor: None,
            });
        }
    }
    out
}
