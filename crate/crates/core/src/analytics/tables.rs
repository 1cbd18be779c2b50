use serde_json::{json, Value};

use super::{require_feature, units, AnalyticsError, Unit};
use crate::report::{Corpus, FeatureValue, Sex};
use crate::template::{Level, Template};

/// Row label for units whose value is null.
pub const NULL_ROW: &str = "null";

/// Percentage with one decimal, `0.0` for an empty denominator.
pub fn format_pct(count: u64, total: u64) -> String {
    if total == 0 {
        "0.0".to_string()
    } else {
        format!("{:.1}", count as f64 * 100.0 / total as f64)
    }
}

fn pct(count: u64, total: u64) -> f64 {
    format_pct(count, total).parse().expect("formatted number")
}

/// Half-open age interval `[lo, hi)`; `None` is unbounded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgeBin {
    pub label: String,
    pub lo: Option<u32>,
    pub hi: Option<u32>,
}

impl AgeBin {
    pub fn contains(&self, age: u32) -> bool {
        self.lo.is_none_or(|lo| age >= lo) && self.hi.is_none_or(|hi| age < hi)
    }

    fn overlaps(&self, o: &AgeBin) -> bool {
        let lo = self.lo.unwrap_or(0).max(o.lo.unwrap_or(0));
        let hi = self.hi.unwrap_or(u32::MAX).min(o.hi.unwrap_or(u32::MAX));
        lo < hi
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgeBins(Vec<AgeBin>);

impl AgeBins {
    pub fn new(bins: Vec<AgeBin>) -> Result<Self, AnalyticsError> {
        for (i, a) in bins.iter().enumerate() {
            for b in &bins[i + 1..] {
                if a.overlaps(b) {
                    return Err(AnalyticsError::OverlappingBins(
                        a.label.clone(),
                        b.label.clone(),
                    ));
                }
            }
        }
        Ok(AgeBins(bins))
    }

    /// Bins split at ascending cut points: `<c0`, `c0-c1`, ..., `>=cN`.
    pub fn from_cuts(cuts: &[u32]) -> Result<Self, AnalyticsError> {
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AnalyticsError::BadSpec(format!("{cuts:?}")));
        }
        let Some((&first, _)) = cuts.split_first() else {
            return AgeBins::new(vec![AgeBin {
                label: "all".into(),
                lo: None,
                hi: None,
            }]);
        };
        let mut bins = vec![AgeBin {
            label: format!("<{first}"),
            lo: None,
            hi: Some(first),
        }];
        for w in cuts.windows(2) {
            bins.push(AgeBin {
                label: format!("{}-{}", w[0], w[1]),
                lo: Some(w[0]),
                hi: Some(w[1]),
            });
        }
        let last = *cuts.last().expect("non-empty");
        bins.push(AgeBin {
            label: format!(">={last}"),
            lo: Some(last),
            hi: None,
        });
        AgeBins::new(bins)
    }

    pub fn bins(&self) -> &[AgeBin] {
        &self.0
    }

    fn index(&self, age: u32) -> Option<usize> {
        self.0.iter().position(|b| b.contains(age))
    }
}

impl Default for AgeBins {
    /// `<55`, `55-65`, `65-75`, `>=75`.
    fn default() -> Self {
        AgeBins::from_cuts(&[55, 65, 75]).expect("ascending cuts")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stratum {
    pub label: String,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratifiedRow {
    pub value: String,
    pub total: u64,
    /// One count per stratum.
    pub counts: Vec<u64>,
}

/// Counts of one feature's values per age (and optionally sex) stratum.
/// Units that fit no stratum land in a trailing `unknown` stratum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratifiedTable {
    pub feature: String,
    pub level: Level,
    pub total: u64,
    pub strata: Vec<Stratum>,
    pub rows: Vec<StratifiedRow>,
}

fn value_key(v: &FeatureValue) -> String {
    if v.is_null() {
        NULL_ROW.to_string()
    } else {
        v.to_string()
    }
}

/// Row labels: candidates in template order, or observed numbers ascending,
/// then [`NULL_ROW`].
fn row_values(t: &Template, feature: &str, us: &[Unit<'_>]) -> Vec<String> {
    let (_, spec) = t.feature_by_name(feature).expect("checked feature");
    let mut rows = if spec.candidates.is_enumerated() {
        spec.candidates.distinct_values()
    } else {
        let mut nums: Vec<f64> = us
            .iter()
            .filter_map(|u| u.value(t, feature).as_number())
            .collect();
        nums.sort_by(f64::total_cmp);
        nums.dedup();
        nums.into_iter()
            .map(|n| FeatureValue::Number(n).to_string())
            .collect()
    };
    rows.push(NULL_ROW.to_string());
    rows
}

pub fn stratified_counts(
    c: &Corpus,
    t: &Template,
    feature: &str,
    bins: &AgeBins,
    by_sex: bool,
) -> Result<StratifiedTable, AnalyticsError> {
    let level = match require_feature(t, feature)? {
        Level::Nodule => Level::Nodule,
        _ => Level::Report,
    };
    let us = units(c.iter(), level);
    let sexes: &[(Sex, &str)] = if by_sex {
        &[(Sex::Male, "M"), (Sex::Female, "F")]
    } else {
        &[]
    };
    let mut labels = Vec::new();
    for b in bins.bins() {
        if sexes.is_empty() {
            labels.push(b.label.clone());
        }
        for (_, s) in sexes {
            labels.push(format!("{} {s}", b.label));
        }
    }
    let per_bin = sexes.len().max(1);
    let stratum_of = |u: &Unit<'_>| -> Option<usize> {
        let bin = bins.index(u.report.meta.age_years?)?;
        if sexes.is_empty() {
            return Some(bin);
        }
        let s = sexes.iter().position(|(x, _)| *x == u.report.meta.sex)?;
        Some(bin * per_bin + s)
    };
    let unknown = labels.len();
    let assigned: Vec<usize> = us
        .iter()
        .map(|u| stratum_of(u).unwrap_or(unknown))
        .collect();
    if assigned.contains(&unknown) {
        labels.push("unknown".into());
    }

    let values = row_values(t, feature, &us);
    let mut rows: Vec<StratifiedRow> = values
        .into_iter()
        .map(|v| StratifiedRow {
            value: v,
            total: 0,
            counts: vec![0; labels.len()],
        })
        .collect();
    let mut strata: Vec<Stratum> = labels
        .into_iter()
        .map(|label| Stratum { label, total: 0 })
        .collect();
    for (u, &s) in us.iter().zip(&assigned) {
        let key = value_key(&u.value(t, feature));
        strata[s].total += 1;
        if let Some(row) = rows.iter_mut().find(|r| r.value == key) {
            row.total += 1;
            row.counts[s] += 1;
        }
    }
    Ok(StratifiedTable {
        feature: feature.to_string(),
        level,
        total: us.len() as u64,
        strata,
        rows,
    })
}

impl StratifiedTable {
    pub fn row(&self, value: &str) -> Option<&StratifiedRow> {
        self.rows.iter().find(|r| r.value == value)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "feature": self.feature,
            "unit": if self.level == Level::Nodule { "nodule" } else { "report" },
            "total": self.total,
            "strata": self.strata.iter().map(|s| json!({
                "label": s.label,
                "total": s.total,
                "pct": pct(s.total, self.total),
            })).collect::<Vec<_>>(),
            "rows": self.rows.iter().map(|r| json!({
                "value": r.value,
                "total": r.total,
                "pct": pct(r.total, self.total),
                "cells": r.counts.iter().zip(&self.strata).map(|(&n, s)| json!({
                    "count": n,
                    "pct": pct(n, s.total),
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }

    /// `value,Total,<strata...>` with cells written as `count (pct)`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.feature.clone(), "Total".to_string()];
        header.extend(self.strata.iter().map(|s| s.label.clone()));
        w.write_record(&header).expect("in-memory write");
        let mut total = vec!["Total".to_string(), format!("{} (100.0)", self.total)];
        total.extend(
            self.strata
                .iter()
                .map(|s| format!("{} ({})", s.total, format_pct(s.total, self.total))),
        );
        w.write_record(&total).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![
                r.value.clone(),
                format!("{} ({})", r.total, format_pct(r.total, self.total)),
            ];
            rec.extend(
                r.counts
                    .iter()
                    .zip(&self.strata)
                    .map(|(&n, s)| format!("{n} ({})", format_pct(n, s.total))),
            );
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColKind {
    Value(FeatureValue),
    /// `[lo, hi)`; `None` is unbounded.
    Range(Option<f64>, Option<f64>),
}

/// One cross-tab column: a candidate value or a numeric bin of a feature.
#[derive(Debug, Clone, PartialEq)]
pub struct ColSpec {
    pub feature: String,
    pub label: String,
    pub kind: ColKind,
}

fn num(s: &str, whole: &str) -> Result<f64, AnalyticsError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| AnalyticsError::BadSpec(whole.to_string()))
}

impl ColSpec {
    /// `feature:value`, or for numeric features `feature:<6`,
    /// `feature:6-10` (half-open) and `feature:>=10`.
    pub fn parse(t: &Template, spec: &str) -> Result<ColSpec, AnalyticsError> {
        let (feature, rest) = spec
            .split_once(':')
            .ok_or_else(|| AnalyticsError::BadSpec(spec.to_string()))?;
        let feature = feature.trim();
        let rest = rest.trim();
        let (_, f) = t
            .feature_by_name(feature)
            .ok_or_else(|| AnalyticsError::UnknownFeature(feature.to_string()))?;
        let kind = if f.candidates.is_enumerated() {
            if !f.candidates.contains_text(rest) {
                return Err(AnalyticsError::BadSpec(spec.to_string()));
            }
            ColKind::Value(FeatureValue::Text(rest.to_string()))
        } else if let Some(v) = rest.strip_prefix(">=").or_else(|| rest.strip_prefix('≥')) {
            ColKind::Range(Some(num(v, spec)?), None)
        } else if let Some(v) = rest.strip_prefix('<') {
            ColKind::Range(None, Some(num(v, spec)?))
        } else if let Some((lo, hi)) = rest.split_once('-') {
            let (lo, hi) = (num(lo, spec)?, num(hi, spec)?);
            if lo >= hi {
                return Err(AnalyticsError::BadSpec(spec.to_string()));
            }
            ColKind::Range(Some(lo), Some(hi))
        } else {
            ColKind::Value(FeatureValue::Number(num(rest, spec)?))
        };
        Ok(ColSpec {
            feature: feature.to_string(),
            label: rest.to_string(),
            kind,
        })
    }

    pub fn matches(&self, v: &FeatureValue) -> bool {
        match &self.kind {
            ColKind::Value(want) => !v.is_null() && v.matches(want),
            ColKind::Range(lo, hi) => v
                .as_number()
                .is_some_and(|x| lo.is_none_or(|lo| x >= lo) && hi.is_none_or(|hi| x < hi)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossTabRow {
    pub value: String,
    pub total: u64,
    pub counts: Vec<u64>,
}

/// Row-feature values against column specs; percentages are within rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossTab {
    pub row_feature: String,
    pub columns: Vec<ColSpec>,
    pub rows: Vec<CrossTabRow>,
}

/// Rows are the non-null values of `row_feature`. Report-level column
/// values are shared by every descriptor of their report.
pub fn crosstab(
    c: &Corpus,
    t: &Template,
    row_feature: &str,
    cols: &[ColSpec],
) -> Result<CrossTab, AnalyticsError> {
    let row_level = match require_feature(t, row_feature)? {
        Level::Nodule => Level::Nodule,
        _ => Level::Report,
    };
    for col in cols {
        let l = require_feature(t, &col.feature)?;
        if row_level == Level::Report && l == Level::Nodule {
            return Err(AnalyticsError::MixedLevels {
                row: row_feature.to_string(),
                col: col.feature.clone(),
            });
        }
    }
    let us = units(c.iter(), row_level);
    let mut values = row_values(t, row_feature, &us);
    values.pop();
    let mut rows: Vec<CrossTabRow> = values
        .into_iter()
        .map(|v| CrossTabRow {
            value: v,
            total: 0,
            counts: vec![0; cols.len()],
        })
        .collect();
    for u in &us {
        let key = value_key(&u.value(t, row_feature));
        let Some(row) = rows.iter_mut().find(|r| r.value == key) else {
            continue;
        };
        row.total += 1;
        for (k, col) in cols.iter().enumerate() {
            if col.matches(&u.value(t, &col.feature)) {
                row.counts[k] += 1;
            }
        }
    }
    Ok(CrossTab {
        row_feature: row_feature.to_string(),
        columns: cols.to_vec(),
        rows,
    })
}

impl CrossTab {
    pub fn row(&self, value: &str) -> Option<&CrossTabRow> {
        self.rows.iter().find(|r| r.value == value)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "row_feature": self.row_feature,
            "columns": self.columns.iter().map(|c| json!({
                "feature": c.feature,
                "label": c.label,
            })).collect::<Vec<_>>(),
            "rows": self.rows.iter().map(|r| json!({
                "value": r.value,
                "total": r.total,
                "cells": r.counts.iter().map(|&n| json!({
                    "count": n,
                    "pct": pct(n, r.total),
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.row_feature.clone(), "Total".to_string()];
        header.extend(
            self.columns
                .iter()
                .map(|c| format!("{}:{}", c.feature, c.label)),
        );
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.value.clone(), r.total.to_string()];
            rec.extend(
                r.counts
                    .iter()
                    .map(|&n| format!("{n} ({})", format_pct(n, r.total))),
            );
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{synth_corpus, Marginals, NoduleDescriptor, StructuredReport};
    use proptest::prelude::*;

    fn t() -> Template {
        Template::lung_nodule()
    }

    #[test]
    fn default_bins() {
        let b = AgeBins::default();
        let labels: Vec<_> = b.bins().iter().map(|b| b.label.as_str()).collect();
        assert_eq!(labels, ["<55", "55-65", "65-75", ">=75"]);
        assert_eq!(b.index(54), Some(0));
        assert_eq!(b.index(55), Some(1));
        assert_eq!(b.index(90), Some(3));
    }

    #[test]
    fn overlapping_bins_rejected() {
        let a = AgeBin {
            label: "a".into(),
            lo: None,
            hi: Some(60),
        };
        let b = AgeBin {
            label: "b".into(),
            lo: Some(50),
            hi: None,
        };
        assert_eq!(
            AgeBins::new(vec![a, b]),
            Err(AnalyticsError::OverlappingBins("a".into(), "b".into()))
        );
    }

    #[test]
    fn empty_corpus_all_zero() {
        let tab =
            stratified_counts(&Corpus::new(), &t(), "lobe", &AgeBins::default(), true).unwrap();
        assert_eq!(tab.total, 0);
        assert_eq!(tab.strata.len(), 8);
        assert!(tab
            .rows
            .iter()
            .all(|r| r.total == 0 && r.counts.iter().all(|&c| c == 0)));
    }

    #[test]
    fn single_nodule_single_cell() {
        let mut d = NoduleDescriptor::all_null(&t());
        d.set("lobe", FeatureValue::Text("lingula".into()));
        let mut r = StructuredReport {
            number_of_nodules: Some(1),
            nodules: vec![d],
            ..Default::default()
        };
        r.meta.report_id = "x".into();
        r.meta.age_years = Some(60);
        r.meta.sex = Sex::Female;
        let c = Corpus::from_reports(vec![r]).unwrap();
        let tab = stratified_counts(&c, &t(), "lobe", &AgeBins::default(), true).unwrap();
        let nonzero: Vec<_> = tab
            .rows
            .iter()
            .flat_map(|r| {
                r.counts
                    .iter()
                    .enumerate()
                    .map(move |(i, &n)| (r.value.clone(), i, n))
            })
            .filter(|x| x.2 > 0)
            .collect();
        assert_eq!(nonzero, vec![("lingula".to_string(), 3, 1)]);
        assert_eq!(tab.strata[3].label, "55-65 F");
    }

    #[test]
    fn col_spec_parsing() {
        let t = t();
        let s = ColSpec::parse(&t, "average_diameter_mm:6-10").unwrap();
        assert!(s.matches(&FeatureValue::Number(6.0)));
        assert!(!s.matches(&FeatureValue::Number(10.0)));
        assert!(!s.matches(&FeatureValue::Null));
        assert!(ColSpec::parse(&t, "average_diameter_mm:>=10")
            .unwrap()
            .matches(&FeatureValue::Number(10.0)));
        assert!(ColSpec::parse(&t, "average_diameter_mm:<6")
            .unwrap()
            .matches(&FeatureValue::Number(5.99)));
        assert!(ColSpec::parse(&t, "lobe:lingula").is_ok());
        assert!(matches!(
            ColSpec::parse(&t, "lobe:nowhere"),
            Err(AnalyticsError::BadSpec(_))
        ));
        assert!(matches!(
            ColSpec::parse(&t, "nope:1"),
            Err(AnalyticsError::UnknownFeature(_))
        ));
        assert!(matches!(
            ColSpec::parse(&t, "average_diameter_mm:10-6"),
            Err(AnalyticsError::BadSpec(_))
        ));
        let row = crosstab(
            &Corpus::new(),
            &t,
            "overall_lung_rads",
            &[ColSpec::parse(&t, "lobe:lingula").unwrap()],
        );
        assert!(matches!(row, Err(AnalyticsError::MixedLevels { .. })));
    }

    #[test]
    fn emitters() {
        let c = synth_corpus(&t(), 1, 30, &Marginals::table3_defaults()).unwrap();
        let tab =
            stratified_counts(&c, &t(), "recommend_imaging", &AgeBins::default(), false).unwrap();
        let csv = tab.to_csv();
        assert!(csv.starts_with("recommend_imaging,Total,<55,55-65,65-75,>=75"));
        assert!(csv.contains("\"LDCT, PET/CT\""));
        let j = tab.to_json();
        assert_eq!(j["unit"], "report");
        assert_eq!(j["total"], 30);
        let cols = [
            "average_diameter_mm:<6",
            "average_diameter_mm:6-10",
            "average_diameter_mm:>=10",
        ]
        .map(|s| ColSpec::parse(&t(), s).unwrap());
        let x = crosstab(&c, &t(), "type", &cols).unwrap();
        assert!(x.to_csv().starts_with("type,Total,average_diameter_mm:<6"));
        assert_eq!(x.to_json()["rows"].as_array().unwrap().len(), 13);
    }

    #[test]
    fn bins_covering_nothing() {
        let c = synth_corpus(&t(), 2, 50, &Marginals::table3_defaults()).unwrap();
        let col = ColSpec::parse(&t(), "average_diameter_mm:500-600").unwrap();
        let x = crosstab(&c, &t(), "type", &[col]).unwrap();
        assert!(x.rows.iter().all(|r| r.counts[0] == 0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn row_percentages_at_most_100(seed in any::<u64>(), n in 0usize..80) {
            let c = synth_corpus(&t(), seed, n, &Marginals::table3_defaults()).unwrap();
            let groups: [&[&str]; 2] = [
                &["average_diameter_mm:<6", "average_diameter_mm:6-10", "average_diameter_mm:>=10"],
                &["lobe:right upper lobe", "lobe:right middle lobe", "lobe:right lower lobe",
                  "lobe:left upper lobe", "lobe:lingula", "lobe:left lower lobe"],
            ];
            for g in groups {
                let cols: Vec<ColSpec> = g.iter().map(|s| ColSpec::parse(&t(), s).unwrap()).collect();
                let x = crosstab(&c, &t(), "type", &cols).unwrap();
                for r in &x.rows {
                    let sum: f64 = r.counts.iter().map(|&k| k as f64 * 100.0 / r.total.max(1) as f64).sum();
                    prop_assert!(sum <= 100.0 + 1e-9);
                }
            }
        }

        #[test]
        fn cells_sum_to_totals(seed in any::<u64>(), n in 0usize..80, by_sex in any::<bool>()) {
            let c = synth_corpus(&t(), seed, n, &Marginals::table3_defaults()).unwrap();
            for f in ["lobe", "overall_lung_rads", "average_diameter_mm"] {
                let tab = stratified_counts(&c, &t(), f, &AgeBins::default(), by_sex).unwrap();
                for r in &tab.rows {
                    prop_assert_eq!(r.counts.iter().sum::<u64>(), r.total);
                }
                prop_assert_eq!(tab.rows.iter().map(|r| r.total).sum::<u64>(), tab.total);
                prop_assert_eq!(tab.strata.iter().map(|s| s.total).sum::<u64>(), tab.total);
            }
        }
    }
}
