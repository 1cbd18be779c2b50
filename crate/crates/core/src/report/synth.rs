//! Deterministic synthetic corpora with configurable feature marginals.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{Corpus, FeatureValue, NoduleDescriptor, ReportMeta, Sex, StructuredReport};
use crate::template::{normalize_candidate, CandidateKind, FeatureSpec, NumericRange, Template};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("marginal for unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("marginal for {0:?}: only enumerated features take marginals")]
    NotEnumerated(String),
    #[error("marginal for {feature:?} references unknown candidate {candidate:?}")]
    UnknownCandidate { feature: String, candidate: String },
    #[error("marginal for {feature:?} sums to {sum}, expected 1")]
    BadSum { feature: String, sum: f64 },
}

/// Per-feature categorical distributions. `None` is the null outcome.
/// Features without an entry fall back to a default generator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Marginals {
    pub features: IndexMap<String, Vec<(Option<String>, f64)>>,
}

/// Age bins and sex strata of the unlabeled screening cohort, with report
/// counts per (bin, sex).
const COHORT: [((u32, u32), Sex, u32); 8] = [
    ((45, 55), Sex::Male, 37),
    ((45, 55), Sex::Female, 72),
    ((55, 65), Sex::Male, 1122),
    ((55, 65), Sex::Female, 1162),
    ((65, 75), Sex::Male, 1185),
    ((65, 75), Sex::Female, 1200),
    ((75, 86), Sex::Male, 205),
    ((75, 86), Sex::Female, 209),
];

/// Descriptors per report; mean close to 10377 / 5192.
const COUNT_WEIGHTS: [f64; 6] = [0.12, 0.30, 0.25, 0.15, 0.10, 0.08];

/// Average-diameter bins (mm) with their shares among sized nodules.
const DIAMETER_BINS: [(f64, f64, f64); 4] = [
    (1.0, 6.0, 6004.0),
    (6.0, 10.0, 1226.0),
    (10.0, 15.0, 246.0),
    (15.0, 30.0, 104.0),
];

fn counts(total: f64, items: &[(&str, f64)]) -> Vec<(Option<String>, f64)> {
    let mut out: Vec<(Option<String>, f64)> = items
        .iter()
        .map(|(c, n)| (Some(c.to_string()), n / total))
        .collect();
    let named: f64 = items.iter().map(|(_, n)| n).sum();
    out.push((None, (total - named) / total));
    out
}

impl Marginals {
    /// Lobe, lung, type and overall Lung-RADS shares of a reference
    /// screening cohort; the residual mass goes to null.
    pub fn table3_defaults() -> Self {
        let nodules = 10377.0;
        let mut features = IndexMap::new();
        features.insert(
            "lobe".to_string(),
            counts(
                nodules,
                &[
                    ("left upper lobe", 1687.0),
                    ("lingula", 210.0),
                    ("left lower lobe", 1385.0),
                    ("right upper lobe", 2460.0),
                    ("right middle lobe", 783.0),
                    ("right lower lobe", 1543.0),
                ],
            ),
        );
        features.insert(
            "lung".to_string(),
            counts(nodules, &[("left", 3523.0), ("right", 5194.0)]),
        );
        features.insert(
            "type".to_string(),
            counts(
                nodules,
                &[
                    ("ground glass", 696.0),
                    ("part-solid", 203.0),
                    ("solid", 2027.0),
                ],
            ),
        );
        features.insert(
            "overall_lung_rads".to_string(),
            counts(
                5192.0,
                &[
                    ("0", 52.0),
                    ("1", 1162.0),
                    ("2", 3427.0),
                    ("3", 238.0),
                    ("4A", 167.0),
                    ("4B", 85.0),
                    ("4X", 18.0),
                ],
            ),
        );
        Marginals { features }
    }

    pub fn validate(&self, t: &Template) -> Result<(), SynthError> {
        for (name, dist) in &self.features {
            let (_, spec) = t
                .feature_by_name(name)
                .ok_or_else(|| SynthError::UnknownFeature(name.clone()))?;
            if !spec.candidates.is_enumerated() {
                return Err(SynthError::NotEnumerated(name.clone()));
            }
            for (c, _) in dist {
                let ok = match c {
                    None => spec.candidates.nullable,
                    Some(c) => spec.candidates.contains_text(&normalize_candidate(c)),
                };
                if !ok {
                    return Err(SynthError::UnknownCandidate {
                        feature: name.clone(),
                        candidate: c.clone().unwrap_or_else(|| "null".into()),
                    });
                }
            }
            let sum: f64 = dist.iter().map(|(_, p)| p).sum();
            if (sum - 1.0).abs() > 1e-6 || dist.iter().any(|(_, p)| *p < 0.0) {
                return Err(SynthError::BadSum {
                    feature: name.clone(),
                    sum,
                });
            }
        }
        Ok(())
    }
}

fn pick_weighted<R: Rng>(rng: &mut R, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let mut x = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if x < w {
            return i;
        }
        x -= w;
        last = i;
    }
    last
}

/// Uniform scaled value in `[lo, hi)` (real units) clipped to `range`, with
/// one decimal of precision where the range allows it.
fn draw_in<R: Rng>(rng: &mut R, range: &NumericRange, lo: f64, hi: f64) -> f64 {
    let step = if range.decimals == 0 { 1.0 } else { 0.1 };
    let lo = lo.max(range.min());
    let hi = hi.min(range.max());
    if hi <= lo {
        return lo;
    }
    let steps = ((hi - lo) / step).floor() as u64;
    if steps == 0 {
        return lo;
    }
    let v = lo + rng.random_range(0..steps) as f64 * step;
    (v * 10.0).round() / 10.0
}

fn default_value<R: Rng>(rng: &mut R, spec: &FeatureSpec, index: usize) -> FeatureValue {
    let cs = &spec.candidates;
    let null_p = match cs.kind {
        CandidateKind::Enumerated(_) => 0.4,
        _ => 0.27,
    };
    if cs.nullable && rng.random::<f64>() < null_p {
        return FeatureValue::Null;
    }
    match &cs.kind {
        CandidateKind::Enumerated(_) => {
            let values = cs.distinct_values();
            FeatureValue::Text(values[rng.random_range(0..values.len())].clone())
        }
        CandidateKind::Integer(r) => {
            if spec.name == "nodule_id" && r.contains((index + 1) as f64) {
                return FeatureValue::Number((index + 1) as f64);
            }
            let hi = r.max_scaled.min(r.min_scaled + 400);
            FeatureValue::Number(rng.random_range(r.min_scaled..=hi) as f64)
        }
        CandidateKind::Float(r) => {
            if spec.name.ends_with("_mm") {
                let b = pick_weighted(rng, DIAMETER_BINS.iter().map(|b| b.2));
                let (lo, hi, _) = DIAMETER_BINS[b];
                FeatureValue::Number(draw_in(rng, r, lo, hi))
            } else {
                FeatureValue::Number(draw_in(rng, r, r.min(), r.min() + 2000.0))
            }
        }
    }
}

fn sample_feature<R: Rng>(
    rng: &mut R,
    spec: &FeatureSpec,
    marginals: &Marginals,
    index: usize,
) -> FeatureValue {
    match marginals.features.get(&spec.name) {
        Some(dist) => {
            let i = pick_weighted(rng, dist.iter().map(|d| d.1));
            match &dist[i].0 {
                None => FeatureValue::Null,
                Some(c) => FeatureValue::Text(normalize_candidate(c)),
            }
        }
        None => default_value(rng, spec, index),
    }
}

/// `n` synthetic reports, deterministic per `seed`. Report ids are
/// `R00000`, `R00001`, and so on.
pub fn synth_corpus(
    t: &Template,
    seed: u64,
    n: usize,
    marginals: &Marginals,
) -> Result<Corpus, SynthError> {
    marginals.validate(t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max = t.max_count() as usize;
    let mut reports = Vec::with_capacity(n);
    for i in 0..n {
        let count = pick_weighted(&mut rng, COUNT_WEIGHTS.iter().copied()).min(max);
        let nodules = (0..count)
            .map(|d| NoduleDescriptor {
                values: t
                    .nodule_features
                    .iter()
                    .map(|f| (f.name.clone(), sample_feature(&mut rng, f, marginals, d)))
                    .collect(),
            })
            .collect();
        let report_features = t
            .report_features
            .iter()
            .map(|f| (f.name.clone(), sample_feature(&mut rng, f, marginals, 0)))
            .collect();
        let stratum = pick_weighted(&mut rng, COHORT.iter().map(|c| c.2 as f64));
        let ((lo, hi), sex, _) = COHORT[stratum];
        let day = rng.random_range(0..1095u32);
        reports.push(StructuredReport {
            number_of_nodules: Some(count as u32),
            nodules,
            report_features,
            meta: ReportMeta {
                report_id: format!("R{i:05}"),
                age_years: Some(rng.random_range(lo..hi)),
                sex,
                institution: Some("Institution-1".into()),
                study_date: Some(study_date(day)),
            },
            source_text: None,
        });
    }
    Ok(Corpus::from_reports(reports).expect("synthetic ids are unique"))
}

/// ISO date `day` days after 2021-01-01.
fn study_date(mut day: u32) -> String {
    let mut year = 2021;
    loop {
        let len = if year % 4 == 0 { 366 } else { 365 };
        if day < len {
            break;
        }
        day -= len;
        year += 1;
    }
    let feb = if year % 4 == 0 { 29 } else { 28 };
    let months = [31, feb, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
    let mut month = 0;
    while day >= months[month] {
        day -= months[month];
        month += 1;
    }
    format!("{year}-{:02}-{:02}", month + 1, day + 1)
}
