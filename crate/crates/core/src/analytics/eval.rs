use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{align_descriptors, mcnemar, require_feature, value_of, AnalyticsError};
use crate::report::{Corpus, FeatureValue, StructuredReport};
use crate::template::{Level, Template};

pub const DEFAULT_RESAMPLES: usize = 2000;
pub const DEFAULT_SEED: u64 = 20240917;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    fn add(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }

    fn record(&mut self, pred: &FeatureValue, gold: &FeatureValue) {
        let equal = pred.matches(gold);
        if equal && !gold.is_null() {
            self.tp += 1;
        }
        if !equal && !pred.is_null() {
            self.fp += 1;
        }
        if !equal && !gold.is_null() {
            self.fn_ += 1;
        }
    }

    /// `2tp / (2tp + fp + fn)`, or 1 when there was nothing to find and
    /// nothing was found.
    pub fn f1(&self) -> f64 {
        let den = 2 * self.tp + self.fp + self.fn_;
        if den == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / den as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureScore {
    pub feature: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub f1: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            resamples: DEFAULT_RESAMPLES,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub reports: usize,
    pub resamples: usize,
    pub seed: u64,
    /// Unweighted mean over the evaluated features.
    pub average_f1: f64,
    pub features: Vec<FeatureScore>,
}

/// Discordant correctness counts of two systems on one feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct PairedOutcome {
    /// A right, B wrong.
    pub b: u64,
    /// A wrong, B right.
    pub c: u64,
    pub both_right: u64,
    pub both_wrong: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedResult {
    pub feature: String,
    pub f1_a: f64,
    pub f1_b: f64,
    pub b: u64,
    pub c: u64,
    pub p_value: f64,
}

fn check_aligned(preds: &Corpus, golds: &Corpus) -> Result<(), AnalyticsError> {
    if preds.len() != golds.len() {
        return Err(AnalyticsError::LengthMismatch {
            pred: preds.len(),
            gold: golds.len(),
        });
    }
    for (i, (p, g)) in preds.iter().zip(golds.iter()).enumerate() {
        if p.report_id() != g.report_id() {
            return Err(AnalyticsError::ReportMismatch {
                index: i,
                pred: p.report_id().to_string(),
                gold: g.report_id().to_string(),
            });
        }
    }
    Ok(())
}

/// `(pred, gold)` values of every slot of `feature` in one report pair.
fn slot_values(
    t: &Template,
    level: Level,
    pred: &StructuredReport,
    gold: &StructuredReport,
    feature: &str,
) -> Vec<(FeatureValue, FeatureValue)> {
    if level == Level::Nodule {
        align_descriptors(pred, gold)
            .into_iter()
            .map(|(p, g)| {
                let pv = p.map_or(FeatureValue::Null, |p| pred.nodules[p].get(feature).clone());
                let gv = g.map_or(FeatureValue::Null, |g| gold.nodules[g].get(feature).clone());
                (pv, gv)
            })
            .collect()
    } else {
        vec![(
            value_of(t, pred, None, feature),
            value_of(t, gold, None, feature),
        )]
    }
}

/// tp/fp/fn of `feature` per report, in corpus order.
pub fn feature_counts(
    preds: &Corpus,
    golds: &Corpus,
    t: &Template,
    feature: &str,
) -> Result<Vec<Counts>, AnalyticsError> {
    let level = require_feature(t, feature)?;
    check_aligned(preds, golds)?;
    Ok(preds
        .iter()
        .zip(golds.iter())
        .map(|(p, g)| {
            let mut c = Counts::default();
            for (pv, gv) in slot_values(t, level, p, g, feature) {
                c.record(&pv, &gv);
            }
            c
        })
        .collect())
}

fn total(counts: &[Counts]) -> Counts {
    let mut c = Counts::default();
    counts.iter().for_each(|x| c.add(*x));
    c
}

fn score(feature: &str, c: Counts, ci: (f64, f64)) -> FeatureScore {
    let f1 = c.f1();
    FeatureScore {
        feature: feature.to_string(),
        tp: c.tp,
        fp: c.fp,
        fn_: c.fn_,
        f1,
        ci_low: ci.0.min(f1),
        ci_high: ci.1.max(f1),
    }
}

/// Point estimate; the interval collapses to the estimate. [`evaluate`]
/// fills in bootstrap intervals.
pub fn feature_f1(
    preds: &Corpus,
    golds: &Corpus,
    t: &Template,
    feature: &str,
) -> Result<FeatureScore, AnalyticsError> {
    let c = total(&feature_counts(preds, golds, t, feature)?);
    Ok(score(feature, c, (c.f1(), c.f1())))
}

/// Linear interpolation between order statistics of sorted `v`.
fn percentile(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn bootstrap_counts(counts: &[Counts], resamples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = counts.len();
    let mut f1s: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut c = Counts::default();
            for _ in 0..n {
                c.add(counts[rng.random_range(0..n)]);
            }
            c.f1()
        })
        .collect();
    f1s.sort_by(f64::total_cmp);
    (percentile(&f1s, 0.025), percentile(&f1s, 0.975))
}

/// Percentile bootstrap over reports resampled with replacement.
pub fn bootstrap_ci(
    preds: &Corpus,
    golds: &Corpus,
    t: &Template,
    feature: &str,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64), AnalyticsError> {
    if resamples < 100 {
        return Err(AnalyticsError::TooFewResamples(resamples));
    }
    let counts = feature_counts(preds, golds, t, feature)?;
    if counts.is_empty() {
        return Err(AnalyticsError::EmptyCorpus);
    }
    Ok(bootstrap_counts(&counts, resamples, seed))
}

/// Scores with intervals for every evaluated feature of `t`. The interval is
/// widened to contain the point estimate when the percentiles miss it.
pub fn evaluate(
    preds: &Corpus,
    golds: &Corpus,
    t: &Template,
    opts: EvalOptions,
) -> Result<EvalReport, AnalyticsError> {
    if opts.resamples < 100 {
        return Err(AnalyticsError::TooFewResamples(opts.resamples));
    }
    check_aligned(preds, golds)?;
    if preds.is_empty() {
        return Err(AnalyticsError::EmptyCorpus);
    }
    let mut features = Vec::new();
    for (i, f) in t.evaluated_features().enumerate() {
        let counts = feature_counts(preds, golds, t, &f.name)?;
        let ci = bootstrap_counts(&counts, opts.resamples, opts.seed.wrapping_add(i as u64));
        features.push(score(&f.name, total(&counts), ci));
    }
    let average_f1 = if features.is_empty() {
        1.0
    } else {
        features.iter().map(|s| s.f1).sum::<f64>() / features.len() as f64
    };
    Ok(EvalReport {
        reports: preds.len(),
        resamples: opts.resamples,
        seed: opts.seed,
        average_f1,
        features,
    })
}

fn report_correct(
    t: &Template,
    level: Level,
    p: &StructuredReport,
    g: &StructuredReport,
    f: &str,
) -> bool {
    slot_values(t, level, p, g, f)
        .iter()
        .all(|(pv, gv)| pv.matches(gv))
}

/// Per-report correctness of two systems on `feature`; a report counts as
/// correct when every slot of the feature equals the gold value.
pub fn paired_outcome(
    a: &Corpus,
    b: &Corpus,
    golds: &Corpus,
    t: &Template,
    feature: &str,
) -> Result<PairedOutcome, AnalyticsError> {
    let level = require_feature(t, feature)?;
    check_aligned(a, golds)?;
    check_aligned(b, golds)?;
    let mut out = PairedOutcome::default();
    for ((ra, rb), g) in a.iter().zip(b.iter()).zip(golds.iter()) {
        match (
            report_correct(t, level, ra, g, feature),
            report_correct(t, level, rb, g, feature),
        ) {
            (true, false) => out.b += 1,
            (false, true) => out.c += 1,
            (true, true) => out.both_right += 1,
            (false, false) => out.both_wrong += 1,
        }
    }
    Ok(out)
}

/// F1 of both systems and the McNemar p-value for every evaluated feature.
pub fn compare(
    a: &Corpus,
    b: &Corpus,
    golds: &Corpus,
    t: &Template,
) -> Result<Vec<PairedResult>, AnalyticsError> {
    t.evaluated_features()
        .map(|f| {
            let po = paired_outcome(a, b, golds, t, &f.name)?;
            Ok(PairedResult {
                feature: f.name.clone(),
                f1_a: feature_f1(a, golds, t, &f.name)?.f1,
                f1_b: feature_f1(b, golds, t, &f.name)?.f1,
                b: po.b,
                c: po.c,
                p_value: mcnemar(po.b, po.c),
            })
        })
        .collect()
}
