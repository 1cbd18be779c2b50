//! Random well-formed templates for fuzzing and property tests.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use rand::seq::IndexedRandom;
use rand::Rng;

use super::{CandidateSet, EmissionOrder, FeatureSpec, Level, NumericRange, Template};

const WORDS: &[&str] = &[
    "alpha",
    "beta",
    "gamma",
    "delta",
    "left",
    "right",
    "upper",
    "lower",
    "solid",
    "mixed",
    "a",
    "b",
    "x",
    "of",
    "with",
    "node",
    "lobe",
    "ct",
    "pet/ct",
    "part-solid",
    "1-3",
    "4a",
    "über",
    "µm",
    "肺",
    "naïve",
    "o'brien",
    "7",
    "12",
    "0.5",
    "(r)",
    "x,y",
    "semi:colon",
];

#[derive(Debug, Clone)]
pub struct RandomTemplateParams {
    pub nodule_features: RangeInclusive<usize>,
    pub report_features: RangeInclusive<usize>,
    /// Candidates per enumerated feature.
    pub candidates: RangeInclusive<usize>,
    /// Words per candidate.
    pub words: RangeInclusive<usize>,
    /// Share of features that are numeric.
    pub numeric_share: f64,
    /// Upper bound of the count range; a single value fixes the count.
    pub max_count: RangeInclusive<u64>,
    /// Allow non-nullable features and a non-zero count minimum.
    pub allow_required: bool,
}

impl Default for RandomTemplateParams {
    fn default() -> Self {
        RandomTemplateParams {
            nodule_features: 0..=6,
            report_features: 0..=3,
            candidates: 1..=6,
            words: 1..=3,
            numeric_share: 0.3,
            max_count: 0..=3,
            allow_required: true,
        }
    }
}

impl RandomTemplateParams {
    /// Only enumerated features and a fixed count, small enough to
    /// enumerate every output.
    pub fn tiny(max_features: usize, max_candidates: usize, count: u64) -> Self {
        RandomTemplateParams {
            nodule_features: 0..=max_features,
            report_features: 0..=max_features,
            candidates: 1..=max_candidates,
            words: 1..=2,
            numeric_share: 0.0,
            max_count: count..=count,
            allow_required: true,
        }
    }
}

fn candidate<R: Rng>(rng: &mut R, words: &RangeInclusive<usize>) -> String {
    let n = rng.random_range(words.clone());
    (0..n.max(1))
        .map(|_| *WORDS.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn numeric<R: Rng>(rng: &mut R, nullable: bool) -> CandidateSet {
    if rng.random_bool(0.5) {
        let lo = rng.random_range(0..20u64);
        let hi = lo + rng.random_range(0..500u64);
        CandidateSet::integer(lo, hi, nullable)
    } else {
        let decimals = rng.random_range(1..=3u32);
        let scale = 10u64.pow(decimals);
        let lo = rng.random_range(0..5 * scale);
        let hi = lo + rng.random_range(0..300 * scale);
        CandidateSet::float(
            NumericRange {
                min_scaled: lo,
                max_scaled: hi,
                decimals,
            },
            nullable,
        )
    }
}

fn feature<R: Rng>(rng: &mut R, p: &RandomTemplateParams, i: usize, level: Level) -> FeatureSpec {
    let nullable = !p.allow_required || rng.random_bool(0.8);
    let candidates = if rng.random_bool(p.numeric_share) {
        numeric(rng, nullable)
    } else {
        let want = rng.random_range(p.candidates.clone()).max(1);
        let mut set = BTreeSet::new();
        for _ in 0..want * 4 {
            if set.len() == want {
                break;
            }
            set.insert(candidate(rng, &p.words));
        }
        let mut values: Vec<String> = set.into_iter().collect();
        // BTreeSet order is sorted; shuffle back to a random declaration order.
        for k in (1..values.len()).rev() {
            values.swap(k, rng.random_range(0..=k));
        }
        CandidateSet::enumerated(values, nullable)
    };
    let prefix = match level {
        Level::Nodule => "n",
        Level::Report => "r",
        Level::Auxiliary => "c",
    };
    let unit = if candidates.is_numeric() && rng.random_bool(0.5) {
        " (mm)"
    } else {
        ""
    };
    FeatureSpec {
        name: format!("{prefix}{i}_f"),
        display_name: format!("Feature {prefix}{i}{unit}"),
        level,
        candidates,
    }
}

/// A template satisfying every structural rule of the DSL: unique snake-case
/// names, non-empty candidate sets without forbidden characters, and an
/// integer count feature.
pub fn random_template<R: Rng>(rng: &mut R, p: &RandomTemplateParams) -> Template {
    let n_nodule = rng.random_range(p.nodule_features.clone());
    let mut n_report = rng.random_range(p.report_features.clone());
    if n_nodule + n_report == 0 {
        n_report = 1;
    }
    let nodule_features = (0..n_nodule)
        .map(|i| feature(rng, p, i, Level::Nodule))
        .collect();
    let report_features = (0..n_report)
        .map(|i| feature(rng, p, i, Level::Report))
        .collect();
    let max = rng.random_range(p.max_count.clone());
    let fixed = p.max_count.start() == p.max_count.end();
    let min = if fixed {
        max
    } else if p.allow_required && max > 0 && rng.random_bool(0.3) {
        rng.random_range(0..=max)
    } else {
        0
    };
    let count_nullable = !fixed && (!p.allow_required || rng.random_bool(0.7));
    Template {
        name: format!("random_{}", rng.random_range(0..1_000_000u32)),
        nodule_features,
        report_features,
        count_feature: FeatureSpec {
            name: "number_of_nodules".into(),
            display_name: "Number of Nodules".into(),
            level: Level::Auxiliary,
            candidates: CandidateSet::integer(min, max, count_nullable),
        },
        emission_order: EmissionOrder::CountNodulesReport,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::{parse_template, render_template, validate_template};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn dsl_round_trip(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_template(&mut rng, &RandomTemplateParams::default());
            let text = render_template(&t);
            let back = parse_template(&text).unwrap();
            prop_assert_eq!(back, t);
        }
    }

    #[test]
    fn tiny_templates_have_fixed_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let t = random_template(&mut rng, &RandomTemplateParams::tiny(3, 4, 1));
            let r = t.count_range();
            assert_eq!((r.min_scaled, r.max_scaled), (1, 1));
            assert!(!t.count_feature.candidates.nullable);
            assert!(t.features().all(|(_, f)| f.candidates.values().len() <= 4));
            let _ = validate_template(&t);
        }
    }
}
