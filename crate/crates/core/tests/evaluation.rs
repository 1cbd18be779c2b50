use fsr_core::analytics::{align_descriptors, bootstrap_ci, feature_counts, AlignedPair};
use fsr_core::report::{Corpus, FeatureValue, NoduleDescriptor, ReportMeta, StructuredReport};
use fsr_core::template::Template;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FEATURES: [&str; 3] = ["lobe", "type", "average_diameter_mm"];

fn descriptor(t: &Template, id: Option<f64>, lobe: &str, ty: &str, size: f64) -> NoduleDescriptor {
    let mut d = NoduleDescriptor::all_null(t);
    d.set(
        "nodule_id",
        id.map_or(FeatureValue::Null, FeatureValue::Number),
    );
    d.set("lobe", FeatureValue::Text(lobe.into()));
    d.set("type", FeatureValue::Text(ty.into()));
    d.set("average_diameter_mm", FeatureValue::Number(size));
    d
}

fn report(id: &str, nodules: Vec<NoduleDescriptor>) -> StructuredReport {
    StructuredReport {
        number_of_nodules: Some(nodules.len() as u32),
        nodules,
        meta: ReportMeta {
            report_id: id.into(),
            ..Default::default()
        },
        ..Default::default()
    }
}

fn differs(a: &FeatureValue, b: &FeatureValue) -> bool {
    match (a.is_null(), b.is_null()) {
        (true, true) => false,
        (false, false) => !a.matches(b),
        _ => true,
    }
}

fn cost(p: Option<&NoduleDescriptor>, g: Option<&NoduleDescriptor>) -> usize {
    let null = FeatureValue::Null;
    FEATURES
        .iter()
        .filter(|f| differs(p.map_or(&null, |d| d.get(f)), g.map_or(&null, |d| d.get(f))))
        .count()
}

fn total_cost(pred: &StructuredReport, gold: &StructuredReport, pairs: &[AlignedPair]) -> usize {
    pairs
        .iter()
        .map(|(p, g)| cost(p.map(|i| &pred.nodules[i]), g.map(|i| &gold.nodules[i])))
        .sum()
}

/// Minimum mismatch cost over every partial one-to-one assignment, with the
/// assignments reaching it.
fn exhaustive(pred: &StructuredReport, gold: &StructuredReport) -> (usize, Vec<Vec<AlignedPair>>) {
    fn go(
        g: usize,
        used: &mut Vec<bool>,
        acc: &mut Vec<AlignedPair>,
        pred: &StructuredReport,
        gold: &StructuredReport,
        best: &mut (usize, Vec<Vec<AlignedPair>>),
    ) {
        if g == gold.nodules.len() {
            let mut pairs = acc.clone();
            pairs.extend(
                (0..used.len())
                    .filter(|&p| !used[p])
                    .map(|p| (Some(p), None)),
            );
            let c = total_cost(pred, gold, &pairs);
            if c < best.0 {
                *best = (c, vec![pairs]);
            } else if c == best.0 {
                best.1.push(pairs);
            }
            return;
        }
        for p in 0..used.len() {
            if !used[p] {
                used[p] = true;
                acc.push((Some(p), Some(g)));
                go(g + 1, used, acc, pred, gold, best);
                acc.pop();
                used[p] = false;
            }
        }
        acc.push((None, Some(g)));
        go(g + 1, used, acc, pred, gold, best);
        acc.pop();
    }
    let mut best = (usize::MAX, Vec::new());
    go(
        0,
        &mut vec![false; pred.nodules.len()],
        &mut Vec::new(),
        pred,
        gold,
        &mut best,
    );
    best
}

#[test]
fn alignment_is_a_minimal_mismatch_assignment() {
    let t = Template::lung_nodule();
    let d = |id, lobe, ty, size| descriptor(&t, id, lobe, ty, size);
    let (rul, lll, lul) = ("right upper lobe", "left lower lobe", "left upper lobe");
    let fixture = vec![
        // Ids listed in the opposite order.
        (
            report(
                "a",
                vec![
                    d(Some(2.0), lll, "solid", 5.0),
                    d(Some(1.0), rul, "solid", 4.0),
                ],
            ),
            report(
                "a",
                vec![
                    d(Some(1.0), rul, "solid", 4.0),
                    d(Some(2.0), lll, "part-solid", 5.0),
                ],
            ),
        ),
        // No ids, same order.
        (
            report(
                "b",
                vec![
                    d(None, rul, "solid", 3.0),
                    d(None, lul, "ground glass", 7.0),
                ],
            ),
            report(
                "b",
                vec![
                    d(None, rul, "solid", 3.5),
                    d(None, lul, "ground glass", 7.0),
                ],
            ),
        ),
        // One extra prediction at the end.
        (
            report(
                "c",
                vec![
                    d(None, lll, "solid", 6.0),
                    d(None, lll, "solid", 9.0),
                    d(None, rul, "solid", 2.0),
                ],
            ),
            report(
                "c",
                vec![d(None, lll, "solid", 6.0), d(None, lll, "solid", 9.0)],
            ),
        ),
        // The middle gold nodule was missed; ids tell which.
        (
            report(
                "d",
                vec![
                    d(Some(1.0), rul, "solid", 4.0),
                    d(Some(3.0), lul, "solid", 12.0),
                ],
            ),
            report(
                "d",
                vec![
                    d(Some(1.0), rul, "solid", 4.0),
                    d(Some(2.0), lll, "part-solid", 8.0),
                    d(Some(3.0), lul, "solid", 12.0),
                ],
            ),
        ),
        // Ids on two of four, order for the rest.
        (
            report(
                "e",
                vec![
                    d(Some(4.0), lll, "solid", 4.0),
                    d(Some(2.0), lul, "solid", 6.0),
                    d(None, rul, "ground glass", 5.0),
                    d(None, rul, "solid", 8.0),
                ],
            ),
            report(
                "e",
                vec![
                    d(None, rul, "ground glass", 5.0),
                    d(Some(2.0), lul, "solid", 6.0),
                    d(None, rul, "solid", 8.0),
                    d(Some(4.0), lll, "solid", 4.0),
                ],
            ),
        ),
    ];
    for (pred, gold) in &fixture {
        let got = align_descriptors(pred, gold);
        let (best, optima) = exhaustive(pred, gold);
        assert_eq!(
            total_cost(pred, gold, &got),
            best,
            "report {}: {got:?} vs optima {optima:?}",
            gold.report_id()
        );
        let mut sorted = got.clone();
        sorted.sort();
        assert!(optima.iter().any(|o| {
            let mut o = o.clone();
            o.sort();
            o == sorted
        }));
    }
}

fn lobe_report(t: &Template, id: usize, lobe: &str) -> StructuredReport {
    let mut d = NoduleDescriptor::all_null(t);
    d.set("lobe", FeatureValue::Text(lobe.into()));
    report(&format!("r{id:04}"), vec![d])
}

#[test]
fn bootstrap_ci_covers_analytic_f1() {
    // Each wrong prediction is a substitution (one fp and one fn), so an
    // error rate of 10% gives F1 = 2(0.9) / (2(0.9) + 0.2) = 0.9.
    // Errors are drawn independently, so each trial's F1 varies around it.
    let t = Template::lung_nodule();
    let lobes = t
        .feature_by_name("lobe")
        .unwrap()
        .1
        .candidates
        .distinct_values();
    let n = 300;
    let mut covered = 0;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let wrong: Vec<bool> = (0..n).map(|_| rng.random_bool(0.1)).collect();
        let mut golds = Vec::new();
        let mut preds = Vec::new();
        for (i, &w) in wrong.iter().enumerate() {
            let g = rng.random_range(0..lobes.len());
            let p = if w {
                (g + rng.random_range(1..lobes.len())) % lobes.len()
            } else {
                g
            };
            golds.push(lobe_report(&t, i, &lobes[g]));
            preds.push(lobe_report(&t, i, &lobes[p]));
        }
        let golds = Corpus::from_reports(golds).unwrap();
        let preds = Corpus::from_reports(preds).unwrap();
        let counts = feature_counts(&preds, &golds, &t, "lobe").unwrap();
        let fp: u64 = counts.iter().map(|c| c.fp).sum();
        assert_eq!(fp as usize, wrong.iter().filter(|&&w| w).count());
        let (lo, hi) = bootstrap_ci(&preds, &golds, &t, "lobe", 1000, 1000 + trial).unwrap();
        if lo <= 0.9 && 0.9 <= hi {
            covered += 1;
        }
    }
    println!("bootstrap coverage {covered}/100");
    assert!(covered >= 93, "covered {covered}/100");
}
