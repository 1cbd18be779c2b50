//! Acceptance suite with its own harness: every criterion runs in turn and
//! prints one `PASS`/`FAIL` line, and the process fails if any criterion
//! does. A non-flag argument filters criteria by name.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use fsr_core::analytics::{
    crosstab, format_pct, mcnemar, stratified_counts, two_proportion_ztest, AgeBins, ColSpec,
};
use fsr_core::decode::{decode_session, run_compiled, start_session, CompiledTemplate};
use fsr_core::fixtures::{figure6_corpus, table3_corpus, table4_corpus, FIGURE6_QUERY};
use fsr_core::lm::{LexicalSource, UniformSource};
use fsr_core::query::{execute, parse_query, random_query, Op, QueryExpr};
use fsr_core::report::{
    render_lsr, synth_corpus, validate_report, Corpus, FeatureValue, Marginals, NoduleDescriptor,
    Sex, StructuredReport,
};
use fsr_core::template::{random_template, CandidateSet, Level, RandomTemplateParams, Template};
use fsr_core::token::{TokenId, Vocab};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Set once the running criterion has printed its line.
static REPORTED: AtomicBool = AtomicBool::new(false);

fn verdict(criterion: &str, ok: bool, detail: String) {
    println!("{} {criterion}: {detail}", if ok { "PASS" } else { "FAIL" });
    REPORTED.store(true, Ordering::SeqCst);
    assert!(ok, "{criterion}: {detail}");
}

const CRITERIA: [(&str, fn()); 8] = [
    ("validity_fuzz", validity_fuzz),
    ("language_equivalence", language_equivalence),
    ("lexical_round_trip", lexical_round_trip),
    ("table3_fixture", table3_fixture),
    ("table4_fixture", table4_fixture),
    ("figure6_fixture", figure6_fixture),
    ("statistics_oracles", statistics_oracles),
    ("throughput", throughput),
];

fn main() {
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let (mut run, mut failed) = (0, 0);
    for (name, f) in CRITERIA {
        if filter.as_deref().is_some_and(|p| !name.contains(p)) {
            continue;
        }
        run += 1;
        REPORTED.store(false, Ordering::SeqCst);
        if std::panic::catch_unwind(f).is_err() {
            failed += 1;
            if !REPORTED.load(Ordering::SeqCst) {
                println!("FAIL {name}: aborted before a verdict");
            }
        }
    }
    println!("acceptance: {} of {run} criteria passed", run - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn same(a: &FeatureValue, b: &FeatureValue) -> bool {
    match (a.is_null(), b.is_null()) {
        (true, true) => true,
        (false, false) => a.matches(b),
        _ => false,
    }
}

// ---------------------------------------------------------------- validity

fn validity_fuzz() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (templates, per_template) = (50, 200);
    let mut decodes = 0;
    let mut failures = Vec::new();
    for k in 0..templates {
        let t = random_template(&mut rng, &RandomTemplateParams::default());
        let v = Vocab::for_template(&t);
        let c = CompiledTemplate::new(t.clone(), &v).expect("random template compiles");
        for seed in 0..per_template {
            decodes += 1;
            let src = UniformSource::new(c.vocab().len(), seed);
            let state = match decode_session(&c, "", "", &src, false) {
                Ok(s) => s,
                Err(e) => {
                    failures.push(format!("template {k} seed {seed}: {e}"));
                    continue;
                }
            };
            let text = state.output_text();
            if let Err(e) = serde_json::from_str::<serde_json::Value>(&text) {
                failures.push(format!("template {k} seed {seed}: bad JSON {e}"));
                continue;
            }
            match state.report() {
                Ok(r) => {
                    let bad = validate_report(&r, &t);
                    if !bad.is_empty() {
                        failures.push(format!("template {k} seed {seed}: {bad:?}"));
                    }
                }
                Err(e) => failures.push(format!("template {k} seed {seed}: {e}")),
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "validity fuzz",
        failures.is_empty() && decodes == 10_000 && elapsed <= Duration::from_secs(300),
        format!(
            "{decodes} decodes over {templates} templates, {} invalid, {:.1}s{}",
            failures.len(),
            elapsed.as_secs_f64(),
            failures
                .first()
                .map(|f| format!(", first: {f}"))
                .unwrap_or_default()
        ),
    );
}

// ---------------------------------------------------- language equivalence

fn canonical(v: &serde_json::Value) -> String {
    fn sort(v: &serde_json::Value) -> serde_json::Value {
        match v {
            serde_json::Value::Object(m) => {
                let sorted: BTreeMap<_, _> = m.iter().map(|(k, v)| (k.clone(), sort(v))).collect();
                serde_json::to_value(sorted).expect("map")
            }
            serde_json::Value::Array(a) => serde_json::Value::Array(a.iter().map(sort).collect()),
            other => other.clone(),
        }
    }
    sort(v).to_string()
}

fn options(t: &Template, name: &str) -> Vec<FeatureValue> {
    let (_, f) = t.feature_by_name(name).expect("feature");
    let mut out: Vec<FeatureValue> = f
        .candidates
        .distinct_values()
        .into_iter()
        .map(FeatureValue::Text)
        .collect();
    if f.candidates.nullable {
        out.push(FeatureValue::Null);
    }
    out
}

fn cartesian(choices: &[Vec<FeatureValue>]) -> Vec<Vec<FeatureValue>> {
    let mut acc = vec![Vec::new()];
    for opts in choices {
        acc = acc
            .into_iter()
            .flat_map(|prefix| {
                opts.iter().map(move |o| {
                    let mut p = prefix.clone();
                    p.push(o.clone());
                    p
                })
            })
            .collect();
    }
    acc
}

/// Every report the candidate sets admit, built without the decoder.
fn brute_force(t: &Template, count: usize) -> BTreeSet<String> {
    let nodule_names: Vec<&str> = t.nodule_features.iter().map(|f| f.name.as_str()).collect();
    let report_names: Vec<&str> = t.report_features.iter().map(|f| f.name.as_str()).collect();
    let mut slots = Vec::new();
    for _ in 0..count {
        slots.extend(nodule_names.iter().map(|n| options(t, n)));
    }
    slots.extend(report_names.iter().map(|n| options(t, n)));
    let per = nodule_names.len();
    cartesian(&slots)
        .into_iter()
        .map(|assignment| {
            let nodules = (0..count)
                .map(|i| {
                    let mut d = NoduleDescriptor::all_null(t);
                    for (j, n) in nodule_names.iter().enumerate() {
                        d.set(n, assignment[i * per + j].clone());
                    }
                    d
                })
                .collect();
            let report_features = report_names
                .iter()
                .enumerate()
                .map(|(j, n)| (n.to_string(), assignment[count * per + j].clone()))
                .collect();
            let r = StructuredReport {
                number_of_nodules: Some(count as u32),
                nodules,
                report_features,
                ..Default::default()
            };
            canonical(&r.to_json())
        })
        .collect()
}

/// Every report some deterministic adapter can produce: a depth-first walk
/// over all allowed tokens, replaying each prefix with one-hot steps.
fn reachable(c: &Arc<CompiledTemplate>) -> BTreeSet<String> {
    let n = c.vocab().len();
    let onehot = |id: TokenId| {
        let mut p = vec![0.0; n];
        p[id as usize] = 1.0;
        p
    };
    let mut out = BTreeSet::new();
    let mut stack: Vec<Vec<TokenId>> = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        let mut s = start_session(c, "", "").expect("session");
        for &tok in &prefix {
            s.step(&onehot(tok)).expect("allowed token");
        }
        if s.is_done() {
            out.insert(canonical(&s.report().expect("finished").to_json()));
            continue;
        }
        for tok in s.allowed_tokens() {
            let mut next = prefix.clone();
            next.push(tok);
            stack.push(next);
        }
    }
    out
}

fn language_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    let mut mismatches = Vec::new();
    let mut largest = 0;
    while checked < 30 {
        let count = rng.random_range(0..=2u64);
        let t = random_template(&mut rng, &RandomTemplateParams::tiny(3, 4, count));
        let enumerated = t.nodule_features.len() + t.report_features.len();
        if enumerated == 0 || enumerated > 3 {
            continue;
        }
        let v = Vocab::for_template(&t);
        let c = CompiledTemplate::new(t.clone(), &v).expect("compiles");
        let expected = brute_force(&t, count as usize);
        let got = reachable(&c);
        largest = largest.max(expected.len());
        if got != expected {
            mismatches.push(format!(
                "template {checked}: {} reachable vs {} expected\n{t}",
                got.len(),
                expected.len()
            ));
        }
        checked += 1;
    }
    verdict(
        "language equivalence",
        mismatches.is_empty(),
        format!(
            "{checked} tiny templates, largest language {largest} outputs, {} mismatches{}",
            mismatches.len(),
            mismatches
                .first()
                .map(|m| format!(", first: {m}"))
                .unwrap_or_default()
        ),
    );
}

// --------------------------------------------------------------- round trip

#[derive(Default)]
struct Tally {
    hit: u64,
    total: u64,
}

fn lexical_round_trip() {
    let start = Instant::now();
    let t = Template::lung_nodule();
    let gold = synth_corpus(&t, 11, 500, &Marginals::table3_defaults()).expect("synth");
    let vocab = Arc::new(Vocab::for_template(&t));
    let c = CompiledTemplate::new(t.clone(), &vocab).expect("compiles");
    let mut tallies: BTreeMap<String, Tally> = BTreeMap::new();
    let mut score = |name: &str, g: &FeatureValue, p: &FeatureValue| {
        let e = tallies.entry(name.to_string()).or_default();
        e.total += 1;
        e.hit += same(g, p) as u64;
    };
    for g in gold.iter() {
        let text = render_lsr(g, &t);
        let src = LexicalSource::new(&text, &t, c.vocab().clone());
        let p = run_compiled(&c, "", &text, &src).expect("decodes");
        let count = |r: &StructuredReport| {
            r.number_of_nodules
                .map_or(FeatureValue::Null, |n| FeatureValue::Number(n as f64))
        };
        score(&t.count_feature.name, &count(g), &count(&p));
        for (i, d) in g.nodules.iter().enumerate() {
            for f in &t.nodule_features {
                let pv = p
                    .nodules
                    .get(i)
                    .map_or(FeatureValue::Null, |pd| pd.get(&f.name).clone());
                score(&f.name, d.get(&f.name), &pv);
            }
        }
        for f in &t.report_features {
            score(&f.name, g.report_value(&f.name), p.report_value(&f.name));
        }
    }
    let elapsed = start.elapsed();
    let mut worst = [(2.0f64, String::new()), (2.0f64, String::new())];
    for (name, tally) in &tallies {
        let (_, spec) = t.feature_by_name(name).expect("feature");
        let k = spec.candidates.is_numeric() as usize;
        let acc = tally.hit as f64 / tally.total as f64;
        if acc < worst[k].0 {
            worst[k] = (acc, name.clone());
        }
    }
    assert!(
        worst.iter().all(|w| w.0 <= 1.0),
        "both feature kinds scored"
    );
    let ok = worst[0].0 >= 0.99 && worst[1].0 >= 0.97 && elapsed <= Duration::from_secs(120);
    verdict(
        "lexical round trip",
        ok,
        format!(
            "500 reports, worst enumerated {:.2}% ({}), worst numeric {:.2}% ({}), {:.1}s",
            worst[0].0 * 100.0,
            worst[0].1,
            worst[1].0 * 100.0,
            worst[1].1,
            elapsed.as_secs_f64()
        ),
    );
}

// ------------------------------------------------------------------ tables

fn table3_fixture() {
    let t = Template::lung_nodule();
    let c = table3_corpus(&t);
    let bins = AgeBins::default();
    let lobe = stratified_counts(&c, &t, "lobe", &bins, true).unwrap();
    let lung = stratified_counts(&c, &t, "lung", &bins, true).unwrap();
    let lr = stratified_counts(&c, &t, "overall_lung_rads", &bins, true).unwrap();
    let rul = lobe.row("right upper lobe").unwrap().total;
    let right = lung.row("right").unwrap().total;
    let left = lung.row("left").unwrap().total;
    let lr2 = lr.row("2").unwrap().total;
    let (z, p) = two_proportion_ztest(right, lung.total, left, lung.total).unwrap();
    let got = (
        rul,
        format_pct(rul, lobe.total),
        right,
        format_pct(right, lung.total),
        format_pct(lr2, lr.total),
    );
    let want = (
        2460,
        "23.7".to_string(),
        5194,
        "50.1".to_string(),
        "66.0".to_string(),
    );
    verdict(
        "table 3 fixture",
        got == want && left == 3523 && lung.total == 10377 && p < 0.01,
        format!(
            "RUL {} ({}%), right lung {} ({}%), Lung-RADS 2 {}%, right vs left {right}/{left} of {}: z={z:.2} p={p:.2e}",
            got.0, got.1, got.2, got.3, got.4, lung.total
        ),
    );
}

fn table4_fixture() {
    let t = Template::lung_nodule();
    let c = table4_corpus(&t);
    let cols = [ColSpec::parse(&t, "average_diameter_mm:<6").unwrap()];
    let x = crosstab(&c, &t, "type", &cols).unwrap();
    let solid = x.row("solid").unwrap();
    let pct = format_pct(solid.counts[0], solid.total);
    verdict(
        "table 4 fixture",
        solid.counts[0] == 1539 && pct == "75.9",
        format!(
            "solid x <6 mm = {} ({pct}%) of {}",
            solid.counts[0], solid.total
        ),
    );
}

fn figure6_fixture() {
    let t = Template::lung_nodule();
    let c = figure6_corpus(&t);
    let q = parse_query(FIGURE6_QUERY, &t).unwrap();
    let res = execute(&q, &c, &t);
    let with = |name: &str| {
        res.matches
            .iter()
            .filter(|m| {
                !c.get(&m.report_id).unwrap().nodules[m.index]
                    .get(name)
                    .is_null()
            })
            .count()
    };
    let (series, image) = (with("series_id"), with("image_id"));
    verdict(
        "figure 6 fixture",
        res.count == 272 && series == 219 && image == 256,
        format!(
            "{} matches, {series} with series id, {image} with image id",
            res.count
        ),
    );
}

// -------------------------------------------------------------- statistics

/// `min(1, 2 * sum_{i <= min(b,c)} C(n, i) / 2^n)` in exact integers.
fn exact_binomial(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let mut tail = BigUint::zero();
    let mut binom = BigUint::one();
    for i in 0..=b.min(c) {
        if i > 0 {
            binom = binom * (n - i + 1) / i;
        }
        tail += &binom;
    }
    let num = (tail * 2u32).to_f64().unwrap();
    let den = (BigUint::one() << n as usize).to_f64().unwrap();
    (num / den).min(1.0)
}

fn stratum(age: Option<u32>, sex: Sex, by_sex: bool) -> usize {
    let bins = if by_sex { 8 } else { 4 };
    let Some(age) = age else { return bins };
    let bin = [55, 65, 75].iter().filter(|&&cut| age >= cut).count();
    if !by_sex {
        return bin;
    }
    match sex {
        Sex::Male => bin * 2,
        Sex::Female => bin * 2 + 1,
        Sex::Unknown => bins,
    }
}

fn lookup(t: &Template, r: &StructuredReport, i: usize, name: &str) -> FeatureValue {
    if name == t.count_feature.name {
        return r
            .number_of_nodules
            .map_or(FeatureValue::Null, |n| FeatureValue::Number(n as f64));
    }
    match t.feature_by_name(name).unwrap().1.level {
        Level::Nodule => r.nodules[i].get(name).clone(),
        _ => r.report_value(name).clone(),
    }
}

fn holds(t: &Template, r: &StructuredReport, i: usize, q: &QueryExpr) -> bool {
    match q {
        QueryExpr::And(a, b) => holds(t, r, i, a) && holds(t, r, i, b),
        QueryExpr::Or(a, b) => holds(t, r, i, a) || holds(t, r, i, b),
        QueryExpr::Not(a) => !holds(t, r, i, a),
        QueryExpr::Pred(p) => {
            let v = lookup(t, r, i, &p.feature);
            match p.op {
                Op::IsNull => return v.is_null(),
                Op::NotNull => return !v.is_null(),
                _ => {}
            }
            let lit = p.literal.as_ref().unwrap();
            match (&v, lit) {
                (FeatureValue::Null, _) => false,
                (FeatureValue::Text(a), FeatureValue::Text(b)) => match p.op {
                    Op::Eq => a == b,
                    Op::Ne => a != b,
                    _ => false,
                },
                (FeatureValue::Number(a), FeatureValue::Number(b)) => match p.op {
                    Op::Eq => a == b,
                    Op::Ne => a != b,
                    Op::Lt => a < b,
                    Op::Le => a <= b,
                    Op::Gt => a > b,
                    Op::Ge => a >= b,
                    _ => unreachable!(),
                },
                _ => p.op == Op::Ne,
            }
        }
    }
}

fn oracle_corpus(t: &Template, seed: u64) -> Corpus {
    let base = synth_corpus(t, seed, 1000, &Marginals::table3_defaults()).unwrap();
    let reports = base
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut r = r.clone();
            if i % 17 == 0 {
                r.meta.age_years = None;
            }
            if i % 23 == 0 {
                r.meta.sex = Sex::Unknown;
            }
            r
        })
        .collect();
    Corpus::from_reports(reports).unwrap()
}

fn statistics_oracles() {
    let mut worst = 0.0f64;
    for n in 0..=30u64 {
        for b in 0..=n {
            worst = worst.max((mcnemar(b, n - b) - exact_binomial(b, n - b)).abs());
        }
    }

    let t = Template::lung_nodule();
    let bins = AgeBins::default();
    let mut table_errors = Vec::new();
    let mut query_errors = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut tables = 0;
    let mut queries = 0;
    for seed in 0..3 {
        let c = oracle_corpus(&t, 100 + seed);
        for feature in ["lobe", "type", "average_diameter_mm", "overall_lung_rads"] {
            for by_sex in [false, true] {
                tables += 1;
                let got = stratified_counts(&c, &t, feature, &bins, by_sex).unwrap();
                let mut want: BTreeMap<(String, usize), u64> = BTreeMap::new();
                let mut units = 0;
                for r in c.iter() {
                    let s = stratum(r.meta.age_years, r.meta.sex, by_sex);
                    let values: Vec<FeatureValue> =
                        match t.feature_by_name(feature).unwrap().1.level {
                            Level::Nodule => {
                                r.nodules.iter().map(|d| d.get(feature).clone()).collect()
                            }
                            _ => vec![r.report_value(feature).clone()],
                        };
                    for v in values {
                        units += 1;
                        let key = if v.is_null() {
                            "null".into()
                        } else {
                            v.to_string()
                        };
                        *want.entry((key, s)).or_default() += 1;
                    }
                }
                let mut seen = 0;
                for row in &got.rows {
                    for (s, &n) in row.counts.iter().enumerate() {
                        let expect = want.get(&(row.value.clone(), s)).copied().unwrap_or(0);
                        seen += expect;
                        if n != expect {
                            table_errors.push(format!(
                                "{feature} by_sex={by_sex} row {} stratum {s}: {n} vs {expect}",
                                row.value
                            ));
                        }
                    }
                }
                if seen != units || got.total != units {
                    table_errors.push(format!("{feature}: {seen}/{} of {units} units", got.total));
                }
            }
        }
        for _ in 0..100 {
            queries += 1;
            let q = random_query(&mut rng, &t, 4);
            let got: Vec<(String, usize)> = execute(&q, &c, &t)
                .matches
                .into_iter()
                .map(|m| (m.report_id, m.index))
                .collect();
            let mut want = Vec::new();
            for r in c.iter() {
                for i in 0..r.nodules.len() {
                    if holds(&t, r, i, &q) {
                        want.push((r.report_id().to_string(), i));
                    }
                }
            }
            want.sort();
            if got != want {
                query_errors.push(format!("{q}: {} vs {}", got.len(), want.len()));
            }
        }
    }
    verdict(
        "statistics oracles",
        worst <= 1e-9 && table_errors.is_empty() && query_errors.is_empty(),
        format!(
            "mcnemar max |diff| {worst:.1e} over b+c<=30; {tables} stratified tables, {} mismatches; {queries} queries, {} mismatches{}",
            table_errors.len(),
            query_errors.len(),
            table_errors
                .iter()
                .chain(&query_errors)
                .next()
                .map(|e| format!(", first: {e}"))
                .unwrap_or_default()
        ),
    );
}

// --------------------------------------------------------------- throughput

const VOCAB_SIZE: usize = 10_000;

fn padded_vocab(t: &Template) -> Vocab {
    let base = Vocab::for_template(t);
    let mut tokens: Vec<String> = (0..base.len())
        .map(|i| base.entry(i as TokenId).to_string())
        .collect();
    let special = t.features().count();
    let mut k = 0;
    while tokens.len() + special < VOCAB_SIZE {
        tokens.push(format!("~pad{k}"));
        k += 1;
    }
    Vocab::from_tokens(tokens)
}

/// One descriptor of `k` nodule features cycling through a fixed mix of
/// enumerated and numeric features, so the template has `k + 1` slots.
fn sized_template(k: usize) -> Template {
    const MIX: [&str; 9] = [
        "lobe",
        "lung",
        "type",
        "margin",
        "shape",
        "stability",
        "lung_rads",
        "average_diameter_mm",
        "long_axis_mm",
    ];
    let base = Template::lung_nodule();
    let mut t = base.clone();
    t.report_features.clear();
    t.nodule_features = (0..k)
        .map(|i| {
            let (_, f) = base.feature_by_name(MIX[i % MIX.len()]).unwrap();
            let mut f = f.clone();
            let copy = i / MIX.len();
            // Letters only: digits in names would add numeric tokens.
            let tag: String = [b'a' + (copy / 26) as u8, b'a' + (copy % 26) as u8]
                .iter()
                .map(|&b| b as char)
                .collect();
            f.name = format!("{}_{tag}", f.name);
            f.display_name = format!("{} {tag}", f.display_name);
            f
        })
        .collect();
    t.count_feature.candidates = CandidateSet::integer(1, 1, false);
    t
}

/// Mean nanoseconds per `step` over at least `min_steps` steps, with the
/// probability vector fixed so only the allowed-set work is timed.
fn step_cost(c: &Arc<CompiledTemplate>, probs: &[f64], min_steps: usize) -> f64 {
    let mut steps = 0;
    let mut spent = Duration::ZERO;
    while steps < min_steps {
        let mut s = start_session(c, "", "").unwrap();
        let t0 = Instant::now();
        while !s.is_done() {
            s.step(probs).unwrap();
            steps += 1;
        }
        spent += t0.elapsed();
    }
    spent.as_nanos() as f64 / steps as f64
}

fn throughput() {
    let t = Template::lung_nodule();
    let v = padded_vocab(&t);
    let c = CompiledTemplate::new(t, &v).unwrap();
    assert_eq!(c.vocab().len(), VOCAB_SIZE);
    let mut steps = 0;
    let mut spent = Duration::ZERO;
    let mut seed = 0;
    while steps < 50_000 {
        let src = UniformSource::new(VOCAB_SIZE, seed);
        seed += 1;
        let t0 = Instant::now();
        let s = decode_session(&c, "", "", &src, false).unwrap();
        spent += t0.elapsed();
        steps += s.steps();
    }
    let rate = steps as f64 / spent.as_secs_f64();

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let probs: Vec<f64> = (0..VOCAB_SIZE).map(|_| rng.random::<f64>()).collect();
    let sizes = [9usize, 54, 99, 198];
    let compiled: Vec<_> = sizes
        .iter()
        .map(|&k| {
            let t = sized_template(k);
            let v = padded_vocab(&t);
            let c = CompiledTemplate::new(t, &v).unwrap();
            assert_eq!(c.vocab().len(), VOCAB_SIZE);
            c
        })
        .collect();
    // Rounds interleave the sizes so a slow stretch of the machine lands on
    // all of them alike.
    let mut runs = vec![Vec::new(); sizes.len()];
    for _ in 0..7 {
        for (c, r) in compiled.iter().zip(&mut runs) {
            r.push(step_cost(c, &probs, 20_000));
        }
    }
    let costs: Vec<f64> = runs
        .iter_mut()
        .map(|r| {
            r.sort_by(f64::total_cmp);
            r[r.len() / 2]
        })
        .collect();
    let lo = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = costs.iter().cloned().fold(0.0, f64::max);
    let variation = (hi - lo) / lo;
    let per_size: Vec<String> = sizes
        .iter()
        .zip(&costs)
        .map(|(k, ns)| format!("{} slots {:.0}ns", k + 1, ns))
        .collect();
    verdict(
        "throughput",
        rate >= 10_000.0 && variation <= 0.20,
        format!(
            "{rate:.0} steps/s at {VOCAB_SIZE} tokens; per-step cost {} (variation {:.1}%)",
            per_size.join(", "),
            variation * 100.0
        ),
    );
}
