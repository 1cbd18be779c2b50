//! Twenty short single-nodule findings converted with the lexical adapter.
//! The lobe is checked against a plain phrase-overlap oracle and every row
//! against its hand labels.

use fsr_core::decode::{run_compiled, CompiledTemplate};
use fsr_core::lm::LexicalSource;
use fsr_core::report::validate_report;
use fsr_core::template::Template;
use fsr_core::token::Vocab;

struct Case {
    text: &'static str,
    lobe: Option<&'static str>,
    ty: Option<&'static str>,
    stability: Option<&'static str>,
    size: Option<f64>,
}

const fn case(
    text: &'static str,
    lobe: Option<&'static str>,
    ty: Option<&'static str>,
    stability: Option<&'static str>,
    size: Option<f64>,
) -> Case {
    Case {
        text,
        lobe,
        ty,
        stability,
        size,
    }
}

const RLL: Option<&str> = Some("right lower lobe");
const RUL: Option<&str> = Some("right upper lobe");
const RML: Option<&str> = Some("right middle lobe");
const LUL: Option<&str> = Some("left upper lobe");
const LLL: Option<&str> = Some("left lower lobe");
const SOLID: Option<&str> = Some("solid");

const CASES: [Case; 20] = [
    case(
        "There is a 3 mm nodule in the right lower lobe.",
        RLL,
        None,
        None,
        Some(3.0),
    ),
    case(
        "Stable 4 mm solid nodule in the right upper lobe.",
        RUL,
        SOLID,
        Some("stable"),
        Some(4.0),
    ),
    case(
        "A new 6 mm part-solid nodule is seen in the left upper lobe.",
        LUL,
        Some("part-solid"),
        Some("new"),
        Some(6.0),
    ),
    case(
        "Ground glass nodule in the left lower lobe, unchanged in size.",
        LLL,
        Some("ground glass"),
        None,
        None,
    ),
    case(
        "The 5 mm solid nodule of the right middle lobe is stable.",
        RML,
        SOLID,
        Some("stable"),
        Some(5.0),
    ),
    case(
        "Lingula: 2 mm calcified nodule, benign.",
        Some("lingula"),
        Some("calcified"),
        None,
        Some(2.0),
    ),
    case(
        "Interval increase of the 9 mm solid nodule in the Right Upper Lobe.",
        RUL,
        SOLID,
        Some("increase"),
        Some(9.0),
    ),
    case(
        "Nodule in the left lower lobe has resolved.",
        LLL,
        None,
        Some("resolved"),
        None,
    ),
    case(
        "Small nonsolid nodule, right lower lobe, 7 mm, baseline study.",
        RLL,
        Some("nonsolid"),
        Some("baseline"),
        Some(7.0),
    ),
    case(
        "There is a 4 mm nodule in the right lung.",
        None,
        None,
        None,
        Some(4.0),
    ),
    case(
        "Decrease in size of the part-solid nodule in the left upper lobe, now 8 mm.",
        LUL,
        Some("part-solid"),
        Some("decrease"),
        Some(8.0),
    ),
    case(
        "Cavitary nodule within the right upper lobe.",
        RUL,
        Some("cavitary"),
        None,
        None,
    ),
    case(
        "A 12 mm solid nodule in the left lower lobe is new since prior.",
        LLL,
        SOLID,
        Some("new"),
        Some(12.0),
    ),
    case(
        "Right middle lobe: 3 mm ground glass nodule.",
        RML,
        Some("ground glass"),
        None,
        Some(3.0),
    ),
    case(
        "Stable solid nodule, 6 mm, located in the lingula.",
        Some("lingula"),
        SOLID,
        Some("stable"),
        Some(6.0),
    ),
    case(
        "Pulmonary nodule noted; no change from prior.",
        None,
        None,
        None,
        None,
    ),
    case(
        "A 10 mm spiculated solid nodule in the left upper lobe has increased.",
        LUL,
        SOLID,
        None,
        Some(10.0),
    ),
    case(
        "Right lower lobe 5 mm perifissural nodule, stable.",
        RLL,
        None,
        Some("stable"),
        Some(5.0),
    ),
    case(
        "Fat-containing nodule in the right middle lobe. Type: fat.",
        RML,
        Some("fat"),
        None,
        None,
    ),
    case(
        "A 4 mm ground glass nodule in the left lower lobe, new.",
        LLL,
        Some("ground glass"),
        Some("new"),
        Some(4.0),
    ),
];

/// The lobe candidate whose full phrase occurs in the text, longest first.
fn overlap_oracle(t: &Template, text: &str) -> Option<String> {
    let lower = text.to_lowercase();
    let mut lobes = t
        .feature_by_name("lobe")
        .unwrap()
        .1
        .candidates
        .distinct_values();
    lobes.sort_by_key(|c| std::cmp::Reverse(c.len()));
    lobes.into_iter().find(|c| lower.contains(c.as_str()))
}

#[test]
fn twenty_report_fixture() {
    let t = Template::lung_nodule();
    let c = CompiledTemplate::new(t.clone(), &Vocab::for_template(&t)).unwrap();
    let mut failures = Vec::new();
    for (i, case) in CASES.iter().enumerate() {
        let src = LexicalSource::new(case.text, &t, c.vocab().clone());
        let r = run_compiled(&c, "", case.text, &src).unwrap();
        assert!(validate_report(&r, &t).is_empty(), "case {i}");
        assert_eq!(r.nodules.len(), 1, "case {i}: {}", case.text);
        let d = &r.nodules[0];
        let oracle = overlap_oracle(&t, case.text);
        assert_eq!(oracle.as_deref(), case.lobe, "case {i}: hand label");
        let got = (
            d.get("lobe").as_text(),
            d.get("type").as_text(),
            d.get("stability").as_text(),
            d.get("average_diameter_mm").as_number(),
        );
        let want = (case.lobe, case.ty, case.stability, case.size);
        if got != want {
            failures.push(format!("case {i} {:?}: {got:?} != {want:?}", case.text));
        }
        if d.get("average_diameter_mm").is_null() != case.size.is_none() {
            failures.push(format!("case {i}: size nullness"));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
