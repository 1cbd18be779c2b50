//! Deterministic corpora whose memberships match reference screening cohort
//! tables and a retrieval example. Used by the acceptance suite, the CLI
//! `fixture` command and as demo data for the retrieval service.

use crate::report::{
    render_lsr, Corpus, FeatureValue, NoduleDescriptor, ReportMeta, Sex, StructuredReport,
};
use crate::template::Template;
use crate::token::format_decimal;

/// The retrieval example query.
pub const FIGURE6_QUERY: &str =
    r#"type = "solid" AND (stability = "increase" OR stability = "new")"#;

/// Report in the retrieval fixture whose growing nodule is described only as
/// "previously measuring".
pub const PREVIOUSLY_MEASURING_ID: &str = "f6-growth-narrative";

/// Strata in column order: age bin crossed with sex.
const STRATA: [(u32, Sex); 8] = [
    (50, Sex::Male),
    (50, Sex::Female),
    (60, Sex::Male),
    (60, Sex::Female),
    (70, Sex::Male),
    (70, Sex::Female),
    (80, Sex::Male),
    (80, Sex::Female),
];

type Row = (&'static str, [u64; 8]);

const T3_DESCRIPTORS: [u64; 8] = [66, 120, 2164, 2263, 2317, 2535, 442, 470];

/// Reports per stratum. Chosen so each reference Lung-RADS share is
/// reproduced to one decimal in every column.
const T3_REPORTS: [u64; 8] = [37, 72, 1122, 1162, 1185, 1200, 205, 209];

const T3_LOBE: [Row; 6] = [
    ("left upper lobe", [9, 22, 360, 361, 379, 404, 68, 84]),
    ("lingula", [3, 3, 41, 46, 41, 55, 8, 13]),
    ("left lower lobe", [12, 18, 303, 267, 315, 358, 57, 55]),
    ("right upper lobe", [19, 36, 502, 546, 533, 575, 123, 126]),
    ("right middle lobe", [2, 11, 192, 176, 167, 163, 43, 29]),
    ("right lower lobe", [3, 19, 286, 350, 326, 423, 68, 68]),
];

const T3_LUNG: [Row; 2] = [
    ("left", [27, 43, 748, 737, 811, 857, 141, 159]),
    ("right", [29, 67, 1071, 1162, 1131, 1262, 240, 232]),
];

const T3_TYPE: [Row; 3] = [
    ("ground glass", [4, 13, 97, 186, 105, 200, 23, 68]),
    ("part-solid", [1, 4, 40, 44, 35, 58, 12, 9]),
    ("solid", [28, 20, 439, 491, 400, 492, 94, 63]),
];

const T3_STABILITY: [Row; 4] = [
    ("decrease", [2, 2, 30, 28, 19, 29, 7, 4]),
    ("increase", [0, 2, 41, 37, 41, 76, 17, 15]),
    ("new", [0, 1, 28, 12, 19, 27, 4, 6]),
    ("resolved", [12, 10, 154, 183, 200, 200, 37, 55]),
];

/// Diameter bins as one representative value each.
const T3_DIAMETER: [(f64, [u64; 8]); 4] = [
    (4.0, [36, 80, 1279, 1347, 1247, 1526, 219, 270]),
    (8.0, [8, 11, 236, 219, 314, 317, 80, 41]),
    (12.0, [4, 4, 32, 37, 75, 56, 18, 20]),
    (20.0, [1, 1, 22, 19, 20, 28, 6, 7]),
];

const T3_LUNG_RADS: [Row; 7] = [
    ("0", [3, 2, 8, 10, 12, 11, 4, 2]),
    ("1", [10, 21, 290, 283, 272, 227, 30, 29]),
    ("2", [21, 44, 712, 768, 767, 836, 138, 141]),
    ("3", [0, 2, 48, 48, 57, 53, 12, 18]),
    ("4A", [1, 1, 37, 30, 41, 43, 5, 9]),
    ("4B", [0, 1, 16, 10, 20, 19, 12, 7]),
    ("4X", [0, 0, 4, 4, 6, 2, 1, 1]),
];

/// Value for position `j` of a stratum: rows fill consecutive positions,
/// the tail stays null.
fn pick<V: Clone>(rows: &[(V, [u64; 8])], s: usize, j: u64) -> Option<V> {
    let mut acc = 0;
    for (v, counts) in rows {
        acc += counts[s];
        if j < acc {
            return Some(v.clone());
        }
    }
    None
}

fn text(v: Option<&str>) -> FeatureValue {
    v.map_or(FeatureValue::Null, |s| FeatureValue::Text(s.to_string()))
}

fn number(v: Option<f64>) -> FeatureValue {
    v.map_or(FeatureValue::Null, FeatureValue::Number)
}

fn report(
    t: &Template,
    id: String,
    age: u32,
    sex: Sex,
    nodules: Vec<NoduleDescriptor>,
) -> StructuredReport {
    StructuredReport {
        report_features: t
            .report_features
            .iter()
            .map(|f| (f.name.clone(), FeatureValue::Null))
            .collect(),
        number_of_nodules: Some(nodules.len() as u32),
        nodules,
        meta: ReportMeta {
            report_id: id,
            age_years: Some(age),
            sex,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn number_ids(r: &mut StructuredReport) {
    for (i, d) in r.nodules.iter_mut().enumerate() {
        d.set("nodule_id", FeatureValue::Number(i as f64 + 1.0));
    }
}

/// 5,192 reports holding 10,377 descriptors with the lobe, lung, type,
/// stability, diameter and overall Lung-RADS memberships of the cohort
/// table, per age and sex stratum.
pub fn table3_corpus(t: &Template) -> Corpus {
    let mut reports = Vec::new();
    for (s, &(age, sex)) in STRATA.iter().enumerate() {
        let n_reports = T3_REPORTS[s] as usize;
        let mut rs: Vec<StructuredReport> = (0..n_reports)
            .map(|k| {
                let mut r = report(t, format!("t3-{s}-{k:04}"), age, sex, Vec::new());
                r.report_features.insert(
                    "overall_lung_rads".into(),
                    text(pick(&T3_LUNG_RADS, s, k as u64)),
                );
                r
            })
            .collect();
        for j in 0..T3_DESCRIPTORS[s] {
            let mut d = NoduleDescriptor::all_null(t);
            d.set("lobe", text(pick(&T3_LOBE, s, j)));
            d.set("lung", text(pick(&T3_LUNG, s, j)));
            d.set("type", text(pick(&T3_TYPE, s, j)));
            d.set("stability", text(pick(&T3_STABILITY, s, j)));
            d.set("average_diameter_mm", number(pick(&T3_DIAMETER, s, j)));
            rs[j as usize % n_reports].nodules.push(d);
        }
        for r in &mut rs {
            r.number_of_nodules = Some(r.nodules.len() as u32);
            number_ids(r);
        }
        reports.extend(rs);
    }
    Corpus::from_reports(reports).expect("fixture ids are unique")
}

struct T4Type {
    name: &'static str,
    total: u64,
    /// `<6`, `6-10`, `>=10`.
    diameter: [u64; 3],
    /// RUL, RML, RLL, LUL, lingula, LLL.
    lobe: [u64; 6],
    /// stable, new, increase, decrease.
    stability: [u64; 4],
}

const T4: [T4Type; 3] = [
    T4Type {
        name: "solid",
        total: 2027,
        diameter: [1539, 305, 55],
        lobe: [529, 176, 405, 384, 38, 332],
        stability: [1343, 212, 60, 33],
    },
    T4Type {
        name: "part-solid",
        total: 203,
        diameter: [88, 59, 38],
        lobe: [72, 13, 23, 55, 6, 28],
        stability: [86, 36, 44, 8],
    },
    T4Type {
        name: "ground glass",
        total: 696,
        diameter: [335, 114, 81],
        lobe: [226, 42, 112, 164, 21, 59],
        stability: [388, 88, 41, 45],
    },
];

const T4_DIAMETERS: [f64; 3] = [4.0, 8.0, 12.0];
const T4_LOBES: [&str; 6] = [
    "right upper lobe",
    "right middle lobe",
    "right lower lobe",
    "left upper lobe",
    "lingula",
    "left lower lobe",
];
const T4_STABILITY: [&str; 4] = ["stable", "new", "increase", "decrease"];

fn nth<V: Copy>(values: &[V], counts: &[u64], j: u64) -> Option<V> {
    let mut acc = 0;
    for (v, c) in values.iter().zip(counts) {
        acc += c;
        if j < acc {
            return Some(*v);
        }
    }
    None
}

fn table4_descriptors(t: &Template) -> Vec<NoduleDescriptor> {
    let mut out = Vec::new();
    for ty in &T4 {
        for j in 0..ty.total {
            let mut d = NoduleDescriptor::all_null(t);
            d.set("type", FeatureValue::Text(ty.name.into()));
            d.set(
                "average_diameter_mm",
                number(nth(&T4_DIAMETERS, &ty.diameter, j)),
            );
            d.set("lobe", text(nth(&T4_LOBES, &ty.lobe, j)));
            d.set("stability", text(nth(&T4_STABILITY, &ty.stability, j)));
            out.push(d);
        }
    }
    out
}

fn chunked(
    t: &Template,
    prefix: &str,
    ds: Vec<NoduleDescriptor>,
    per_report: usize,
) -> Vec<StructuredReport> {
    let mut reports = Vec::new();
    let mut it = ds.into_iter().peekable();
    while it.peek().is_some() {
        let nodules: Vec<_> = it.by_ref().take(per_report).collect();
        let k = reports.len();
        let sex = if k % 2 == 0 { Sex::Male } else { Sex::Female };
        let mut r = report(
            t,
            format!("{prefix}-{k:04}"),
            55 + (k % 30) as u32,
            sex,
            nodules,
        );
        number_ids(&mut r);
        reports.push(r);
    }
    reports
}

/// 2,926 descriptors with the attenuation by diameter, location and
/// stability memberships of the attenuation cross-tab.
pub fn table4_corpus(t: &Template) -> Corpus {
    Corpus::from_reports(chunked(t, "t4", table4_descriptors(t), 3)).expect("unique ids")
}

fn is_figure6_match(d: &NoduleDescriptor) -> bool {
    d.get("type").as_text() == Some("solid")
        && matches!(d.get("stability").as_text(), Some("new" | "increase"))
}

/// Free text for a growing solid nodule that states the growth only
/// through its earlier size.
fn growth_narrative(d: &NoduleDescriptor) -> String {
    let place = d
        .get("lobe")
        .as_text()
        .map_or(String::new(), |l| format!(" in the {l}"));
    let growth = match d.get("average_diameter_mm").as_number() {
        Some(x) => format!(
            "previously measuring {} mm, now measuring {} mm",
            format_decimal((x - 1.0).max(1.0), 2),
            format_decimal(x, 2)
        ),
        None => "larger than on the prior study".to_string(),
    };
    format!("Number of nodules: 1.\n\nNodule 1: Solid nodule{place}, {growth}.")
}

/// The attenuation fixture with series and image ids and rendered source
/// text. Exactly 272 descriptors satisfy [`FIGURE6_QUERY`]; 219 of them
/// carry a series id and 256 an image id. One growing nodule lives alone in
/// [`PREVIOUSLY_MEASURING_ID`], whose text never says "increase".
pub fn figure6_corpus(t: &Template) -> Corpus {
    let mut ds = table4_descriptors(t);
    let mut matched = 0u64;
    for (i, d) in ds.iter_mut().enumerate() {
        let (series, image) = if is_figure6_match(d) {
            matched += 1;
            (matched <= 219, matched > 16)
        } else {
            (i % 4 != 0, i % 5 != 0)
        };
        if series {
            d.set("series_id", FeatureValue::Number((1 + i % 9) as f64));
        }
        if image {
            d.set("image_id", FeatureValue::Number((1 + i % 400) as f64));
        }
    }
    let growth = ds
        .iter()
        .position(|d| is_figure6_match(d) && d.get("stability").as_text() == Some("increase"))
        .expect("fixture has growing solid nodules");
    let lone = ds.remove(growth);

    let mut reports = chunked(t, "f6", ds, 3);
    for r in &mut reports {
        r.source_text = Some(render_lsr(r, t));
    }
    let mut narrative = report(
        t,
        PREVIOUSLY_MEASURING_ID.into(),
        67,
        Sex::Female,
        vec![lone],
    );
    number_ids(&mut narrative);
    narrative.source_text = Some(growth_narrative(&narrative.nodules[0]));
    reports.push(narrative);
    Corpus::from_reports(reports).expect("unique ids")
}
