//! Fully-structured report model, canonical JSON, and corpus handling.

mod corpus;
mod render;
mod synth;
mod validate;

use std::fmt;

use indexmap::IndexMap;
use serde_json::{Map, Number, Value};
use thiserror::Error;

use crate::template::{Template, NODULES_KEY};

pub use corpus::{load_corpus, parse_corpus, save_corpus, write_corpus, Corpus, CorpusError};
pub use render::render_lsr;
pub use synth::{synth_corpus, Marginals, SynthError};
pub use validate::{validate_report, Violation};

pub const META_KEY: &str = "meta";
pub const SOURCE_KEY: &str = "source_text";

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValue {
    Null,
    Text(String),
    Number(f64),
}

impl FeatureValue {
    pub fn is_null(&self) -> bool {
        matches!(self, FeatureValue::Null)
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            FeatureValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            FeatureValue::Number(v) => Some(*v),
            _ => None,
        }
    }

    /// Equality with numeric tolerance 1e-9.
    pub fn matches(&self, other: &FeatureValue) -> bool {
        match (self, other) {
            (FeatureValue::Null, FeatureValue::Null) => true,
            (FeatureValue::Text(a), FeatureValue::Text(b)) => a == b,
            (FeatureValue::Number(a), FeatureValue::Number(b)) => (a - b).abs() <= 1e-9,
            _ => false,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            FeatureValue::Null => Value::Null,
            FeatureValue::Text(s) => Value::String(s.clone()),
            FeatureValue::Number(v) => number_json(*v),
        }
    }

    pub fn from_json(v: &Value) -> Option<FeatureValue> {
        match v {
            Value::Null => Some(FeatureValue::Null),
            Value::String(s) => Some(FeatureValue::Text(s.clone())),
            Value::Number(n) => n.as_f64().map(FeatureValue::Number),
            _ => None,
        }
    }
}

impl serde::Serialize for FeatureValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl fmt::Display for FeatureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureValue::Null => f.write_str("null"),
            FeatureValue::Text(s) => f.write_str(s),
            FeatureValue::Number(v) => write!(f, "{v}"),
        }
    }
}

/// Integral values serialize as JSON integers so that the output is stable
/// under parse and re-serialize.
fn number_json(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        if v >= 0.0 {
            Value::Number(Number::from(v as u64))
        } else {
            Value::Number(Number::from(v as i64))
        }
    } else {
        Number::from_f64(v)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }
}

/// One nodule descriptor: feature name to value, in template order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoduleDescriptor {
    pub values: IndexMap<String, FeatureValue>,
}

impl NoduleDescriptor {
    /// A descriptor with every nodule feature of `t` set to null.
    pub fn all_null(t: &Template) -> Self {
        NoduleDescriptor {
            values: t
                .nodule_features
                .iter()
                .map(|f| (f.name.clone(), FeatureValue::Null))
                .collect(),
        }
    }

    /// Missing keys read as null.
    pub fn get(&self, feature: &str) -> &FeatureValue {
        self.values.get(feature).unwrap_or(&FeatureValue::Null)
    }

    pub fn set(&mut self, feature: &str, value: FeatureValue) {
        self.values.insert(feature.to_string(), value);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Sex {
    Male,
    Female,
    #[default]
    Unknown,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
            Sex::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Sex> {
        match s {
            "male" => Some(Sex::Male),
            "female" => Some(Sex::Female),
            "unknown" => Some(Sex::Unknown),
            _ => None,
        }
    }
}

/// Ingestion-time sidecar data; never decoded.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReportMeta {
    pub report_id: String,
    pub age_years: Option<u32>,
    pub sex: Sex,
    pub institution: Option<String>,
    pub study_date: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StructuredReport {
    /// `None` when the count slot decoded to null; such a report has no
    /// descriptors.
    pub number_of_nodules: Option<u32>,
    pub nodules: Vec<NoduleDescriptor>,
    pub report_features: IndexMap<String, FeatureValue>,
    pub meta: ReportMeta,
    pub source_text: Option<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("expected a JSON object")]
    NotObject,
    #[error("{0}: unexpected value type")]
    BadType(String),
}

impl StructuredReport {
    pub fn report_id(&self) -> &str {
        &self.meta.report_id
    }

    /// Report-level feature value; missing keys read as null.
    pub fn report_value(&self, feature: &str) -> &FeatureValue {
        self.report_features
            .get(feature)
            .unwrap_or(&FeatureValue::Null)
    }

    /// Canonical JSON: count, nodules (omitted when empty), report features,
    /// meta, then the optional source text.
    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert(
            count_key().into(),
            self.number_of_nodules
                .map(|n| Value::Number(n.into()))
                .unwrap_or(Value::Null),
        );
        if !self.nodules.is_empty() {
            let list = self
                .nodules
                .iter()
                .map(|d| {
                    Value::Object(
                        d.values
                            .iter()
                            .map(|(k, v)| (k.clone(), v.to_json()))
                            .collect(),
                    )
                })
                .collect();
            obj.insert(NODULES_KEY.into(), Value::Array(list));
        }
        for (k, v) in &self.report_features {
            obj.insert(k.clone(), v.to_json());
        }
        let mut meta = Map::new();
        meta.insert(
            "report_id".into(),
            Value::String(self.meta.report_id.clone()),
        );
        meta.insert(
            "age_years".into(),
            self.meta
                .age_years
                .map(|a| Value::Number(a.into()))
                .unwrap_or(Value::Null),
        );
        meta.insert("sex".into(), Value::String(self.meta.sex.as_str().into()));
        meta.insert("institution".into(), opt_string(&self.meta.institution));
        meta.insert("study_date".into(), opt_string(&self.meta.study_date));
        obj.insert(META_KEY.into(), Value::Object(meta));
        if let Some(src) = &self.source_text {
            obj.insert(SOURCE_KEY.into(), Value::String(src.clone()));
        }
        Value::Object(obj)
    }

    pub fn to_json_string(&self) -> String {
        self.to_json().to_string()
    }

    pub fn from_json(v: &Value) -> Result<StructuredReport, ParseError> {
        let obj = v.as_object().ok_or(ParseError::NotObject)?;
        let mut r = StructuredReport::default();
        for (key, value) in obj {
            match key.as_str() {
                k if k == count_key() => {
                    r.number_of_nodules = match value {
                        Value::Null => None,
                        Value::Number(n) => Some(
                            n.as_u64()
                                .and_then(|n| u32::try_from(n).ok())
                                .ok_or_else(|| ParseError::BadType(k.into()))?,
                        ),
                        _ => return Err(ParseError::BadType(k.into())),
                    }
                }
                NODULES_KEY => {
                    let list = value
                        .as_array()
                        .ok_or_else(|| ParseError::BadType(NODULES_KEY.into()))?;
                    for (i, item) in list.iter().enumerate() {
                        let fields = item
                            .as_object()
                            .ok_or_else(|| ParseError::BadType(format!("nodules[{i}]")))?;
                        let mut d = NoduleDescriptor::default();
                        for (fk, fv) in fields {
                            let val = FeatureValue::from_json(fv)
                                .ok_or_else(|| ParseError::BadType(format!("nodules[{i}].{fk}")))?;
                            d.values.insert(fk.clone(), val);
                        }
                        r.nodules.push(d);
                    }
                }
                META_KEY => r.meta = parse_meta(value)?,
                SOURCE_KEY => {
                    r.source_text = Some(
                        value
                            .as_str()
                            .ok_or_else(|| ParseError::BadType(SOURCE_KEY.into()))?
                            .to_string(),
                    )
                }
                k => {
                    let val = FeatureValue::from_json(value)
                        .ok_or_else(|| ParseError::BadType(k.into()))?;
                    r.report_features.insert(k.to_string(), val);
                }
            }
        }
        Ok(r)
    }

    pub fn from_json_str(s: &str) -> Result<StructuredReport, ParseError> {
        let v: Value = serde_json::from_str(s).map_err(|e| ParseError::Json(e.to_string()))?;
        StructuredReport::from_json(&v)
    }
}

/// The count key is fixed by the shipped schema; templates may rename their
/// auxiliary feature, but reports always serialize the count under this key.
pub fn count_key() -> &'static str {
    "number_of_nodules"
}

fn opt_string(s: &Option<String>) -> Value {
    s.as_ref()
        .map(|s| Value::String(s.clone()))
        .unwrap_or(Value::Null)
}

fn parse_meta(v: &Value) -> Result<ReportMeta, ParseError> {
    let bad = |k: &str| ParseError::BadType(format!("meta.{k}"));
    let obj = v
        .as_object()
        .ok_or_else(|| ParseError::BadType(META_KEY.into()))?;
    let mut m = ReportMeta::default();
    for (k, val) in obj {
        match k.as_str() {
            "report_id" => m.report_id = val.as_str().ok_or_else(|| bad(k))?.to_string(),
            "age_years" => {
                m.age_years = match val {
                    Value::Null => None,
                    _ => Some(
                        val.as_u64()
                            .and_then(|a| u32::try_from(a).ok())
                            .ok_or_else(|| bad(k))?,
                    ),
                }
            }
            "sex" => m.sex = val.as_str().and_then(Sex::parse).ok_or_else(|| bad(k))?,
            "institution" => m.institution = opt_str(val).map_err(|_| bad(k))?,
            "study_date" => m.study_date = opt_str(val).map_err(|_| bad(k))?,
            _ => return Err(bad(k)),
        }
    }
    Ok(m)
}

fn opt_str(v: &Value) -> Result<Option<String>, ()> {
    match v {
        Value::Null => Ok(None),
        Value::String(s) => Ok(Some(s.clone())),
        _ => Err(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> StructuredReport {
        let t = Template::lung_nodule();
        let mut d = NoduleDescriptor::all_null(&t);
        d.set("lobe", FeatureValue::Text("right lower lobe".into()));
        d.set("average_diameter_mm", FeatureValue::Number(4.0));
        d.set("long_axis_mm", FeatureValue::Number(5.25));
        let mut r = StructuredReport {
            number_of_nodules: Some(1),
            nodules: vec![d],
            ..Default::default()
        };
        for f in &t.report_features {
            r.report_features.insert(f.name.clone(), FeatureValue::Null);
        }
        r.meta.report_id = "r1".into();
        r.meta.age_years = Some(61);
        r.meta.sex = Sex::Female;
        r
    }

    #[test]
    fn canonical_key_order() {
        let s = sample().to_json_string();
        let count = s.find("number_of_nodules").unwrap();
        let nodules = s.find("\"nodules\"").unwrap();
        let overall = s.find("overall_lung_rads").unwrap();
        let meta = s.find("\"meta\"").unwrap();
        assert!(count < nodules && nodules < overall && overall < meta);
        assert!(s.contains("\"average_diameter_mm\":4,"));
        assert!(s.contains("\"long_axis_mm\":5.25"));
        assert!(s.contains("\"nodule_id\":null"));
    }

    #[test]
    fn serialize_parse_fixed_point() {
        let s = sample().to_json_string();
        let back = StructuredReport::from_json_str(&s).unwrap();
        assert_eq!(back, sample());
        assert_eq!(back.to_json_string(), s);
    }

    #[test]
    fn zero_count_has_no_nodules_key() {
        let r = StructuredReport {
            number_of_nodules: Some(0),
            ..Default::default()
        };
        assert!(!r.to_json_string().contains("nodules\":["));
    }

    #[test]
    fn rejects_bad_sex() {
        let err = StructuredReport::from_json_str(r#"{"meta":{"sex":"x"}}"#).unwrap_err();
        assert_eq!(err, ParseError::BadType("meta.sex".into()));
    }
}
