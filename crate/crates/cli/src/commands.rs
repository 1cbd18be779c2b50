//! Command bodies. Each returns its output as a value so the binary and the
//! tests share one code path.

use std::path::{Path, PathBuf};

use fsr_core::analytics::{
    compare, crosstab, evaluate, stratified_counts, AgeBins, ColSpec, EvalOptions,
};
use fsr_core::fixtures::{figure6_corpus, table3_corpus, table4_corpus};
use fsr_core::query::{execute, parse_query, result_stats, DEFAULT_DISTRIBUTIONS};
use fsr_core::report::{load_corpus, validate_report, write_corpus, Corpus};
use fsr_core::template::{CandidateKind, Template};
use serde_json::{json, Value};

use crate::engine::Engine;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fixture {
    Table3,
    Table4,
    Figure6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Loads a corpus and rejects it unless every report conforms to `t`.
pub fn load_checked(path: &Path, t: &Template) -> Result<Corpus, CliError> {
    let c = load_corpus(path).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    if let Some(line) = violations(&c, t).into_iter().next() {
        return Err(CliError::Schema(format!("{}: {line}", path.display())));
    }
    Ok(c)
}

/// One line per violation, prefixed with the report id.
pub fn violations(c: &Corpus, t: &Template) -> Vec<String> {
    c.iter()
        .flat_map(|r| {
            validate_report(r, t)
                .into_iter()
                .map(move |v| format!("{}: {v}", r.meta.report_id))
        })
        .collect()
}

pub fn corpus_text(c: &Corpus) -> String {
    let mut buf = Vec::new();
    write_corpus(c, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("corpus is UTF-8")
}

/// Input files in order: each directory contributes its regular,
/// non-hidden files sorted by name.
pub fn input_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in inputs {
        let meta = std::fs::metadata(p).map_err(|e| CliError::io(p.display(), e))?;
        if !meta.is_dir() {
            out.push(p.clone());
            continue;
        }
        let mut files = Vec::new();
        for entry in std::fs::read_dir(p).map_err(|e| CliError::io(p.display(), e))? {
            let path = entry.map_err(|e| CliError::io(p.display(), e))?.path();
            let hidden = path
                .file_name()
                .is_some_and(|n| n.to_string_lossy().starts_with('.'));
            if path.is_file() && !hidden {
                files.push(path);
            }
        }
        files.sort();
        out.extend(files);
    }
    Ok(out)
}

/// Converts every input file into one report whose id is the file stem.
/// The second value holds the decode trace when `trace` is set.
pub fn convert(
    engine: &Engine,
    inputs: &[PathBuf],
    trace: bool,
) -> Result<(Corpus, String), CliError> {
    let mut reports = Vec::new();
    let mut trace_lines = String::new();
    for (i, path) in input_files(inputs)?.iter().enumerate() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let (r, t) = engine
            .convert_traced(&id, &text, i as u64, trace)
            .map_err(|e| match e {
                CliError::Decode(m) => CliError::Decode(format!("{}: {m}", path.display())),
                other => other,
            })?;
        reports.push(r);
        trace_lines.push_str(&t);
    }
    let c = Corpus::from_reports(reports)
        .map_err(|e| CliError::Usage(format!("input reports: {e}")))?;
    Ok((c, trace_lines))
}

pub fn eval(
    preds: &Corpus,
    golds: &Corpus,
    other: Option<&Corpus>,
    t: &Template,
    opts: EvalOptions,
) -> Result<Value, CliError> {
    let usage = |e: fsr_core::analytics::AnalyticsError| CliError::Usage(e.to_string());
    let report = evaluate(preds, golds, t, opts).map_err(usage)?;
    let mut out = json!({ "evaluation": report });
    if let Some(b) = other {
        let paired = compare(preds, b, golds, t).map_err(usage)?;
        out["comparison"] = json!(paired);
    }
    Ok(out)
}

pub struct StatsArgs<'a> {
    pub feature: &'a str,
    pub by_sex: bool,
    pub age_cuts: Option<&'a [u32]>,
    pub cols: &'a [String],
    pub format: Format,
}

/// A stratified table, or a cross-tabulation when columns are given.
pub fn stats(c: &Corpus, t: &Template, a: &StatsArgs<'_>) -> Result<String, CliError> {
    let usage = |e: fsr_core::analytics::AnalyticsError| CliError::Usage(e.to_string());
    if !a.cols.is_empty() {
        let cols = a
            .cols
            .iter()
            .map(|s| ColSpec::parse(t, s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(usage)?;
        let x = crosstab(c, t, a.feature, &cols).map_err(usage)?;
        return Ok(match a.format {
            Format::Csv => x.to_csv(),
            Format::Json => pretty(&x.to_json()),
        });
    }
    let bins = match a.age_cuts {
        Some(cuts) => AgeBins::from_cuts(cuts).map_err(usage)?,
        None => AgeBins::default(),
    };
    let table = stratified_counts(c, t, a.feature, &bins, a.by_sex).map_err(usage)?;
    Ok(match a.format {
        Format::Csv => table.to_csv(),
        Format::Json => pretty(&table.to_json()),
    })
}

/// Matches, their count and per-feature distributions of one query.
pub fn query(
    c: &Corpus,
    t: &Template,
    text: &str,
    features: &[String],
    limit: Option<usize>,
) -> Result<Value, CliError> {
    let q = parse_query(text, t).map_err(|e| CliError::Usage(format!("query: {e}")))?;
    let mut res = execute(&q, c, t);
    let names: Vec<&str> = if features.is_empty() {
        DEFAULT_DISTRIBUTIONS.to_vec()
    } else {
        features.iter().map(String::as_str).collect()
    };
    let dists = result_stats(&res, c, t, &names).map_err(CliError::Usage)?;
    if let Some(n) = limit {
        res.matches.truncate(n);
    }
    Ok(json!({
        "query": res.query,
        "count": res.count,
        "distributions": dists,
        "matches": res.matches,
    }))
}

pub fn fixture(which: Fixture, t: &Template) -> Corpus {
    match which {
        Fixture::Table3 => table3_corpus(t),
        Fixture::Table4 => table4_corpus(t),
        Fixture::Figure6 => figure6_corpus(t),
    }
}

/// Feature names, levels and candidates, for building query forms.
pub fn features_json(t: &Template) -> Value {
    let features: Vec<Value> = t
        .features()
        .map(|(_, f)| {
            let mut v = json!({
                "name": f.name,
                "display_name": f.display_name,
                "level": f.level,
                "nullable": f.candidates.nullable,
            });
            match &f.candidates.kind {
                CandidateKind::Enumerated(_) => {
                    v["kind"] = json!("enumerated");
                    v["values"] = json!(f.candidates.distinct_values());
                }
                CandidateKind::Integer(r) | CandidateKind::Float(r) => {
                    v["kind"] = json!("numeric");
                    v["min"] = json!(r.min());
                    v["max"] = json!(r.max());
                }
            }
            v
        })
        .collect();
    json!({ "template": t.name, "features": features })
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Writes `text` to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p.display(), e)),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::io("stdout", e))
        }
    }
}
