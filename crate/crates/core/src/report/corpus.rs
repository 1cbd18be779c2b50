//! JSON-lines corpus persistence.
//!
//! The first line is a schema header `{"schema":"fsr-corpus","version":1}`;
//! each following non-empty line holds one canonical report.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde_json::json;
use thiserror::Error;

use super::StructuredReport;

pub const SCHEMA_NAME: &str = "fsr-corpus";
pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate report_id {id:?}")]
    DuplicateId { line: usize, id: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub reports: Vec<StructuredReport>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new() -> Self {
        Corpus::default()
    }

    /// Fails if a report id repeats; `line` in the error is the 1-based
    /// position of the offending report.
    pub fn from_reports(reports: Vec<StructuredReport>) -> Result<Self, CorpusError> {
        let mut c = Corpus::new();
        for (i, r) in reports.into_iter().enumerate() {
            c.push(r)
                .map_err(|id| CorpusError::DuplicateId { line: i + 1, id })?;
        }
        Ok(c)
    }

    /// Appends `r`, returning its id as the error if already present.
    pub fn push(&mut self, r: StructuredReport) -> Result<(), String> {
        let id = r.meta.report_id.clone();
        if self.index.contains_key(&id) {
            return Err(id);
        }
        self.index.insert(id, self.reports.len());
        self.reports.push(r);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn get(&self, report_id: &str) -> Option<&StructuredReport> {
        self.index.get(report_id).map(|&i| &self.reports[i])
    }

    pub fn iter(&self) -> std::slice::Iter<'_, StructuredReport> {
        self.reports.iter()
    }

    /// Total number of nodule descriptors.
    pub fn descriptor_count(&self) -> usize {
        self.reports.iter().map(|r| r.nodules.len()).sum()
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a StructuredReport;
    type IntoIter = std::slice::Iter<'a, StructuredReport>;

    fn into_iter(self) -> Self::IntoIter {
        self.reports.iter()
    }
}

pub fn write_corpus<W: Write>(c: &Corpus, mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "{}",
        json!({"schema": SCHEMA_NAME, "version": SCHEMA_VERSION})
    )?;
    for r in &c.reports {
        writeln!(w, "{}", r.to_json_string())?;
    }
    w.flush()
}

pub fn save_corpus(c: &Corpus, path: &Path) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    write_corpus(c, io::BufWriter::new(file)).map_err(io_err)
}

pub fn parse_corpus(text: &str) -> Result<Corpus, CorpusError> {
    let mut lines = text.lines().enumerate();
    let header_ok = lines
        .next()
        .and_then(|(_, l)| serde_json::from_str::<serde_json::Value>(l).ok())
        .is_some_and(|h| h["schema"] == SCHEMA_NAME && h["version"] == SCHEMA_VERSION);
    if !header_ok {
        return Err(CorpusError::Malformed {
            line: 1,
            message: format!(
                "expected header {{\"schema\":\"{SCHEMA_NAME}\",\"version\":{SCHEMA_VERSION}}}"
            ),
        });
    }
    let mut c = Corpus::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let r = StructuredReport::from_json_str(line).map_err(|e| CorpusError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        c.push(r)
            .map_err(|id| CorpusError::DuplicateId { line: i + 1, id })?;
    }
    Ok(c)
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text)
}
