//! Template, vocabulary and adapter assembled once, then used for every
//! conversion.

use std::path::Path;
use std::sync::Arc;

use fsr_core::decode::{decode_session, CompiledTemplate, DecodeState, DEFAULT_INSTRUCTION};
use fsr_core::lm::{
    ContextPredicate, LexicalSource, ProbabilitySource, RemoteConfig, RemoteSource, ScriptRule,
    ScriptedSource, StepContext, UniformSource,
};
use fsr_core::report::{validate_report, StructuredReport};
use fsr_core::template::{parse_template, Template};
use fsr_core::token::{TokenId, Vocab};

use crate::config::{AdapterKind, Settings};
use crate::error::CliError;

pub fn load_template(path: Option<&Path>) -> Result<Template, CliError> {
    match path {
        None => Ok(Template::lung_nodule()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p.display(), e))?;
            parse_template(&text).map_err(|e| CliError::Schema(format!("{}: {e}", p.display())))
        }
    }
}

/// Parses `feature = value` lines; `#` starts a comment line.
pub fn parse_script(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (f, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `feature = value`", i + 1))?;
        out.push((f.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

enum Adapter {
    Scripted(ScriptedSource),
    Uniform(u64),
    Lexical,
    Remote(RemoteSource),
}

pub struct Engine {
    compiled: Arc<CompiledTemplate>,
    adapter: Adapter,
}

/// Favors `favored` inside slots of `feature` until the slot holds all of it.
fn script_rule(feature: fsr_core::template::FeatureId, favored: Vec<TokenId>) -> ScriptRule {
    let seq = favored.clone();
    ScriptRule {
        predicate: ContextPredicate::Custom(Arc::new(move |ctx: &StepContext<'_>| {
            ctx.slot.is_some_and(|h| {
                h.feature == feature && h.partial.len() < seq.len() && seq.starts_with(h.partial)
            })
        })),
        favored,
    }
}

impl Engine {
    pub fn new(settings: &Settings) -> Result<Engine, CliError> {
        let template = load_template(settings.template.as_deref())?;
        let vocab = match &settings.vocab {
            None => Vocab::for_template(&template),
            Some(p) => Vocab::from_vocab_file(
                &std::fs::read_to_string(p).map_err(|e| CliError::io(p.display(), e))?,
            ),
        };
        let compiled =
            CompiledTemplate::new(template, &vocab).map_err(|e| CliError::Schema(e.to_string()))?;
        let adapter = match settings.adapter {
            AdapterKind::Uniform => Adapter::Uniform(settings.seed),
            AdapterKind::Lexical => Adapter::Lexical,
            AdapterKind::Scripted => Adapter::Scripted(Self::scripted(&compiled, settings)?),
            AdapterKind::Remote => {
                let url = settings.remote_url.clone().ok_or_else(|| {
                    CliError::Usage("the remote adapter needs --remote-url".into())
                })?;
                let mut cfg = RemoteConfig::new(url);
                if let Some(ms) = settings.remote_timeout_ms {
                    cfg.timeout_ms = ms;
                }
                if let Some(n) = settings.remote_retries {
                    cfg.max_retries = n;
                }
                let src = RemoteSource::new(cfg, compiled.vocab().len())
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                Adapter::Remote(src)
            }
        };
        Ok(Engine { compiled, adapter })
    }

    fn scripted(c: &Arc<CompiledTemplate>, s: &Settings) -> Result<ScriptedSource, CliError> {
        let lines = match &s.script {
            None => Vec::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p.display(), e))?;
                parse_script(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
            }
        };
        let t = c.template();
        let v = c.vocab();
        let mut rules = Vec::new();
        for (feature, value) in lines {
            let (id, _) = t
                .feature_by_name(&feature)
                .ok_or_else(|| CliError::Usage(format!("script: unknown feature {feature:?}")))?;
            rules.push(script_rule(id, v.encode(&value)));
        }
        rules.push(ScriptRule {
            predicate: ContextPredicate::Always,
            favored: v.encode("null"),
        });
        Ok(ScriptedSource::new(v.len(), rules))
    }

    pub fn template(&self) -> &Template {
        self.compiled.template()
    }

    /// Converts one free-text report. `ordinal` offsets the uniform seed so
    /// a batch does not repeat one output.
    pub fn convert(
        &self,
        report_id: &str,
        text: &str,
        ordinal: u64,
    ) -> Result<StructuredReport, CliError> {
        self.convert_traced(report_id, text, ordinal, false)
            .map(|(r, _)| r)
    }

    /// As [`Engine::convert`], also returning the per-step trace as JSON
    /// lines tagged with the report id when `trace` is set.
    pub fn convert_traced(
        &self,
        report_id: &str,
        text: &str,
        ordinal: u64,
        trace: bool,
    ) -> Result<(StructuredReport, String), CliError> {
        let run = |src: &dyn ProbabilitySource| {
            decode_session(&self.compiled, DEFAULT_INSTRUCTION, text, src, trace)
        };
        let state: DecodeState = match &self.adapter {
            Adapter::Uniform(seed) => run(&UniformSource::new(
                self.compiled.vocab().len(),
                seed.wrapping_add(ordinal),
            )),
            Adapter::Lexical => run(&LexicalSource::new(
                text,
                self.compiled.template(),
                self.compiled.vocab().clone(),
            )),
            Adapter::Scripted(s) => run(s),
            Adapter::Remote(s) => run(s),
        }?;
        let mut r = state.report()?;
        r.meta.report_id = report_id.to_string();
        r.source_text = Some(text.to_string());
        if let Some(v) = validate_report(&r, self.template()).first() {
            return Err(CliError::Decode(format!(
                "{report_id}: invalid output: {v}"
            )));
        }
        let mut lines = String::new();
        for rec in state.trace() {
            let mut v = serde_json::to_value(rec).expect("trace serializes");
            v["report_id"] = report_id.into();
            lines.push_str(&v.to_string());
            lines.push('\n');
        }
        Ok((r, lines))
    }
}
