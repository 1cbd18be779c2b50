use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use fsr_core::analytics::{EvalOptions, DEFAULT_RESAMPLES, DEFAULT_SEED};

use crate::commands::{self, Fixture, Format, StatsArgs};
use crate::config::{ConfigFile, Overrides, PathFlags, Settings};
use crate::engine::{load_template, Engine};
use crate::error::CliError;
use crate::server::{self, AppState};

#[derive(Debug, Parser)]
#[command(
    name = "fsr",
    version,
    about = "Structured radiology report conversion and retrieval"
)]
pub struct Cli {
    /// Key-value config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Template spec file [default: shipped lung nodule template]
    #[arg(long, global = true)]
    pub template: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert free-text reports into a structured corpus
    Convert {
        /// Report text files or directories of them; ids are file stems
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Corpus file to write [default: stdout]
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write per-step decode records as JSON lines to this file
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        adapter: Overrides,
    },
    /// Check every report of a corpus against the template
    Validate {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Score predictions against gold reports
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Second prediction corpus for a paired comparison
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
        /// Bootstrap seed
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Stratified counts of one feature, or a cross-tabulation
    Stats {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        feature: String,
        /// Split each age stratum by sex
        #[arg(long)]
        by_sex: bool,
        /// Ascending age cut points [default: 55,65,75]
        #[arg(long, value_delimiter = ',')]
        age_cuts: Option<Vec<u32>>,
        /// Column spec `feature` or `feature:spec`; repeatable
        #[arg(long = "col")]
        cols: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a retrieval query and print matches with distributions
    Query {
        query: String,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Features to summarize [default: lobe, type, stability, size, Lung-RADS]
        #[arg(long, value_delimiter = ',')]
        features: Vec<String>,
        /// Maximum matches listed; the count covers all of them
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a built-in analysis fixture corpus
    Fixture {
        #[arg(value_enum)]
        name: Fixture,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Serve the HTTP API
    Serve {
        /// Address `host:port` [env: FSR_LISTEN] [default: 127.0.0.1:8080]
        #[arg(long)]
        listen: Option<String>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Directory of static files served at `/`
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[command(flatten)]
        adapter: Overrides,
    },
}

fn settings(cli: &Cli, flags: &Overrides, mut paths: PathFlags) -> Result<Settings, CliError> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    paths.template = cli.template.clone();
    Settings::merge(&file, flags, &paths)
}

fn corpus_path(s: &Settings) -> Result<&Path, CliError> {
    s.corpus
        .as_deref()
        .ok_or_else(|| CliError::Usage("no corpus given (--corpus or config key corpus)".into()))
}

fn with_corpus(cli: &Cli, corpus: &Option<PathBuf>) -> Result<Settings, CliError> {
    let paths = PathFlags {
        corpus: corpus.clone(),
        ..Default::default()
    };
    settings(cli, &Overrides::default(), paths)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Convert {
            input,
            output,
            trace,
            adapter,
        } => {
            let s = settings(&cli, adapter, PathFlags::default())?;
            let engine = Engine::new(&s)?;
            let (c, trace_lines) = commands::convert(&engine, input, trace.is_some())?;
            if c.is_empty() {
                eprintln!("warning: no input reports; writing an empty corpus");
            }
            if let Some(p) = trace {
                std::fs::write(p, trace_lines).map_err(|e| CliError::io(p.display(), e))?;
            }
            commands::emit(output.as_deref(), &commands::corpus_text(&c))
        }
        Command::Validate { corpus } => {
            let s = with_corpus(&cli, corpus)?;
            let t = load_template(s.template.as_deref())?;
            let path = corpus_path(&s)?;
            let c = fsr_core::report::load_corpus(path)
                .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
            let problems = commands::violations(&c, &t);
            for p in &problems {
                eprintln!("{p}");
            }
            if problems.is_empty() {
                println!("{} reports valid", c.len());
                Ok(())
            } else {
                Err(CliError::Schema(format!(
                    "{}: {} violation(s)",
                    path.display(),
                    problems.len()
                )))
            }
        }
        Command::Eval {
            pred,
            gold,
            compare,
            resamples,
            seed,
            output,
        } => {
            let s = with_corpus(&cli, &None)?;
            let t = load_template(s.template.as_deref())?;
            let p = commands::load_checked(pred, &t)?;
            let g = commands::load_checked(gold, &t)?;
            let b = compare
                .as_deref()
                .map(|path| commands::load_checked(path, &t))
                .transpose()?;
            let opts = EvalOptions {
                resamples: *resamples,
                seed: *seed,
            };
            let v = commands::eval(&p, &g, b.as_ref(), &t, opts)?;
            commands::emit(output.as_deref(), &commands::pretty(&v))
        }
        Command::Stats {
            corpus,
            feature,
            by_sex,
            age_cuts,
            cols,
            format,
            output,
        } => {
            let s = with_corpus(&cli, corpus)?;
            let t = load_template(s.template.as_deref())?;
            let c = commands::load_checked(corpus_path(&s)?, &t)?;
            let args = StatsArgs {
                feature,
                by_sex: *by_sex,
                age_cuts: age_cuts.as_deref(),
                cols,
                format: *format,
            };
            commands::emit(output.as_deref(), &commands::stats(&c, &t, &args)?)
        }
        Command::Query {
            query,
            corpus,
            features,
            limit,
            output,
        } => {
            let s = with_corpus(&cli, corpus)?;
            let t = load_template(s.template.as_deref())?;
            let c = commands::load_checked(corpus_path(&s)?, &t)?;
            let v = commands::query(&c, &t, query, features, *limit)?;
            commands::emit(output.as_deref(), &commands::pretty(&v))
        }
        Command::Fixture { name, output } => {
            let s = with_corpus(&cli, &None)?;
            let t = load_template(s.template.as_deref())?;
            let c = commands::fixture(*name, &t);
            commands::emit(output.as_deref(), &commands::corpus_text(&c))
        }
        Command::Serve {
            listen,
            corpus,
            static_dir,
            adapter,
        } => {
            let paths = PathFlags {
                listen: listen.clone(),
                corpus: corpus.clone(),
                static_dir: static_dir.clone(),
                ..Default::default()
            };
            let s = settings(&cli, adapter, paths)?;
            s.check_service()?;
            let engine = Engine::new(&s)?;
            let corpus = match &s.corpus {
                Some(p) => commands::load_checked(p, engine.template())?,
                None => fsr_core::report::Corpus::new(),
            };
            let state = Arc::new(AppState { corpus, engine });
            let app = server::router(state, s.static_dir.as_deref());
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::io("runtime", e))?;
            rt.block_on(server::serve(app, &s.listen))
        }
    }
}
