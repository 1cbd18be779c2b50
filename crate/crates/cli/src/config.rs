//! Settings shared by the commands, merged from a key-value file, the
//! environment and command-line flags (in increasing precedence).
//!
//! File format: one `key = value` per line; blank lines and lines starting
//! with `#` are ignored. Keys:
//!
//! | key | meaning |
//! |---|---|
//! | `listen` | service address, `host:port` |
//! | `template` | template spec file (default: shipped lung nodule template) |
//! | `corpus` | JSON-lines corpus served or queried |
//! | `static_dir` | directory served at `/` |
//! | `adapter` | `scripted`, `uniform`, `lexical` or `remote` |
//! | `seed` | uniform adapter seed |
//! | `vocab` | vocabulary file (one token per line) |
//! | `script` | scripted adapter rules, `feature = value` per line |
//! | `remote_url` | base URL of the next-token server |
//! | `remote_timeout_ms` | per-request timeout |
//! | `remote_retries` | retries after a transport failure |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

pub const LISTEN_ENV: &str = "FSR_LISTEN";
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_SEED: u64 = 0;

const KEYS: [&str; 11] = [
    "listen",
    "template",
    "corpus",
    "static_dir",
    "adapter",
    "seed",
    "vocab",
    "script",
    "remote_url",
    "remote_timeout_ms",
    "remote_retries",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum AdapterKind {
    Scripted,
    Uniform,
    #[default]
    Lexical,
    Remote,
}

impl FromStr for AdapterKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <AdapterKind as clap::ValueEnum>::from_str(s, true)
    }
}

/// Raw `key = value` entries of a config file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    pub entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                return Err(format!("line {}: unknown key {k:?}", i + 1));
            }
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Usage(format!("config key {key}: {e}")))
            })
            .transpose()
    }
}

/// Locations named by the command line of the running command.
#[derive(Debug, Clone, Default)]
pub struct PathFlags {
    pub listen: Option<String>,
    pub template: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
}

/// Fully merged settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    pub listen: String,
    pub template: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub adapter: AdapterKind,
    pub seed: u64,
    pub vocab: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub remote_url: Option<String>,
    pub remote_timeout_ms: Option<u64>,
    pub remote_retries: Option<u32>,
}

/// Adapter flags of `convert` and `serve`; `None` defers to the file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Probability source for conversion [default: lexical]
    #[arg(long, value_enum)]
    pub adapter: Option<AdapterKind>,
    /// Seed for the uniform adapter [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Vocabulary file, one token per line [default: derived from the template]
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Scripted adapter rules, one `feature = value` per line
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Base URL of the next-token server for the remote adapter
    #[arg(long)]
    pub remote_url: Option<String>,
    /// Remote request timeout in milliseconds [default: 30000]
    #[arg(long)]
    pub remote_timeout_ms: Option<u64>,
    /// Retries after a remote transport failure [default: 2]
    #[arg(long)]
    pub remote_retries: Option<u32>,
}

impl Settings {
    /// Flags over environment over file over defaults.
    pub fn merge(
        file: &ConfigFile,
        flags: &Overrides,
        paths: &PathFlags,
    ) -> Result<Settings, CliError> {
        let listen_flag = paths.listen.as_deref();
        let env_listen = std::env::var(LISTEN_ENV).ok().filter(|s| !s.is_empty());
        let path = |flag: Option<&Path>, key: &str| {
            flag.map(Path::to_path_buf)
                .or_else(|| file.get(key).map(PathBuf::from))
        };
        Ok(Settings {
            listen: listen_flag
                .map(str::to_string)
                .or(env_listen)
                .or_else(|| file.get("listen").map(str::to_string))
                .unwrap_or_else(|| DEFAULT_LISTEN.to_string()),
            template: path(paths.template.as_deref(), "template"),
            corpus: path(paths.corpus.as_deref(), "corpus"),
            static_dir: path(paths.static_dir.as_deref(), "static_dir"),
            adapter: match flags.adapter {
                Some(a) => a,
                None => file.parsed::<AdapterKind>("adapter")?.unwrap_or_default(),
            },
            seed: match flags.seed {
                Some(s) => s,
                None => file.parsed("seed")?.unwrap_or(DEFAULT_SEED),
            },
            vocab: path(flags.vocab.as_deref(), "vocab"),
            script: path(flags.script.as_deref(), "script"),
            remote_url: flags
                .remote_url
                .clone()
                .or_else(|| file.get("remote_url").map(str::to_string)),
            remote_timeout_ms: match flags.remote_timeout_ms {
                Some(v) => Some(v),
                None => file.parsed("remote_timeout_ms")?,
            },
            remote_retries: match flags.remote_retries {
                Some(v) => Some(v),
                None => file.parsed("remote_retries")?,
            },
        })
    }

    /// Port in 1..=65535 and every configured path present.
    pub fn check_service(&self) -> Result<(), CliError> {
        let port = self
            .listen
            .rsplit_once(':')
            .and_then(|(_, p)| p.parse::<u32>().ok())
            .ok_or_else(|| {
                CliError::Usage(format!("listen address {:?} needs a port", self.listen))
            })?;
        if !(1..=65535).contains(&port) {
            return Err(CliError::Usage(format!("port {port} is outside 1-65535")));
        }
        for p in [
            &self.template,
            &self.corpus,
            &self.static_dir,
            &self.vocab,
            &self.script,
        ]
        .into_iter()
        .flatten()
        {
            if !p.exists() {
                return Err(CliError::io(p.display(), "no such file or directory"));
            }
        }
        Ok(())
    }
}
