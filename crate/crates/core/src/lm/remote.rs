//! HTTP client for a next-token server.
//!
//! Wire format (v1): `POST {base}/v1/next-token` with
//! `{"context": [ids], "vocab_size": N}`, answered by `{"probs": [N floats]}`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{normalize, ProbabilitySource, SourceError, StepContext};
use crate::token::TokenId;

/// Environment variable holding the bearer token sent to the server.
pub const AUTH_ENV: &str = "FSR_REMOTE_TOKEN";
pub const ENDPOINT_PATH: &str = "/v1/next-token";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    pub base_url: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub auth_token: Option<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RemoteConfigError {
    #[error("base URL {0:?} must start with http:// or https://")]
    BadUrl(String),
    #[error("timeout must be greater than 0 ms")]
    ZeroTimeout,
}

impl RemoteConfig {
    /// Defaults: 30 s timeout, 2 retries, token from [`AUTH_ENV`] if set.
    pub fn new(base_url: impl Into<String>) -> Self {
        RemoteConfig {
            base_url: base_url.into(),
            timeout_ms: 30_000,
            max_retries: 2,
            auth_token: std::env::var(AUTH_ENV).ok().filter(|t| !t.is_empty()),
        }
    }

    pub fn validate(&self) -> Result<(), RemoteConfigError> {
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(RemoteConfigError::BadUrl(self.base_url.clone()));
        }
        if self.timeout_ms == 0 {
            return Err(RemoteConfigError::ZeroTimeout);
        }
        Ok(())
    }

    pub fn endpoint(&self) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), ENDPOINT_PATH)
    }
}

#[derive(Serialize)]
struct Request<'a> {
    context: &'a [TokenId],
    vocab_size: usize,
}

#[derive(Deserialize)]
struct Response {
    probs: Vec<f64>,
}

enum Attempt {
    Retry(String),
    Fatal(SourceError),
}

pub struct RemoteSource {
    cfg: RemoteConfig,
    endpoint: String,
    agent: ureq::Agent,
    vocab_size: usize,
    requests: AtomicU64,
}

impl RemoteSource {
    pub fn new(cfg: RemoteConfig, vocab_size: usize) -> Result<Self, RemoteConfigError> {
        cfg.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Ok(RemoteSource {
            endpoint: cfg.endpoint(),
            cfg,
            agent,
            vocab_size,
            requests: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    /// HTTP requests issued so far, retries included.
    pub fn requests_sent(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    fn attempt(&self, context: &[TokenId]) -> Result<Vec<f64>, Attempt> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        let mut req = self.agent.post(&self.endpoint);
        if let Some(tok) = &self.cfg.auth_token {
            req = req.header("Authorization", &format!("Bearer {tok}"));
        }
        let mut resp = req
            .send_json(Request {
                context,
                vocab_size: self.vocab_size,
            })
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        if status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if status != 200 {
            return Err(Attempt::Fatal(SourceError::Transport {
                endpoint: self.endpoint.clone(),
                attempts: 1,
                message: format!("HTTP {status}"),
            }));
        }
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let parsed: Response = serde_json::from_str(&body).map_err(|e| {
            Attempt::Fatal(SourceError::Malformed {
                endpoint: self.endpoint.clone(),
                message: e.to_string(),
            })
        })?;
        Ok(parsed.probs)
    }
}

impl ProbabilitySource for RemoteSource {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_probs(&self, ctx: &StepContext<'_>) -> Result<Vec<f64>, SourceError> {
        let attempts = self.cfg.max_retries + 1;
        let mut last = String::new();
        for n in 1..=attempts {
            match self.attempt(ctx.tokens) {
                Ok(mut probs) => {
                    if probs.len() != self.vocab_size {
                        return Err(SourceError::VocabMismatch {
                            expected: self.vocab_size,
                            got: probs.len(),
                        });
                    }
                    if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
                        return Err(SourceError::Malformed {
                            endpoint: self.endpoint.clone(),
                            message: format!("invalid probability {bad}"),
                        });
                    }
                    normalize(&mut probs);
                    return Ok(probs);
                }
                Err(Attempt::Fatal(SourceError::Transport { message, .. })) => {
                    return Err(SourceError::Transport {
                        endpoint: self.endpoint.clone(),
                        attempts: n,
                        message,
                    })
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(SourceError::Transport {
            endpoint: self.endpoint.clone(),
            attempts,
            message: last,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::{run_compiled, CompiledTemplate};
    use crate::lm::{MockBehavior, MockServer};
    use crate::report::validate_report;
    use crate::template::Template;
    use crate::token::Vocab;

    fn cfg(url: &str, timeout_ms: u64, retries: u32) -> RemoteConfig {
        RemoteConfig {
            base_url: url.to_string(),
            timeout_ms,
            max_retries: retries,
            auth_token: None,
        }
    }

    #[test]
    fn config_validation() {
        assert_eq!(
            cfg("ftp://x", 10, 0).validate(),
            Err(RemoteConfigError::BadUrl("ftp://x".into()))
        );
        assert_eq!(
            cfg("http://x", 0, 0).validate(),
            Err(RemoteConfigError::ZeroTimeout)
        );
        assert_eq!(cfg("http://x/", 1, 0).endpoint(), "http://x/v1/next-token");
    }

    #[test]
    fn uniform_mock_decode_validates() {
        let server = MockServer::start(MockBehavior::Uniform).unwrap();
        let t = Template::lung_nodule();
        let c = CompiledTemplate::new(t.clone(), &Vocab::for_template(&t)).unwrap();
        let src = RemoteSource::new(cfg(&server.url(), 5_000, 0), c.vocab().len()).unwrap();
        let r = run_compiled(&c, "", "text", &src).unwrap();
        assert!(validate_report(&r, &t).is_empty());
        assert_eq!(server.requests(), src.requests_sent());
    }

    #[test]
    fn wrong_length_is_vocab_mismatch() {
        let server = MockServer::start(MockBehavior::WrongLength).unwrap();
        let src = RemoteSource::new(cfg(&server.url(), 5_000, 2), 10).unwrap();
        let ctx = StepContext {
            tokens: &[1, 2],
            slot: None,
        };
        let err = src.next_probs(&ctx).unwrap_err();
        assert!(
            matches!(
                err,
                SourceError::VocabMismatch {
                    expected: 10,
                    got: 11
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn timeout_retries_then_fails() {
        let server = MockServer::start(MockBehavior::Stall(Duration::from_secs(2))).unwrap();
        let src = RemoteSource::new(cfg(&server.url(), 100, 2), 10).unwrap();
        let ctx = StepContext {
            tokens: &[],
            slot: None,
        };
        let err = src.next_probs(&ctx).unwrap_err();
        assert!(
            matches!(err, SourceError::Transport { attempts: 3, .. }),
            "{err}"
        );
        assert_eq!(src.requests_sent(), 3);
        assert_eq!(server.requests(), 3);
    }

    #[test]
    fn unreachable_names_endpoint() {
        let port = std::net::TcpListener::bind("127.0.0.1:0")
            .unwrap()
            .local_addr()
            .unwrap()
            .port();
        let src = RemoteSource::new(cfg(&format!("http://127.0.0.1:{port}"), 500, 1), 4).unwrap();
        let err = src
            .next_probs(&StepContext {
                tokens: &[],
                slot: None,
            })
            .unwrap_err();
        assert!(err
            .to_string()
            .contains(&format!("127.0.0.1:{port}/v1/next-token")));
        assert!(matches!(err, SourceError::Transport { attempts: 2, .. }));
    }

    #[test]
    fn malformed_and_status_errors() {
        let server = MockServer::start(MockBehavior::Garbage).unwrap();
        let src = RemoteSource::new(cfg(&server.url(), 5_000, 2), 4).unwrap();
        let ctx = StepContext {
            tokens: &[],
            slot: None,
        };
        assert!(matches!(
            src.next_probs(&ctx),
            Err(SourceError::Malformed { .. })
        ));
        assert_eq!(server.requests(), 1);

        let server = MockServer::start(MockBehavior::Status(503)).unwrap();
        let src = RemoteSource::new(cfg(&server.url(), 5_000, 1), 4).unwrap();
        assert!(matches!(
            src.next_probs(&ctx),
            Err(SourceError::Transport { attempts: 2, .. })
        ));
        assert_eq!(server.requests(), 2);
    }

    #[test]
    fn bearer_token_is_sent() {
        let server = MockServer::start(MockBehavior::Uniform).unwrap();
        let mut c = cfg(&server.url(), 5_000, 0);
        c.auth_token = Some("s3cret".into());
        let src = RemoteSource::new(c, 3).unwrap();
        let p = src
            .next_probs(&StepContext {
                tokens: &[0],
                slot: None,
            })
            .unwrap();
        crate::lm::assert_distribution(&p, 3);
        assert_eq!(
            server.last_authorization().as_deref(),
            Some("Bearer s3cret")
        );
    }
}
