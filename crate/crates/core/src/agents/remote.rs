//! HTTP client for a live labeling endpoint.
//!
//! `POST {base}/decide` with `{"role": "<node>", "text": "<input text>"}`;
//! the endpoint answers `{"label": "safe" | "unsafe" | "escalate"}`.
//! Transport failures, non-2xx statuses and unparseable labels are retried
//! with exponential backoff, then surfaced as errors.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::Agent;
use crate::dag::NodeId;
use crate::dataset::InputRecord;
use crate::error::{Error, Result};
use crate::label::{parse_label, ActionLabel};
use crate::rng::StreamRng;

pub const AGENT_URL_ENV: &str = "ESCALADE_AGENT_URL";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub timeout: Duration,
    /// Attempts after the first one.
    pub retries: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            timeout: Duration::from_secs(30),
            retries: 2,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

#[derive(Serialize)]
struct DecideRequest<'a> {
    role: &'a str,
    text: &'a str,
}

#[derive(Deserialize)]
struct DecideResponse {
    label: String,
}

/// Reentrant; the underlying connection pool is shared across threads.
#[derive(Debug, Clone)]
pub struct RemoteAgent {
    endpoint: String,
    policy: RetryPolicy,
    http: ureq::Agent,
}

impl RemoteAgent {
    pub fn new(base_url: &str, policy: RetryPolicy) -> Result<Self> {
        let base = base_url.trim().trim_end_matches('/');
        if !(base.starts_with("http://") || base.starts_with("https://")) {
            return Err(Error::Config(format!("agent url must be http(s), got {base_url:?}")));
        }
        let http = ureq::Agent::config_builder()
            .timeout_global(Some(policy.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteAgent {
            endpoint: format!("{base}/decide"),
            policy,
            http,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn attempt(&self, role: &str, text: &str) -> Result<ActionLabel> {
        let mut response = self
            .http
            .post(&self.endpoint)
            .send_json(DecideRequest { role, text })
            .map_err(|e| Error::Remote(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(Error::Remote(format!("status {}", status.as_u16())));
        }
        let body: DecideResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| Error::Remote(format!("bad response body: {e}")))?;
        parse_label(&body.label)
    }
}

impl Agent for RemoteAgent {
    fn sample(&self, node: &NodeId, input: &InputRecord, _rng: &mut StreamRng) -> Result<ActionLabel> {
        let mut backoff = self.policy.initial_backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(node.as_str(), &input.text) {
                Ok(label) => return Ok(label),
                Err(err) if attempt >= self.policy.retries => return Err(err),
                Err(_) => {
                    attempt += 1;
                    thread::sleep(backoff);
                    backoff *= 2;
                }
            }
        }
    }
}
