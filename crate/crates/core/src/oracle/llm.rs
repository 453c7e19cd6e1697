use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{parse_reply, render_intervention_prompt, InterventionalOracle, OracleQuery, OracleResponse, QueryContext};
use crate::error::{Error, Result};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "ACBO_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    /// Extra attempts after a transport or HTTP failure.
    pub retries: u32,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            temperature: 0.7,
            max_tokens: 8,
            timeout_secs: 60,
            retries: 2,
        }
    }
}

/// Minimal chat-completion client.
#[derive(Debug, Clone)]
pub struct LlmClient {
    cfg: LlmConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl LlmClient {
    /// Reads the API key from the environment.
    pub fn new(cfg: LlmConfig) -> Self {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::with_key(cfg, key)
    }

    pub fn with_key(cfg: LlmConfig, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        LlmClient { cfg, api_key, agent }
    }

    pub fn config(&self) -> &LlmConfig {
        &self.cfg
    }

    /// Sends one user message and returns the first choice's content.
    pub fn complete(&self, prompt: &str) -> Result<String> {
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let body = json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_tokens,
        });
        let mut last = String::new();
        for attempt in 0..=self.cfg.retries {
            if attempt > 0 {
                log::warn!("retrying chat completion (attempt {}): {last}", attempt + 1);
            }
            let mut req = self.agent.post(&url);
            if let Some(key) = &self.api_key {
                req = req.header("Authorization", &format!("Bearer {key}"));
            }
            let mut resp = match req.send_json(&body) {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status();
            if !status.is_success() {
                last = format!("HTTP {status}");
                continue;
            }
            let v: Value = match resp.body_mut().read_json() {
                Ok(v) => v,
                Err(e) => {
                    last = format!("malformed response body: {e}");
                    continue;
                }
            };
            match v.pointer("/choices/0/message/content").and_then(Value::as_str) {
                Some(s) => return Ok(s.to_string()),
                None => last = "response has no choices[0].message.content".into(),
            }
        }
        Err(Error::OracleUnavailable(format!("{url}: {last}")))
    }
}

/// Oracle backed by a chat-completion endpoint, one call per vote.
#[derive(Debug, Clone)]
pub struct LlmOracle {
    client: LlmClient,
    votes_m: usize,
}

impl LlmOracle {
    pub fn new(client: LlmClient, votes_m: usize) -> Result<Self> {
        if votes_m % 2 == 0 {
            return Err(Error::Config(format!("vote count must be odd, got {votes_m}")));
        }
        Ok(LlmOracle { client, votes_m })
    }

    fn vote(&self, prompt: &str, query_id: &str) -> Result<u8> {
        for attempt in 0..2 {
            let reply = self.client.complete(prompt)?;
            if let Some(v) = parse_reply(&reply) {
                return Ok(v);
            }
            log::warn!("query {query_id}: unparseable reply {reply:?} (attempt {})", attempt + 1);
        }
        log::warn!("query {query_id}: counting unparseable vote as 0");
        Ok(0)
    }
}

impl InterventionalOracle for LlmOracle {
    fn query(&self, q: &OracleQuery<'_>, ctx: &QueryContext) -> Result<OracleResponse> {
        let prompt = render_intervention_prompt(q)?;
        let start = Instant::now();
        let votes = (0..self.votes_m)
            .map(|_| self.vote(&prompt, &ctx.query_id))
            .collect::<Result<Vec<_>>>()?;
        let mut resp = OracleResponse::from_votes(votes);
        resp.latency_ms = Some(start.elapsed().as_millis() as u64);
        Ok(resp)
    }

    fn model(&self) -> &str {
        &self.client.cfg.model
    }
}
