//! Interventional oracles: "does V_j change under do(V_i)?"

mod llm;
mod replay;
mod simulated;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dag::{Intervention, VarPair};
use crate::error::{Error, Result};
use crate::indep::PremiseSet;

pub use llm::{LlmClient, LlmConfig, LlmOracle, API_KEY_ENV};
pub use replay::{read_transcript, write_transcript, RecordingOracle, ReplayOracle, TranscriptRecord};
pub use simulated::SimulatedOracle;

/// One interventional question about the premise's variables.
#[derive(Debug, Clone, Copy)]
pub struct OracleQuery<'a> {
    pub premise: &'a PremiseSet,
    pub intervention: Intervention,
    pub observed: usize,
    /// Extra context variable carried into the prompt record; unused by the
    /// built-in oracles.
    pub context_target: Option<usize>,
}

impl<'a> OracleQuery<'a> {
    pub fn new(premise: &'a PremiseSet, pair: VarPair) -> Self {
        OracleQuery {
            premise,
            intervention: Intervention::new(pair.source),
            observed: pair.sink,
            context_target: None,
        }
    }

    pub fn pair(&self) -> VarPair {
        VarPair {
            source: self.intervention.target,
            sink: self.observed,
        }
    }
}

/// Identity and randomness for one query within a run.
#[derive(Debug, Clone)]
pub struct QueryContext {
    pub query_id: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResponse {
    pub answer: u8,
    pub votes: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
}

impl OracleResponse {
    /// Majority of `votes` (which must have odd length).
    pub fn from_votes(votes: Vec<u8>) -> Self {
        let ones = votes.iter().filter(|&&v| v == 1).count();
        OracleResponse {
            answer: u8::from(2 * ones > votes.len()),
            votes,
            latency_ms: None,
        }
    }
}

pub trait InterventionalOracle: Send + Sync {
    fn query(&self, q: &OracleQuery<'_>, ctx: &QueryContext) -> Result<OracleResponse>;

    /// Name recorded in transcripts.
    fn model(&self) -> &str;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    #[default]
    Simulated,
    Llm,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    /// Per-vote error probability.
    pub eta: f64,
    pub votes_m: usize,
    pub mode: OracleMode,
    pub llm: Option<LlmConfig>,
    pub transcript: Option<std::path::PathBuf>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            eta: 0.0,
            votes_m: 3,
            mode: OracleMode::Simulated,
            llm: None,
            transcript: None,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.eta) {
            return Err(Error::Config(format!("oracle error rate must lie in [0, 0.5), got {}", self.eta)));
        }
        if self.votes_m % 2 == 0 {
            return Err(Error::Config(format!("vote count must be odd, got {}", self.votes_m)));
        }
        Ok(())
    }
}

/// Probability that the majority of `m` independent votes, each wrong with
/// probability `p`, is wrong.
pub fn effective_error(p: f64, m: usize) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let mut total = 0.0;
    let mut binom = 1.0;
    for k in 0..=m {
        if k > 0 {
            binom *= (m - k + 1) as f64 / k as f64;
        }
        if 2 * k > m {
            total += binom * p.powi(k as i32) * (1.0 - p).powi((m - k) as i32);
        }
    }
    total
}

pub fn render_intervention_prompt(q: &OracleQuery<'_>) -> Result<String> {
    let names = &q.premise.names;
    let (i, j) = (q.intervention.target, q.observed);
    if i >= names.len() || j >= names.len() || i == j {
        return Err(Error::Input("query must name two distinct premise variables".into()));
    }
    Ok(format!(
        "{} Suppose we intervene and set {} to a fixed value, severing all of its incoming influences. \
         Question: Would the distribution of {} change as a result? Answer strictly 'yes' or 'no'.",
        q.premise.text()?,
        names[i],
        names[j]
    ))
}

pub fn prompt_sha256(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Reads a yes/no reply from its first word, ignoring case and punctuation.
pub fn parse_reply(reply: &str) -> Option<u8> {
    let word: String = reply
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .chars()
        .take_while(|c| c.is_alphanumeric())
        .collect::<String>()
        .to_lowercase();
    match word.as_str() {
        "yes" => Some(1),
        "no" => Some(0),
        _ => None,
    }
}
