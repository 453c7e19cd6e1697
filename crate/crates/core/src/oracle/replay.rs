use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{prompt_sha256, render_intervention_prompt, InterventionalOracle, OracleQuery, OracleResponse, QueryContext};
use crate::error::{Error, Result};

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub query_id: String,
    pub prompt_sha256: String,
    pub votes: Vec<u8>,
    pub answer: u8,
    pub model: String,
    pub timestamp: String,
    /// Wall time of the recorded query, replayed verbatim.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::parse(format!("{}:{}", path.display(), i + 1), e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_transcript(path: &Path, records: &[TranscriptRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Wraps another oracle and records every answered query.
pub struct RecordingOracle<O> {
    inner: O,
    records: Mutex<Vec<TranscriptRecord>>,
}

impl<O: InterventionalOracle> RecordingOracle<O> {
    pub fn new(inner: O) -> Self {
        RecordingOracle {
            inner,
            records: Mutex::new(Vec::new()),
        }
    }

    pub fn records(&self) -> Vec<TranscriptRecord> {
        self.records.lock().expect("transcript lock").clone()
    }

    pub fn into_records(self) -> Vec<TranscriptRecord> {
        self.records.into_inner().expect("transcript lock")
    }
}

impl<O: InterventionalOracle> InterventionalOracle for RecordingOracle<O> {
    fn query(&self, q: &OracleQuery<'_>, ctx: &QueryContext) -> Result<OracleResponse> {
        let prompt = render_intervention_prompt(q)?;
        let resp = self.inner.query(q, ctx)?;
        let rec = TranscriptRecord {
            query_id: ctx.query_id.clone(),
            prompt_sha256: prompt_sha256(&prompt),
            votes: resp.votes.clone(),
            answer: resp.answer,
            model: self.inner.model().to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            latency_ms: resp.latency_ms,
        };
        self.records.lock().expect("transcript lock").push(rec);
        Ok(resp)
    }

    fn model(&self) -> &str {
        self.inner.model()
    }
}

/// Serves recorded responses by query id.
#[derive(Debug, Clone)]
pub struct ReplayOracle {
    by_id: HashMap<String, TranscriptRecord>,
    model: String,
}

impl ReplayOracle {
    pub fn new(records: Vec<TranscriptRecord>) -> Self {
        let model = records.first().map(|r| r.model.clone()).unwrap_or_else(|| "replay".into());
        ReplayOracle {
            by_id: records.into_iter().map(|r| (r.query_id.clone(), r)).collect(),
            model,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(Self::new(read_transcript(path)?))
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }
}

impl InterventionalOracle for ReplayOracle {
    fn query(&self, q: &OracleQuery<'_>, ctx: &QueryContext) -> Result<OracleResponse> {
        let rec = self
            .by_id
            .get(&ctx.query_id)
            .ok_or_else(|| Error::TranscriptIncomplete(format!("no record for query {}", ctx.query_id)))?;
        let hash = prompt_sha256(&render_intervention_prompt(q)?);
        if hash != rec.prompt_sha256 {
            return Err(Error::TranscriptIncomplete(format!(
                "query {} was recorded with a different prompt",
                ctx.query_id
            )));
        }
        Ok(OracleResponse {
            answer: rec.answer,
            votes: rec.votes.clone(),
            latency_ms: rec.latency_ms,
        })
    }

    fn model(&self) -> &str {
        &self.model
    }
}
