//! Recording and replaying remote replies.
//!
//! The replay file is line-delimited JSON, one object per upper-layer call:
//! `{"step": 10, "prompt_hash": "<sha256 hex>", "reply": "<raw content>" | null}`.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::prompt::parse_reply;
use super::{DecisionSource, Prompt, Reasoner, ReasonerDecision, ReasonerRequest};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub step: usize,
    pub prompt_hash: String,
    pub reply: Option<String>,
}

/// Collects entries in memory; written out once the run finishes.
#[derive(Debug, Clone, Default)]
pub struct ReplayRecorder {
    entries: Vec<ReplayEntry>,
}

impl ReplayRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, step: usize, prompt: &Prompt, reply: Option<String>) {
        self.entries.push(ReplayEntry {
            step,
            prompt_hash: prompt.hash(),
            reply,
        });
    }

    pub fn entries(&self) -> &[ReplayEntry] {
        &self.entries
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("replay entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())
    }
}

/// Answers from a recorded replay file. A missing step, a prompt whose hash
/// differs from the recording, or a recorded failure all yield the fallback
/// decision and count as failures.
#[derive(Debug, Clone, Default)]
pub struct ReplayReasoner {
    entries: HashMap<usize, ReplayEntry>,
    failures: usize,
}

impl ReplayReasoner {
    pub fn from_entries(entries: impl IntoIterator<Item = ReplayEntry>) -> Self {
        Self {
            entries: entries.into_iter().map(|e| (e.step, e)).collect(),
            failures: 0,
        }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut entries = Vec::new();
        for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ReplayEntry = serde_json::from_str(&line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), n + 1),
                )
            })?;
            entries.push(entry);
        }
        Ok(Self::from_entries(entries))
    }

    fn fail(&mut self, why: String) -> ReasonerDecision {
        self.failures += 1;
        ReasonerDecision::fallback(why)
    }
}

impl Reasoner for ReplayReasoner {
    fn name(&self) -> &'static str {
        "replay"
    }

    fn decide(&mut self, request: &ReasonerRequest<'_>) -> ReasonerDecision {
        let Some(entry) = self.entries.get(&request.step) else {
            return self.fail(format!("no recorded reply for step {}", request.step));
        };
        if entry.prompt_hash != request.prompt.hash() {
            return self.fail(format!(
                "prompt at step {} differs from recording",
                request.step
            ));
        }
        let Some(reply) = entry.reply.clone() else {
            return self.fail("recorded call failed".into());
        };
        match parse_reply(&reply) {
            Ok((speed, rationale)) => {
                ReasonerDecision::new(speed, rationale, DecisionSource::RemoteLlm)
            }
            Err(e) => self.fail(format!("unusable recorded reply: {e}")),
        }
    }

    fn failures(&self) -> usize {
        self.failures
    }
}
