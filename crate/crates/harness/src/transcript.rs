//! Agent transcripts: one JSON object per line, `{role, request_digest, response}`.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use loopsmith_core::backends::{AgentBackend, ReplayBackend};
use loopsmith_core::context::AgentContext;
use loopsmith_core::prompt::Prompt;
use loopsmith_core::protocol::Role;
use loopsmith_core::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub role: Role,
    /// SHA-256 of the prompt that produced the reply. Hand-written entries may omit it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_digest: Option<String>,
    pub response: String,
}

/// Hex SHA-256 over the system text, a blank line and the user text.
pub fn request_digest(prompt: &Prompt) -> String {
    let mut h = Sha256::new();
    h.update(prompt.system.as_bytes());
    h.update(b"\n\n");
    h.update(prompt.user.as_bytes());
    hex::encode(h.finalize())
}

pub fn read(path: &Path) -> Result<Vec<TranscriptEntry>> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line)
            .map_err(|e| HarnessError::Config(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(entry);
    }
    Ok(out)
}

pub fn write(path: &Path, entries: &[TranscriptEntry]) -> Result<()> {
    let mut buf = Vec::new();
    for e in entries {
        serde_json::to_writer(&mut buf, e).expect("transcript entries serialize");
        buf.push(b'\n');
    }
    std::fs::File::create(path).and_then(|mut f| f.write_all(&buf)).map_err(|e| HarnessError::io(path, e))
}

/// Replay backend fed from a transcript file, optionally limited to one role.
pub fn replay_from(path: &Path, role: Option<Role>) -> Result<ReplayBackend> {
    let entries = read(path)?;
    Ok(ReplayBackend::new(
        entries.into_iter().filter(|e| role.is_none_or(|r| r == e.role)).map(|e| (e.role, e.response)),
    ))
}

pub type Sink = Arc<Mutex<Vec<TranscriptEntry>>>;

/// Wraps a backend and records every successful exchange into a shared sink.
pub struct Recording<B> {
    inner: B,
    sink: Sink,
}

impl<B> Recording<B> {
    pub fn new(inner: B, sink: Sink) -> Self {
        Recording { inner, sink }
    }
}

impl<B: AgentBackend> AgentBackend for Recording<B> {
    fn respond(&mut self, ctx: &AgentContext, prompt: &Prompt) -> Result<String, Error> {
        let reply = self.inner.respond(ctx, prompt)?;
        self.sink.lock().expect("transcript sink poisoned").push(TranscriptEntry {
            role: ctx.role,
            request_digest: Some(request_digest(prompt)),
            response: reply.clone(),
        });
        Ok(reply)
    }
}
