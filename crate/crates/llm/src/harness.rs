//! Evaluation runs: one request per record, transcripts archived before
//! parsing, and scoring that is shared with offline replay so a replay
//! reproduces the live report exactly.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ced_core::dataset::DatasetRecord;
use ced_core::metrics::{MetricsReport, PredictionRecord, Reference};
use ced_core::ComplexEvent;
use serde::{Deserialize, Serialize};

use crate::client::ChatClient;
use crate::parse::parse_response;
use crate::prompt::{build_prompt, Example, PromptBundle};
use crate::LlmError;

/// One archived exchange, keyed by dataset record id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub id: String,
    pub model: String,
    pub k: usize,
    pub prompt_sha256: String,
    /// Raw response text; `None` when the request failed.
    pub response: Option<String>,
    pub error: Option<String>,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOptions {
    pub model: String,
    pub classes: Vec<ComplexEvent>,
    pub few_shot: Vec<Example>,
    pub concurrency: usize,
}

impl EvalOptions {
    pub fn k(&self) -> usize {
        self.few_shot.len()
    }
}

/// Metrics plus bookkeeping about excluded and malformed responses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub model: String,
    pub k: usize,
    pub classes: Vec<ComplexEvent>,
    pub requested: usize,
    pub scored: usize,
    pub transport_failures: usize,
    pub missing_transcripts: usize,
    pub unparseable: usize,
    pub length_mismatched: usize,
    pub metrics: MetricsReport,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        format!(
            "model={}\nk={}\nrequested={}\nscored={}\ntransport_failures={}\nmissing_transcripts={}\nunparseable={}\nlength_mismatched={}\n{}",
            self.model,
            self.k,
            self.requested,
            self.scored,
            self.transport_failures,
            self.missing_transcripts,
            self.unparseable,
            self.length_mismatched,
            self.metrics.to_text()
        )
    }
}

/// Scores archived transcripts against `records`, in record order. When
/// an id has several transcripts the last one counts.
pub fn score(
    transcripts: &[Transcript],
    records: &[DatasetRecord],
    opts: &EvalOptions,
) -> Result<EvalReport, LlmError> {
    let by_id: HashMap<&str, &Transcript> =
        transcripts.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut scored = Vec::new();
    let (mut failures, mut missing, mut unparseable) = (0, 0, 0);
    for r in records {
        let Some(t) = by_id.get(r.id.as_str()) else {
            missing += 1;
            continue;
        };
        let Some(text) = &t.response else {
            failures += 1;
            continue;
        };
        let predicted = match parse_response(text, r.len()) {
            Ok(p) => p.labels,
            Err(_) => {
                unparseable += 1;
                Vec::new()
            }
        };
        scored.push(PredictionRecord {
            id: r.id.clone(),
            predicted,
            reference: Reference::Multi(r.ce_labels.clone()),
        });
    }
    if scored.is_empty() {
        return Err(LlmError::AllFailed {
            failed: failures + missing,
        });
    }
    let metrics = MetricsReport::compute(&scored, &opts.classes)?;
    Ok(EvalReport {
        model: opts.model.clone(),
        k: opts.k(),
        classes: opts.classes.clone(),
        requested: records.len(),
        scored: scored.len(),
        transport_failures: failures,
        missing_transcripts: missing,
        unparseable,
        length_mismatched: scored.iter().filter(|p| !p.length_matches()).count(),
        metrics,
    })
}

/// Sends one request per record with at most `opts.concurrency` in flight,
/// appending each transcript to `archive` as soon as it arrives.
pub fn run_eval(
    client: &dyn ChatClient,
    records: &[DatasetRecord],
    opts: &EvalOptions,
    archive: &Path,
) -> Result<EvalReport, LlmError> {
    if opts.concurrency == 0 {
        return Err(LlmError::Config("concurrency must be at least 1".into()));
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(archive)
        .map_err(|source| LlmError::Io {
            path: archive.to_path_buf(),
            source,
        })?;
    let writer = Mutex::new(file);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Transcript>>> = Mutex::new(vec![None; records.len()]);
    let io_error: Mutex<Option<std::io::Error>> = Mutex::new(None);

    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(r) = records.get(i) else { break };
        let bundle = match PromptBundle::new(
            opts.classes.clone(),
            opts.k(),
            opts.few_shot.clone(),
            r.ae_seq.clone(),
        ) {
            Ok(b) => b,
            Err(_) => continue,
        };
        let prompt = build_prompt(&bundle);
        let (response, error, attempts) = match client.complete(&prompt) {
            Ok(c) => (Some(c.text), None, c.attempts),
            Err(f) => (None, Some(f.error.to_string()), f.attempts),
        };
        let t = Transcript {
            id: r.id.clone(),
            model: opts.model.clone(),
            k: opts.k(),
            prompt_sha256: prompt.digest(),
            response,
            error,
            attempts,
        };
        let line = serde_json::to_string(&t).expect("transcript serializes");
        {
            let mut w = writer.lock().expect("archive lock");
            if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
                io_error.lock().expect("error lock").get_or_insert(e);
            }
        }
        results.lock().expect("results lock")[i] = Some(t);
    };
    std::thread::scope(|s| {
        for _ in 0..opts.concurrency.min(records.len().max(1)) {
            s.spawn(work);
        }
    });
    if let Some(source) = io_error.into_inner().expect("error lock") {
        return Err(LlmError::Io {
            path: archive.to_path_buf(),
            source,
        });
    }
    let transcripts: Vec<Transcript> = results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .flatten()
        .collect();
    if transcripts.iter().all(|t| t.response.is_none()) {
        return Err(LlmError::AllFailed {
            failed: records.len(),
        });
    }
    score(&transcripts, records, opts)
}

pub fn read_transcripts(path: &Path) -> Result<Vec<Transcript>, LlmError> {
    let file = File::open(path).map_err(|source| LlmError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| LlmError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| LlmError::Archive {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Scores a transcript archive without contacting any endpoint.
pub fn replay(
    archive: &Path,
    records: &[DatasetRecord],
    opts: &EvalOptions,
) -> Result<EvalReport, LlmError> {
    score(&read_transcripts(archive)?, records, opts)
}
