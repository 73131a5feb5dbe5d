//! Run directories: a manifest plus one trace file per episode.

use std::fs;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{canonical_digest, to_canonical_json};
use crate::settlement::{Trace, TraceError};

use super::metrics::{EventMeans, Rates};

pub const RUN_FORMAT: &str = "closurebench-run/1";
pub const TRACE_DIR: &str = "traces";

/// Written before the first episode starts; identifies everything a run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub run_id: String,
    pub pack_name: String,
    pub pack_hash: String,
    pub agent_id: String,
    /// Full agent configuration as recorded by the launcher.
    pub agent_config: serde_json::Value,
    pub prompt_policy: String,
    /// Digest of the prompt template with the instruction placeholder left in place.
    pub prompt_template_sha256: String,
    pub profile: String,
    pub feedback: bool,
    pub seed: u64,
    pub trace_dir: String,
    pub episode_ids: Vec<String>,
}

impl RunManifest {
    /// Deterministic run id over every other field.
    pub fn assign_id(&mut self) {
        self.run_id.clear();
        let digest = canonical_digest(self).expect("manifest serializes");
        self.run_id = format!("run-{}", &digest[..16]);
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad manifest {path}: {source}")]
    Manifest { path: String, source: serde_json::Error },
    #[error("trace {path}: {source}")]
    Trace { path: String, source: TraceError },
    #[error("run lists episode {0} but its trace is missing")]
    MissingTrace(String),
    #[error("runs cover different packs ({0} vs {1})")]
    PackMismatch(String, String),
    #[error("runs cover different episode sets")]
    EpisodeMismatch,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.display().to_string(), source }
}

/// A loaded run: manifest and traces in episode-id order.
#[derive(Debug, Clone)]
pub struct TraceSet {
    pub manifest: RunManifest,
    pub traces: Vec<Trace>,
}

pub fn trace_file_name(episode_id: &str) -> String {
    format!("{episode_id}.jsonl")
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), RunError> {
    fs::create_dir_all(dir.join(&manifest.trace_dir)).map_err(io_err(dir))?;
    let path = dir.join("manifest.json");
    let mut text = to_canonical_json(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))
}

pub fn write_trace(dir: &Path, manifest: &RunManifest, trace: &Trace) -> Result<(), RunError> {
    let path = dir.join(&manifest.trace_dir).join(trace_file_name(&trace.header.episode_id));
    fs::write(&path, trace.to_jsonl()).map_err(io_err(&path))
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, RunError> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|source| RunError::Manifest { path: path.display().to_string(), source })
}

pub fn load_run(dir: &Path) -> Result<TraceSet, RunError> {
    let manifest = read_manifest(dir)?;
    let mut traces = Vec::with_capacity(manifest.episode_ids.len());
    for id in &manifest.episode_ids {
        let path = dir.join(&manifest.trace_dir).join(trace_file_name(id));
        if !path.exists() {
            return Err(RunError::MissingTrace(id.clone()));
        }
        let file = fs::File::open(&path).map_err(io_err(&path))?;
        let trace = Trace::read_jsonl(BufReader::new(file))
            .map_err(|source| RunError::Trace { path: path.display().to_string(), source })?;
        traces.push(trace);
    }
    Ok(TraceSet { manifest, traces })
}

/// Rejects trace sets drawn from different packs.
pub fn check_same_pack(runs: &[&TraceSet]) -> Result<(), RunError> {
    if let Some(first) = runs.first() {
        for r in &runs[1..] {
            if r.manifest.pack_hash != first.manifest.pack_hash {
                return Err(RunError::PackMismatch(first.manifest.pack_hash.clone(), r.manifest.pack_hash.clone()));
            }
        }
    }
    Ok(())
}

/// Feedback-on minus feedback-off, over the same episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackComparison {
    pub base_run: String,
    pub feedback_run: String,
    pub pack_hash: String,
    pub delta_w: f64,
    pub delta_b: f64,
    pub delta_fr: f64,
    pub delta_nr: f64,
    pub base_events: EventMeans,
    pub feedback_events: EventMeans,
}

pub fn compare_feedback(base: &TraceSet, feedback: &TraceSet) -> Result<FeedbackComparison, RunError> {
    check_same_pack(&[base, feedback])?;
    let ids = |s: &TraceSet| s.traces.iter().map(|t| t.header.episode_id.clone()).collect::<Vec<_>>();
    let (mut a, mut b) = (ids(base), ids(feedback));
    a.sort();
    b.sort();
    if a != b {
        return Err(RunError::EpisodeMismatch);
    }
    let base_refs: Vec<&Trace> = base.traces.iter().collect();
    let fb_refs: Vec<&Trace> = feedback.traces.iter().collect();
    let (rb, rf) = (Rates::of(&base_refs), Rates::of(&fb_refs));
    Ok(FeedbackComparison {
        base_run: base.manifest.run_id.clone(),
        feedback_run: feedback.manifest.run_id.clone(),
        pack_hash: base.manifest.pack_hash.clone(),
        delta_w: rf.w - rb.w,
        delta_b: rf.b - rb.b,
        delta_fr: rf.fr - rb.fr,
        delta_nr: rf.nr - rb.nr,
        base_events: EventMeans::of(&base_refs),
        feedback_events: EventMeans::of(&fb_refs),
    })
}
