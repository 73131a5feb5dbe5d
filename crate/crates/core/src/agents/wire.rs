//! Newline-delimited JSON protocol for driving an external agent.
//!
//! The server sends one `header` line, then one `observation` line per turn
//! and finally a `settlement` line. The client answers each observation with
//! one line: either `{"kind":"action","raw":"..."}` or the raw output itself.
//! An action object may echo `step`; lines answering an earlier step are
//! discarded so a late reply cannot shift the conversation.

use std::io::{self, BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Map, Value};

use crate::canonical::to_canonical_json;
use crate::contract::{render_prompt, CoordinateMode};
use crate::episodes::EpisodeSpec;
use crate::settlement::Trace;

use super::runner::{run_config, run_episode, Driver, ObservationPayload, Turn, WorldView};

pub const PROTOCOL: &str = "closurebench-wire/1";
pub const DEFAULT_TURN_TIMEOUT: Duration = Duration::from_secs(30);

pub enum Received {
    Line(String),
    Timeout,
    Closed,
}

/// A bidirectional line channel whose reads honour a deadline.
pub struct LineTransport {
    writer: Box<dyn Write + Send>,
    lines: Receiver<String>,
}

impl LineTransport {
    /// Lines are read on a background thread so a silent peer cannot block the harness.
    pub fn new<R, W>(reader: R, writer: W) -> Self
    where
        R: BufRead + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in reader.lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Self { writer: Box::new(writer), lines }
    }

    pub fn stdio() -> Self {
        Self::new(BufReader::new(io::stdin()), io::stdout())
    }

    pub fn tcp(stream: TcpStream) -> io::Result<Self> {
        // one small line per turn; do not let Nagle hold it back
        stream.set_nodelay(true)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(Self::new(reader, stream))
    }

    pub fn send(&mut self, line: &str) -> io::Result<()> {
        self.writer.write_all(format!("{line}\n").as_bytes())?;
        self.writer.flush()
    }

    pub fn recv(&mut self, timeout: Duration) -> Received {
        match self.lines.recv_timeout(timeout) {
            Ok(line) => Received::Line(line),
            Err(RecvTimeoutError::Timeout) => Received::Timeout,
            Err(RecvTimeoutError::Disconnected) => Received::Closed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub agent_id: String,
    pub feedback: bool,
    pub turn_timeout: Duration,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self { agent_id: "remote".into(), feedback: false, turn_timeout: DEFAULT_TURN_TIMEOUT }
    }
}

fn message(kind: &str, body: Value) -> String {
    let mut obj = match body {
        Value::Object(m) => m,
        other => Map::from_iter([("body".to_string(), other)]),
    };
    obj.insert("kind".into(), kind.into());
    obj.insert("protocol".into(), PROTOCOL.into());
    to_canonical_json(&Value::Object(obj)).expect("messages serialize")
}

/// Extract the raw agent output from one client line. `None` means the line
/// answers a different step and should be ignored.
pub fn raw_from_line(line: &str, step: u32) -> Option<String> {
    if let Ok(Value::Object(obj)) = serde_json::from_str::<Value>(line) {
        if obj.get("kind").and_then(Value::as_str) == Some("action") {
            if let Some(s) = obj.get("step").and_then(Value::as_u64) {
                if s != u64::from(step) {
                    return None;
                }
            }
            return Some(match obj.get("raw") {
                Some(Value::String(s)) => s.clone(),
                Some(other) => other.to_string(),
                None => String::new(),
            });
        }
    }
    Some(line.to_string())
}

fn keys_within(v: &Value, allowed: &[&str], what: &str) -> Result<(), String> {
    let Value::Object(m) = v else { return Err(format!("{what} is not an object")) };
    match m.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(format!("{what} carries non-public field {k:?}")),
        None => Ok(()),
    }
}

/// Checks that an observation carries only public-contract fields and never
/// mentions a hidden object id.
pub fn check_public_payload(payload: &Value, hidden_ids: &[String]) -> Result<(), String> {
    keys_within(
        payload,
        &[
            "kind",
            "protocol",
            "step",
            "instruction",
            "frame",
            "remaining_steps",
            "remaining_invalid",
            "history",
            "feedback",
        ],
        "observation",
    )?;
    let frame = &payload["frame"];
    keys_within(frame, &["role", "rows"], "frame")?;
    for row in frame["rows"].as_array().ok_or("frame rows missing")? {
        for cell in row.as_array().ok_or("frame row is not a list")? {
            keys_within(cell, &["kind", "category", "state"], "frame cell")?;
        }
    }
    if let Some(f) = payload.get("feedback") {
        keys_within(f, &["too_far", "path_blocked"], "feedback")?;
    }
    for turn in payload["history"].as_array().ok_or("history missing")? {
        keys_within(turn, &["observation", "output"], "history turn")?;
    }
    let public_text = format!("{} {}", frame, payload["instruction"]);
    match hidden_ids.iter().find(|id| public_text.contains(id.as_str())) {
        Some(id) => Err(format!("observation mentions hidden id {id}")),
        None => Ok(()),
    }
}

struct WireDriver<'a> {
    transport: &'a mut LineTransport,
    timeout: Duration,
    hidden_ids: Vec<String>,
}

impl Driver for WireDriver<'_> {
    fn turn(&mut self, obs: &ObservationPayload, _: &WorldView<'_>) -> Turn {
        let body = serde_json::to_value(obs).expect("observation serializes");
        if let Err(e) = check_public_payload(&body, &self.hidden_ids) {
            panic!("refusing to emit observation: {e}");
        }
        if self.transport.send(&message("observation", body)).is_err() {
            return Turn::Disconnected;
        }
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.transport.recv(left) {
                Received::Line(line) => {
                    if let Some(raw) = raw_from_line(&line, obs.step) {
                        return Turn::Output(raw);
                    }
                }
                Received::Timeout => return Turn::Timeout,
                Received::Closed => return Turn::Disconnected,
            }
        }
    }
}

/// Serve one episode to a remote agent and return its trace.
pub fn serve_episode(spec: &EpisodeSpec, transport: &mut LineTransport, options: &ServeOptions) -> Trace {
    let prompt = render_prompt(&spec.instruction, CoordinateMode::Normalized1000);
    let header = json!({
        "episode_id": spec.episode_id,
        "prompt": prompt.text,
        "prompt_sha256": prompt.sha256,
        "budgets": { "step_budget": spec.budget.step_budget, "invalid_limit": spec.budget.invalid_limit },
        "feedback": options.feedback,
    });
    let header_sent = transport.send(&message("header", header)).is_ok();
    let config = run_config(spec, &options.agent_id, options.feedback);
    let trace = if header_sent {
        let hidden_ids = spec.scene.objects.iter().map(|o| o.object_id.to_string()).collect();
        let mut driver = WireDriver { transport: &mut *transport, timeout: options.turn_timeout, hidden_ids };
        run_episode(spec, &mut driver, config)
    } else {
        run_episode(spec, &mut Gone, config)
    };
    let closing = json!({
        "episode_id": spec.episode_id,
        "settlement": trace.settlement,
        "trace_digest": trace.digest(),
    });
    // the peer may already be gone; the trace records that
    let _ = transport.send(&message("settlement", closing));
    trace
}

struct Gone;

impl Driver for Gone {
    fn turn(&mut self, _: &ObservationPayload, _: &WorldView<'_>) -> Turn {
        Turn::Disconnected
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad server line: {0}")]
    Protocol(String),
    #[error("server closed the connection before settlement")]
    Closed,
}

/// Minimal client loop: answer every observation with `agent(observation)`.
/// Returns the header and the settlement message.
pub fn run_client<R: BufRead, W: Write>(
    reader: R,
    mut writer: W,
    mut agent: impl FnMut(&Value) -> String,
) -> Result<(Value, Value), ClientError> {
    let mut header = None;
    for line in reader.lines() {
        let line = line?;
        let msg: Value = serde_json::from_str(&line).map_err(|e| ClientError::Protocol(e.to_string()))?;
        match msg.get("kind").and_then(Value::as_str) {
            Some("header") => header = Some(msg),
            Some("observation") => {
                let reply = json!({
                    "kind": "action",
                    "protocol": PROTOCOL,
                    "step": msg.get("step").cloned().unwrap_or(Value::Null),
                    "raw": agent(&msg),
                });
                writer.write_all(format!("{reply}\n").as_bytes())?;
                writer.flush()?;
            }
            Some("settlement") => {
                let header = header.ok_or_else(|| ClientError::Protocol("settlement before header".into()))?;
                return Ok((header, msg));
            }
            _ => return Err(ClientError::Protocol(line)),
        }
    }
    Err(ClientError::Closed)
}
