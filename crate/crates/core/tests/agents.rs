use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use proptest::prelude::*;
use serde_json::{json, Value};

use closurebench::agents::wire::{
    check_public_payload, raw_from_line, run_client, serve_episode, LineTransport, ServeOptions,
};
use closurebench::agents::{
    replay, replay_matches, run_config, run_episode, run_policy, Driver, ObservationPayload, PolicyConfig, PolicyKind,
    Turn, WorldView,
};
use closurebench::contract::{Action, InvalidReason, ReportStatus};
use closurebench::episodes::{generate_episode, EpisodeSpec, Family};
use closurebench::settlement::{ClosureCase, TerminalCause, Trace};
use closurebench::world::{Intent, LookDirection, NavigateMode};

/// Raw outputs by step, ending in a report.
fn script() -> Vec<String> {
    vec![
        Action::navigate(NavigateMode::TurnLeft, 90.0).to_json(),
        "no idea what to do".to_string(),
        format!(
            "{} {}",
            Action::look(LookDirection::Up, 30.0).to_json(),
            Action::look(LookDirection::Down, 30.0).to_json()
        ),
        Action::navigate(NavigateMode::Forward, 40.0).to_json(),
        Action::interact(Intent::Ground, Some((500, 700))).to_json(),
        Action::report(ReportStatus::Success, "done").to_json(),
    ]
}

fn scripted_output(step: u64) -> String {
    script().get(step as usize - 1).cloned().unwrap_or_else(|| script().last().unwrap().clone())
}

struct Scripted;

impl Driver for Scripted {
    fn turn(&mut self, obs: &ObservationPayload, _: &WorldView<'_>) -> Turn {
        Turn::Output(scripted_output(u64::from(obs.step)))
    }
}

/// A client over loopback TCP. Returns the server's trace and every line seen on the wire.
fn serve_over_tcp(
    spec: &EpisodeSpec,
    options: ServeOptions,
    agent: impl FnMut(&Value) -> String + Send + 'static,
) -> (Trace, Vec<String>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let spec_for_server = spec.clone();
    let server = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut transport = LineTransport::tcp(stream).unwrap();
        serve_episode(&spec_for_server, &mut transport, &options)
    });
    let stream = TcpStream::connect(addr).unwrap();
    let transcript = Arc::new(Mutex::new(Vec::new()));
    let reader = Recording { inner: BufReader::new(stream.try_clone().unwrap()), log: transcript.clone() };
    let writer = RecordingWriter { inner: stream, log: transcript.clone(), pending: String::new() };
    let _ = run_client(reader, writer, agent);
    let trace = server.join().unwrap();
    let lines = transcript.lock().unwrap().clone();
    (trace, lines)
}

struct Recording<R> {
    inner: R,
    log: Arc<Mutex<Vec<String>>>,
}

impl<R: BufRead> std::io::Read for Recording<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        self.inner.read(buf)
    }
}

impl<R: BufRead> BufRead for Recording<R> {
    fn fill_buf(&mut self) -> std::io::Result<&[u8]> {
        self.inner.fill_buf()
    }
    fn consume(&mut self, amt: usize) {
        self.inner.consume(amt)
    }
    fn read_line(&mut self, buf: &mut String) -> std::io::Result<usize> {
        let n = self.inner.read_line(buf)?;
        if n > 0 {
            self.log.lock().unwrap().push(buf.trim_end().to_string());
        }
        Ok(n)
    }
}

struct RecordingWriter {
    inner: TcpStream,
    log: Arc<Mutex<Vec<String>>>,
    pending: String,
}

impl Write for RecordingWriter {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.pending.push_str(&String::from_utf8_lossy(buf));
        while let Some(i) = self.pending.find('\n') {
            let line: String = self.pending.drain(..=i).collect();
            self.log.lock().unwrap().push(line.trim_end().to_string());
        }
        self.inner.write_all(buf)?;
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

fn step_of(obs: &Value) -> u64 {
    obs["step"].as_u64().unwrap()
}

#[test]
fn wire_run_equals_in_process_run() {
    for family in [Family::PG, Family::SM] {
        let spec = generate_episode(family, 3).unwrap();
        let options = ServeOptions { agent_id: "scripted".into(), ..ServeOptions::default() };
        let (remote, lines) = serve_over_tcp(&spec, options, |obs| scripted_output(step_of(obs)));
        let local = run_episode(&spec, &mut Scripted, run_config(&spec, "scripted", false));
        assert_eq!(remote.to_jsonl(), local.to_jsonl());
        assert_eq!(remote.digest(), local.digest());

        let steps = remote.steps.len();
        assert_eq!(lines.len(), 2 * steps + 2, "header, one observation and reply per step, settlement");
        let first: Value = serde_json::from_str(&lines[0]).unwrap();
        assert_eq!(first["kind"], "header");
        let last: Value = serde_json::from_str(lines.last().unwrap()).unwrap();
        assert_eq!(last["kind"], "settlement");
        assert_eq!(last["trace_digest"], json!(remote.digest()));

        assert_eq!(remote.steps[1].invalid, Some(InvalidReason::NotJson));
        assert_eq!(remote.steps[2].invalid, Some(InvalidReason::MultipleObjects));
    }
}

#[test]
fn feedback_field_only_under_the_intervention() {
    let spec = generate_episode(Family::DA, 1).unwrap();
    for feedback in [false, true] {
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = seen.clone();
        let options = ServeOptions { feedback, ..ServeOptions::default() };
        let (trace, _) = serve_over_tcp(&spec, options, move |obs| {
            log.lock().unwrap().push(obs.clone());
            scripted_output(step_of(obs))
        });
        assert_eq!(trace.header.config.feedback, feedback);
        for obs in seen.lock().unwrap().iter() {
            assert_eq!(obs.get("feedback").is_some(), feedback, "{obs}");
            let serialized = obs.to_string();
            for o in &spec.scene.objects {
                assert!(!serialized.contains(o.object_id.as_str()));
            }
        }
        // the signals are logged either way
        assert!(trace.steps.iter().any(|s| s.feedback.path_blocked));
    }
}

#[test]
fn slow_replies_time_out_and_late_answers_are_discarded() {
    let spec = generate_episode(Family::PG, 2).unwrap();
    let options = ServeOptions { turn_timeout: Duration::from_millis(300), ..ServeOptions::default() };
    let (trace, _) = serve_over_tcp(&spec, options, |obs| {
        if step_of(obs) == 1 {
            thread::sleep(Duration::from_millis(400));
        }
        scripted_output(step_of(obs))
    });
    assert_eq!(trace.steps[0].invalid, Some(InvalidReason::Timeout));
    assert_eq!(trace.steps[0].raw, "");
    // the late step-1 reply must not be taken as the step-2 answer
    assert_eq!(trace.steps[1].raw, scripted_output(2));
    assert!(replay_matches(&spec, &trace));
}

#[test]
fn disconnect_aborts_the_episode() {
    let spec = generate_episode(Family::VS, 0).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut transport = LineTransport::tcp(stream).unwrap();
        serve_episode(&spec, &mut transport, &ServeOptions::default())
    });
    let mut stream = TcpStream::connect(addr).unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    reader.read_line(&mut line).unwrap(); // header
    line.clear();
    reader.read_line(&mut line).unwrap(); // first observation
    writeln!(stream, "{}", Action::navigate(NavigateMode::TurnRight, 90.0).to_json()).unwrap();
    line.clear();
    reader.read_line(&mut line).unwrap(); // second observation
    drop(reader);
    stream.shutdown(std::net::Shutdown::Both).unwrap();
    let trace = server.join().unwrap();
    assert_eq!(trace.settlement.terminal_cause, TerminalCause::Aborted);
    assert_eq!(trace.settlement.closure, ClosureCase::Aborted);
    assert_eq!(trace.steps.len(), 1);
    let s = &trace.settlement;
    assert!(!s.labels.fr && !s.labels.nr && !s.labels.il);
}

#[test]
fn public_payload_check() {
    let spec = generate_episode(Family::SI, 1).unwrap();
    let trace = run_policy(&spec, &PolicyConfig::oracle(), false);
    assert!(trace.settlement.b);
    let ids: Vec<String> = spec.scene.objects.iter().map(|o| o.object_id.to_string()).collect();
    let ok = json!({
        "kind": "observation", "step": 1, "instruction": spec.instruction,
        "frame": {"role": "current", "rows": [[{"kind": "floor"}]]},
        "remaining_steps": 3, "remaining_invalid": 2, "history": [],
    });
    assert!(check_public_payload(&ok, &ids).is_ok());
    let mut leaky = ok.clone();
    leaky["frame"]["rows"][0][0] = json!({"kind": "object", "category": ids[0], "state": "none"});
    assert!(check_public_payload(&leaky, &ids).is_err());
    let mut extra = ok.clone();
    extra["agent_position"] = json!([3, 4]);
    assert!(check_public_payload(&extra, &ids).is_err());
}

#[test]
fn step_echo_decides_which_replies_count() {
    assert_eq!(raw_from_line(r#"{"kind":"action","step":3,"raw":"x"}"#, 3), Some("x".into()));
    assert_eq!(raw_from_line(r#"{"kind":"action","step":2,"raw":"x"}"#, 3), None);
    assert_eq!(raw_from_line(r#"{"kind":"action","raw":"x"}"#, 3), Some("x".into()));
    let bare = Action::report(ReportStatus::Fail, "stuck").to_json();
    assert_eq!(raw_from_line(&bare, 1), Some(bare.clone()));
}

#[test]
fn every_policy_replays_identically() {
    for family in Family::ALL {
        let spec = generate_episode(family, 8).unwrap();
        for kind in PolicyKind::ALL {
            for feedback in [false, true] {
                let t = run_policy(&spec, &PolicyConfig::new(kind), feedback);
                assert_eq!(replay(&spec, &t).to_jsonl(), t.to_jsonl(), "{family:?} {kind}");
                assert_eq!(run_policy(&spec, &PolicyConfig::new(kind), feedback).digest(), t.digest());
            }
        }
    }
}

#[test]
fn oracle_reports_one_step_after_attainment() {
    for family in Family::ALL {
        let spec = generate_episode(family, 21).unwrap();
        let t = run_policy(&spec, &PolicyConfig::oracle(), false);
        let s = &t.settlement;
        assert!(s.b);
        assert_eq!(s.report_step.unwrap(), s.first_goal_step.unwrap() + 1, "{family:?}");
    }
}

#[test]
fn fixed_reporters() {
    let spec = generate_episode(Family::AI, 4).unwrap();
    let eager = run_policy(&spec, &PolicyConfig::new(PolicyKind::EagerReporter), false);
    assert_eq!(eager.steps.len(), 1);
    assert_eq!(eager.settlement.closure, ClosureCase::FalseReport);
    let honest = run_policy(&spec, &PolicyConfig::new(PolicyKind::HonestFail), false);
    assert_eq!(honest.settlement.closure, ClosureCase::HonestNonSuccess);
    let drift = run_policy(&spec, &PolicyConfig::new(PolicyKind::Drift), false);
    assert!(drift.settlement.w_sem);
    assert_eq!(drift.settlement.closure, ClosureCase::NoReport);
    assert_eq!(drift.steps.len() as u32, spec.budget.step_budget);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn random_agents_replay(family in prop::sample::select(Family::ALL.to_vec()), ep in 0u64..100, seed in 0u64..1000) {
        let spec = generate_episode(family, ep).unwrap();
        let cfg = PolicyConfig { seed, ..PolicyConfig::new(PolicyKind::Random) };
        let t = run_policy(&spec, &cfg, seed % 2 == 0);
        prop_assert!(replay_matches(&spec, &t));
        prop_assert!(t.steps.len() as u32 <= spec.budget.step_budget);
    }
}

#[test]
fn recorded_oracle_script_replays_over_the_wire() {
    // a mock client that plays back the oracle's outputs must settle exactly as the oracle did
    for family in Family::ALL {
        let spec = generate_episode(family, 17).unwrap();
        let local = run_policy(&spec, &PolicyConfig::oracle(), false);
        let outputs: Vec<String> = local.steps.iter().map(|s| s.raw.clone()).collect();
        let options = ServeOptions { agent_id: local.header.config.agent_id.clone(), ..ServeOptions::default() };
        let (remote, lines) = serve_over_tcp(&spec, options, move |obs| outputs[step_of(obs) as usize - 1].clone());
        assert!(remote.settlement.b, "{family:?}");
        assert_eq!(remote.settlement, local.settlement);
        assert_eq!(remote.digest(), local.digest());
        assert_eq!(lines.len(), 2 * remote.steps.len() + 2);
    }
}
