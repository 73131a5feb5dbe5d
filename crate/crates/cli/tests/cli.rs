use std::fs;
use std::io::{BufRead, BufReader};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use closurebench::agents::wire::run_client;
use closurebench::contract::{Action, ReportStatus};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_closurebench"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_run_audit_report() {
    let dir = tempfile::tempdir().unwrap();
    let pack = dir.path().join("pack");
    let out = ok(&["generate", "--count", "3", "--seed", "5", "--out", p(&pack)]);
    assert!(out.contains("24 episodes"));
    assert!(ok(&["validate", "--pack", p(&pack)]).contains("24 episodes valid"));

    let oracle = dir.path().join("oracle");
    let line = ok(&["run", "--pack", p(&pack), "--agent", "oracle", "--workers", "3", "--out", p(&oracle)]);
    assert!(line.contains("W=100.0 B=100.0 delta=0.0"), "{line}");
    assert!(ok(&["audit", "--run", p(&oracle), "--pack", p(&pack)]).contains("audit ok: 24 traces"));

    // worker count does not change any trace
    let single = dir.path().join("single");
    ok(&["run", "--pack", p(&pack), "--agent", "oracle", "--workers", "1", "--out", p(&single)]);
    assert_eq!(fs::read(oracle.join("summary.json")).unwrap(), fs::read(single.join("summary.json")).unwrap());

    let rescored = ok(&["rescore", "--run", p(&oracle), "--policy", "random_expected"]);
    assert!(rescored.contains("B=50.0"), "{rescored}");

    let off = dir.path().join("off");
    let on = dir.path().join("on");
    ok(&["run", "--pack", p(&pack), "--agent", "state_coupled", "--feedback", "off", "--out", p(&off)]);
    ok(&["run", "--pack", p(&pack), "--agent", "state_coupled", "--feedback", "on", "--out", p(&on)]);
    let m_off = fs::read_to_string(off.join("manifest.json")).unwrap();
    let m_on = fs::read_to_string(on.join("manifest.json")).unwrap();
    assert_ne!(m_off, m_on);
    assert!(m_on.contains("\"feedback\":true") && m_off.contains("\"feedback\":false"));

    let report_dir = dir.path().join("report");
    let text = ok(&["report", "--run", p(&off), "--paired", p(&on), "--out", p(&report_dir)]);
    assert!(text.contains("paired"));
    for f in [
        "metrics.json",
        "outcomes.csv",
        "counterfactual.csv",
        "closure_lag.csv",
        "conditional.csv",
        "post_attainment.csv",
        "feedback.csv",
        "feedback.json",
    ] {
        assert!(report_dir.join(f).exists(), "{f}");
    }
    let only_pg = dir.path().join("pg");
    ok(&["report", "--run", p(&oracle), "--families", "PG", "--format", "json", "--out", p(&only_pg)]);
    let metrics = fs::read_to_string(only_pg.join("metrics.json")).unwrap();
    assert!(metrics.contains("\"episodes\":3"));
    assert!(!only_pg.join("outcomes.csv").exists());

    // a modified trace fails the audit
    let trace = oracle.join("traces").join("pg-0000.jsonl");
    let text = fs::read_to_string(&trace).unwrap();
    fs::write(&trace, text.replacen("\"w_sem\":true", "\"w_sem\":false", 1)).unwrap();
    let audit = run(&["audit", "--run", p(&oracle)]);
    assert!(!audit.status.success());
}

#[test]
fn tampered_pack_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let pack = dir.path().join("pack");
    ok(&["generate", "--families", "pg,sv", "--count", "2", "--out", p(&pack)]);
    let ep = fs::read_dir(pack.join("episodes")).unwrap().next().unwrap().unwrap().path();
    let text = fs::read_to_string(&ep).unwrap();
    fs::write(&ep, text.replacen("\"instruction\":\"", "\"instruction\":\"Please ", 1)).unwrap();
    let out = run(&["run", "--pack", p(&pack), "--agent", "oracle", "--out", p(&dir.path().join("r"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("hash mismatch"));
    assert!(!run(&["validate", "--pack", p(&pack)]).status.success());
}

#[test]
fn bad_arguments_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert!(!run(&["generate", "--count", "0", "--out", p(&out)]).status.success());
    assert!(!run(&["generate", "--count", "1", "--families", "XX", "--out", p(&out)]).status.success());
    assert!(!run(&["run", "--pack", p(&out), "--agent", "genius", "--out", p(&out)]).status.success());
    assert!(!run(&["run", "--pack", p(&out), "--agent", "random", "--report-probability", "2", "--out", p(&out)])
        .status
        .success());
}

#[test]
fn serve_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let pack = dir.path().join("pack");
    ok(&["generate", "--families", "PG", "--count", "2", "--out", p(&pack)]);
    let out = dir.path().join("served");
    let mut child = bin()
        .args(["serve", "--pack", p(&pack), "--listen", "127.0.0.1:0", "--out", p(&out), "--agent-id", "tcp-test"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(child.stderr.take().unwrap());
    let mut first = String::new();
    stderr.read_line(&mut first).unwrap();
    let addr = first.trim().strip_prefix("listening on ").expect("address line").to_string();
    for _ in 0..2 {
        let stream = TcpStream::connect(&addr).unwrap();
        let reader = BufReader::new(stream.try_clone().unwrap());
        let (header, settlement) =
            run_client(reader, stream, |_| Action::report(ReportStatus::Fail, "cannot tell").to_json()).unwrap();
        assert_eq!(header["budgets"]["step_budget"], 5);
        assert_eq!(settlement["settlement"]["closure"], "honest_non_success");
    }
    let status = child.wait().unwrap();
    assert!(status.success());
    let rest: Vec<String> = stderr.lines().map(Result::unwrap).collect();
    assert!(rest.iter().any(|l| l.contains("2 episodes")), "{rest:?}");
    assert!(ok(&["audit", "--run", p(&out), "--pack", p(&pack)]).contains("audit ok: 2 traces"));
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("tcp-test"));
}

#[test]
fn serve_over_stdio() {
    let dir = tempfile::tempdir().unwrap();
    let pack = dir.path().join("pack");
    ok(&["generate", "--families", "SV", "--count", "1", "--out", p(&pack)]);
    let out = dir.path().join("served");
    let mut child = bin()
        .args(["serve", "--pack", p(&pack), "--stdio", "--out", p(&out)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let reader = BufReader::new(child.stdout.take().unwrap());
    let writer = child.stdin.take().unwrap();
    let (_, settlement) = run_client(reader, writer, |_| "what is this?".to_string()).unwrap();
    assert_eq!(settlement["settlement"]["terminal_cause"], "invalid_limit");
    assert!(child.wait().unwrap().success());
}
