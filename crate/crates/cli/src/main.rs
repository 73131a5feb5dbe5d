use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use closurebench::agents::wire::{serve_episode, LineTransport, ServeOptions};
use closurebench::agents::{replay, run_policy, PolicyConfig, PolicyKind};
use closurebench::analytics::{
    aggregate, compare_feedback, load_run, rescore_counterfactual, tables, write_manifest, write_trace, Rates,
    ReportPolicy, RunManifest, TraceSet, RUN_FORMAT, TRACE_DIR,
};
use closurebench::canonical::{sha256_hex, to_canonical_json};
use closurebench::contract::{render_prompt, CoordinateMode, PROMPT_POLICY};
use closurebench::episodes::{build_pack, validate_episode, Family, Pack};
use closurebench::settlement::{settle, Trace};

#[derive(Parser)]
#[command(
    name = "closurebench",
    version,
    about = "Deterministic gridworld harness that scores world completion and terminal reports separately"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and validate a frozen episode pack.
    Generate(GenerateArgs),
    /// Re-validate every episode of a pack.
    Validate {
        #[arg(long)]
        pack: PathBuf,
    },
    /// Run a scripted agent over a pack.
    Run(RunArgs),
    /// Serve pack episodes to an external agent over the wire protocol.
    Serve(ServeArgs),
    /// Rescore a run under a substituted report policy.
    Rescore {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_parser = parse_report_policy)]
        policy: ReportPolicy,
    },
    /// Write metric tables for a run, optionally paired with a feedback run.
    Report(ReportArgs),
    /// Verify trace digests and re-settle every trace.
    Audit {
        #[arg(long)]
        run: PathBuf,
        /// Also re-execute every trace against this pack.
        #[arg(long)]
        pack: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenerateArgs {
    /// Comma-separated family codes; all eight by default.
    #[arg(long, value_delimiter = ',', value_parser = parse_family)]
    families: Option<Vec<Family>>,
    /// Episodes per family.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        matches!(self, Switch::On)
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    pack: PathBuf,
    #[arg(long, value_parser = parse_policy)]
    agent: PolicyKind,
    #[arg(long, value_enum, default_value = "off")]
    feedback: Switch,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
    /// Steps between first goal attainment and the report (oracle, state_coupled).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    report_delay: u32,
    /// Per-command overshoot probability (state_coupled).
    #[arg(long, default_value_t = 0.25, value_parser = parse_probability)]
    execution_noise: f64,
    /// Ignore execution feedback even when it is shown (state_coupled).
    #[arg(long)]
    ignore_feedback: bool,
    /// Per-step report probability (random).
    #[arg(long, default_value_t = 0.05, value_parser = parse_probability)]
    report_probability: f64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    pack: PathBuf,
    /// Address to accept one connection per episode on, e.g. 127.0.0.1:7878.
    #[arg(long, conflicts_with = "stdio")]
    listen: Option<String>,
    /// Serve episodes in sequence on standard input and output.
    #[arg(long)]
    stdio: bool,
    /// Serve only these episode ids.
    #[arg(long, value_delimiter = ',')]
    episodes: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "off")]
    feedback: Switch,
    #[arg(long, default_value = "remote")]
    agent_id: String,
    /// Per-turn deadline in seconds.
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    run: PathBuf,
    /// A run over the same pack with feedback enabled.
    #[arg(long)]
    paired: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', value_parser = parse_family)]
    families: Option<Vec<Family>>,
    #[arg(long, value_enum, default_value = "both")]
    format: Format,
    /// Output directory; defaults to <run>/report.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse()
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse()
}

fn parse_report_policy(s: &str) -> Result<ReportPolicy, String> {
    s.parse()
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(format!("{p} is not a probability"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Validate { pack } => cmd_validate(&pack),
        Command::Run(a) => cmd_run(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Rescore { run, policy } => cmd_rescore(&run, policy),
        Command::Report(a) => cmd_report(a),
        Command::Audit { run, pack } => cmd_audit(&run, pack.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let families = a.families.unwrap_or_else(|| Family::ALL.to_vec());
    let pack = build_pack(&families, a.count as usize, a.seed).context("pack generation failed")?;
    pack.write(&a.out)?;
    println!("{} episodes in {} content_hash={}", pack.episodes.len(), a.out.display(), pack.manifest.content_hash);
    Ok(())
}

fn cmd_validate(pack_dir: &Path) -> Result<()> {
    let pack = Pack::load(pack_dir)?;
    let mut failed = 0;
    for e in &pack.episodes {
        let verdict = validate_episode(e);
        for v in &verdict.violations {
            println!("{}: {v}", e.episode_id);
        }
        failed += usize::from(!verdict.passed());
    }
    if failed > 0 {
        bail!("{failed} of {} episodes failed validation", pack.episodes.len());
    }
    println!("{} episodes valid", pack.episodes.len());
    Ok(())
}

fn prompt_template_sha256() -> String {
    render_prompt("<TASK_INSTRUCTION>", CoordinateMode::Normalized1000).sha256
}

fn profile(feedback: bool) -> &'static str {
    if feedback {
        "action_feedback"
    } else {
        "native_control"
    }
}

fn summary_line(run_id: &str, r: &Rates) -> String {
    format!(
        "{run_id}: {} episodes W={:.1} B={:.1} delta={:.1} FR={:.1} NR={:.1} IL={:.1} stop={:.1}",
        r.episodes, r.w, r.b, r.delta, r.fr, r.nr, r.il, r.stop
    )
}

/// Per-episode digests and headline rates, written once a run finishes.
fn write_summary(dir: &Path, manifest: &RunManifest, traces: &[Trace]) -> Result<Rates> {
    let digests: BTreeMap<&str, String> = traces.iter().map(|t| (t.header.episode_id.as_str(), t.digest())).collect();
    let refs: Vec<&Trace> = traces.iter().collect();
    let overall = Rates::of(&refs);
    let summary = json!({ "run_id": manifest.run_id, "trace_digests": digests, "overall": overall });
    let mut text = to_canonical_json(&summary)?;
    text.push('\n');
    fs::write(dir.join("summary.json"), text)?;
    Ok(overall)
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let pack = Pack::load(&a.pack).context("refusing to run on this pack")?;
    let cfg = PolicyConfig {
        kind: a.agent,
        report_delay: a.report_delay,
        execution_noise: a.execution_noise,
        consume_feedback: !a.ignore_feedback,
        seed: a.seed,
        report_probability: a.report_probability,
    };
    let feedback = a.feedback.on();
    let mut manifest = RunManifest {
        format: RUN_FORMAT.into(),
        run_id: String::new(),
        pack_name: pack.manifest.pack_name.clone(),
        pack_hash: pack.manifest.content_hash.clone(),
        agent_id: cfg.agent_id(),
        agent_config: serde_json::to_value(&cfg)?,
        prompt_policy: PROMPT_POLICY.into(),
        prompt_template_sha256: prompt_template_sha256(),
        profile: profile(feedback).into(),
        feedback,
        seed: a.seed,
        trace_dir: TRACE_DIR.into(),
        episode_ids: pack.manifest.episode_ids.clone(),
    };
    manifest.assign_id();
    write_manifest(&a.out, &manifest)?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.workers.max(1)).build()?;
    let traces: Vec<Trace> = pool.install(|| pack.episodes.par_iter().map(|e| run_policy(e, &cfg, feedback)).collect());
    for t in &traces {
        write_trace(&a.out, &manifest, t)?;
    }
    let overall = write_summary(&a.out, &manifest, &traces)?;
    println!("{}", summary_line(&manifest.run_id, &overall));
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<()> {
    let pack = Pack::load(&a.pack).context("refusing to serve this pack")?;
    let episodes: Vec<_> = match &a.episodes {
        Some(ids) => {
            let chosen: Vec<_> = pack.episodes.iter().filter(|e| ids.contains(&e.episode_id)).collect();
            if chosen.len() != ids.len() {
                bail!("some requested episodes are not in the pack");
            }
            chosen
        }
        None => pack.episodes.iter().collect(),
    };
    if a.listen.is_none() && !a.stdio {
        bail!("choose --listen <addr> or --stdio");
    }
    if !(a.timeout.is_finite() && a.timeout > 0.0) {
        bail!("--timeout must be positive");
    }
    let feedback = a.feedback.on();
    let options =
        ServeOptions { agent_id: a.agent_id.clone(), feedback, turn_timeout: Duration::from_secs_f64(a.timeout) };
    let mut manifest = RunManifest {
        format: RUN_FORMAT.into(),
        run_id: String::new(),
        pack_name: pack.manifest.pack_name.clone(),
        pack_hash: pack.manifest.content_hash.clone(),
        agent_id: a.agent_id.clone(),
        agent_config: json!({ "kind": "remote", "turn_timeout_secs": a.timeout }),
        prompt_policy: PROMPT_POLICY.into(),
        prompt_template_sha256: prompt_template_sha256(),
        profile: profile(feedback).into(),
        feedback,
        seed: a.seed,
        trace_dir: TRACE_DIR.into(),
        episode_ids: episodes.iter().map(|e| e.episode_id.clone()).collect(),
    };
    manifest.assign_id();
    write_manifest(&a.out, &manifest)?;

    let mut traces = Vec::with_capacity(episodes.len());
    if let Some(addr) = &a.listen {
        let listener = TcpListener::bind(addr).with_context(|| format!("cannot listen on {addr}"))?;
        eprintln!("listening on {}", listener.local_addr()?);
        for e in &episodes {
            let (stream, peer) = listener.accept()?;
            eprintln!("{}: serving {peer}", e.episode_id);
            let mut transport = LineTransport::tcp(stream)?;
            let trace = serve_episode(e, &mut transport, &options);
            write_trace(&a.out, &manifest, &trace)?;
            traces.push(trace);
        }
    } else {
        let mut transport = LineTransport::stdio();
        for e in &episodes {
            let trace = serve_episode(e, &mut transport, &options);
            write_trace(&a.out, &manifest, &trace)?;
            traces.push(trace);
        }
    }
    let overall = write_summary(&a.out, &manifest, &traces)?;
    eprintln!("{}", summary_line(&manifest.run_id, &overall));
    Ok(())
}

fn cmd_rescore(run: &Path, policy: ReportPolicy) -> Result<()> {
    let set = load_run(run)?;
    let refs: Vec<&Trace> = set.traces.iter().collect();
    let rates = Rates::of(&refs);
    let b = rescore_counterfactual(&refs, policy);
    println!("{} policy={} B={b:.1} W={:.1} actual_B={:.1}", set.manifest.run_id, policy.as_str(), rates.w, rates.b);
    Ok(())
}

fn filter_families(set: TraceSet, families: &Option<Vec<Family>>) -> TraceSet {
    match families {
        None => set,
        Some(fs) => TraceSet {
            traces: set.traces.into_iter().filter(|t| fs.contains(&t.header.family)).collect(),
            manifest: set.manifest,
        },
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let set = filter_families(load_run(&a.run)?, &a.families);
    let out = a.out.clone().unwrap_or_else(|| a.run.join("report"));
    fs::create_dir_all(&out)?;
    let report = aggregate(&set.traces);
    let (json_out, csv_out) = match a.format {
        Format::Json => (true, false),
        Format::Csv => (false, true),
        Format::Both => (true, true),
    };
    if json_out {
        write_text(&out.join("metrics.json"), &(to_canonical_json(&report)? + "\n"))?;
    }
    if csv_out {
        write_text(&out.join("outcomes.csv"), &tables::outcomes_csv(&report))?;
        write_text(&out.join("counterfactual.csv"), &tables::counterfactual_csv(&report))?;
        write_text(&out.join("closure_lag.csv"), &tables::closure_lag_csv(&report))?;
        write_text(&out.join("conditional.csv"), &tables::conditional_csv(&report))?;
        write_text(&out.join("post_attainment.csv"), &tables::post_attainment_csv(&report))?;
    }
    if let Some(paired) = &a.paired {
        let other = filter_families(load_run(paired)?, &a.families);
        let cmp = compare_feedback(&set, &other)?;
        if json_out {
            write_text(&out.join("feedback.json"), &(to_canonical_json(&cmp)? + "\n"))?;
        }
        if csv_out {
            write_text(&out.join("feedback.csv"), &tables::feedback_csv(&cmp))?;
        }
        println!(
            "paired {} vs {}: dW={:.1} dB={:.1} dFR={:.1} dNR={:.1} path_blocked {:.3} -> {:.3}",
            cmp.base_run,
            cmp.feedback_run,
            cmp.delta_w,
            cmp.delta_b,
            cmp.delta_fr,
            cmp.delta_nr,
            cmp.base_events.path_blocked,
            cmp.feedback_events.path_blocked
        );
    }
    println!("{}", summary_line(&set.manifest.run_id, &report.overall));
    println!("report written to {}", out.display());
    std::io::stdout().flush()?;
    Ok(())
}

fn cmd_audit(run: &Path, pack_dir: Option<&Path>) -> Result<()> {
    let set = load_run(run)?;
    let summary: serde_json::Value = serde_json::from_reader(BufReader::new(
        fs::File::open(run.join("summary.json")).context("run has no summary.json")?,
    ))?;
    let pack = pack_dir.map(Pack::load).transpose()?;
    if let Some(p) = &pack {
        if p.manifest.content_hash != set.manifest.pack_hash {
            bail!("pack hash {} does not match the run's {}", p.manifest.content_hash, set.manifest.pack_hash);
        }
    }
    let mut problems = Vec::new();
    for t in &set.traces {
        let id = &t.header.episode_id;
        let path = run.join(&set.manifest.trace_dir).join(format!("{id}.jsonl"));
        let file_digest = sha256_hex(&fs::read(&path)?);
        if summary["trace_digests"][id.as_str()].as_str() != Some(file_digest.as_str()) {
            problems.push(format!("{id}: file digest differs from the recorded digest"));
        }
        if file_digest != t.digest() {
            problems.push(format!("{id}: trace file is not in canonical form"));
        }
        if let Some(p) = &pack {
            let spec = p.episodes.iter().find(|e| &e.episode_id == id).context("episode missing from pack")?;
            match settle(spec, &t.header.initial, &t.steps, t.settlement.terminal_cause) {
                Ok(s) if s == t.settlement => {}
                Ok(_) => problems.push(format!("{id}: re-settlement differs")),
                Err(e) => problems.push(format!("{id}: {e}")),
            }
            if replay(spec, t).to_jsonl() != t.to_jsonl() {
                problems.push(format!("{id}: replay does not reproduce the trace"));
            }
        }
    }
    for p in &problems {
        println!("{p}");
    }
    if !problems.is_empty() {
        bail!("audit found {} problems", problems.len());
    }
    println!("audit ok: {} traces", set.traces.len());
    Ok(())
}
