//! Step records, settlement, and the JSON Lines trace format.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::canonical::{sha256_hex, to_canonical_json};
use crate::contract::{parse_action, InvalidReason, ReportContent, Skill, SkillName};
use crate::episodes::{EpisodeSpec, Family, ProgressSample};
use crate::world::{FeedbackEvent, GroundingClick, InteractOutcome};

use super::rules::{match_report, MatchMode};

pub const TRACE_FORMAT: &str = "closurebench-trace/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalCause {
    Report,
    BudgetExhausted,
    InvalidLimit,
    /// Transport failure in wire mode; excluded from FR/NR/IL.
    Aborted,
}

/// The single case that describes how an episode closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosureCase {
    Success,
    FalseReport,
    NoReport,
    InvalidLimit,
    /// A matching report that is not a benchmark success (honest fail on W = 0,
    /// or a correct label whose state was not observable at closure).
    HonestNonSuccess,
    Aborted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub fr: bool,
    pub nr: bool,
    pub il: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    pub terminal_cause: TerminalCause,
    pub w_sem: bool,
    pub w_strict: bool,
    pub b: bool,
    #[serde(rename = "match")]
    pub matched: bool,
    pub report: Option<ReportContent>,
    pub labels: Labels,
    pub closure: ClosureCase,
    pub first_goal_step: Option<u32>,
    pub report_step: Option<u32>,
    pub progress_at_report: Option<f64>,
    pub steps_used: u32,
    pub invalids_used: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    /// Agent output exactly as received; empty on timeout.
    pub raw: String,
    pub skill: Option<SkillName>,
    /// Normalized action in canonical form.
    pub action: Option<Value>,
    pub invalid: Option<InvalidReason>,
    pub outcome: Option<InteractOutcome>,
    pub feedback: FeedbackEvent,
    pub grounding: Option<GroundingClick>,
    pub progress: ProgressSample,
    /// SHA-256 of the canonical post-action scene and agent state.
    pub world_digest: String,
}

impl StepRecord {
    /// The report carried by this step, if it is a valid report.
    pub fn report(&self) -> Option<ReportContent> {
        if self.skill != Some(SkillName::Report) {
            return None;
        }
        match parse_action(&self.raw).ok()?.skill {
            Skill::Report(r) => Some(r),
            _ => None,
        }
    }
}

/// Everything that identifies how an episode was run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub agent_id: String,
    pub profile: String,
    pub feedback: bool,
    pub prompt_policy: String,
    pub prompt_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub episode_id: String,
    pub family: Family,
    pub config: RunConfig,
    /// Goal status of the start state.
    pub initial: ProgressSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub steps: Vec<StepRecord>,
    pub settlement: Settlement,
}

#[derive(Debug, Error, PartialEq)]
pub enum SettleError {
    #[error("step indices are not contiguous from 1 (found {found} at position {position})")]
    NonContiguous { position: usize, found: u32 },
    #[error("report at step {0} is not the final step")]
    ReportBeforeEnd(u32),
    #[error("terminal cause {cause:?} is inconsistent with the trace: {detail}")]
    Inconsistent { cause: TerminalCause, detail: String },
}

/// Settle an episode from its step records. Pure: the same records always
/// give the same settlement.
pub fn settle(
    spec: &EpisodeSpec,
    initial: &ProgressSample,
    steps: &[StepRecord],
    cause: TerminalCause,
) -> Result<Settlement, SettleError> {
    for (i, s) in steps.iter().enumerate() {
        if s.step as usize != i + 1 {
            return Err(SettleError::NonContiguous { position: i, found: s.step });
        }
        if s.skill == Some(SkillName::Report) && i + 1 != steps.len() {
            return Err(SettleError::ReportBeforeEnd(s.step));
        }
    }
    let inconsistent = |detail: &str| Err(SettleError::Inconsistent { cause, detail: detail.to_string() });
    let last = steps.last();
    let report = last.and_then(StepRecord::report);
    let invalid_count = steps.iter().filter(|s| s.invalid.is_some()).count() as u32;
    let steps_used = steps.len() as u32;
    let limit = spec.budget.invalid_limit;
    match cause {
        TerminalCause::Report if report.is_none() => return inconsistent("final step is not a valid report"),
        TerminalCause::BudgetExhausted if steps_used != spec.budget.step_budget || report.is_some() => {
            return inconsistent("budget not spent, or a report was made")
        }
        TerminalCause::InvalidLimit if invalid_count != limit + 1 || last.is_none_or(|s| s.invalid.is_none()) => {
            return inconsistent("invalid-limit cause needs exactly limit + 1 invalid turns ending the trace")
        }
        _ => {}
    }
    if steps_used > spec.budget.step_budget {
        return inconsistent("more steps than the budget allows");
    }
    if cause != TerminalCause::InvalidLimit && invalid_count > limit {
        return inconsistent("invalid turns exceed the limit without terminating");
    }

    let final_sample = last.map_or(initial, |s| &s.progress);
    let w_sem = final_sample.w_sem;
    let w_strict = final_sample.w_strict;
    let mode =
        if spec.family.is_state_verification() { MatchMode::StateVerification } else { MatchMode::GoalCompletion };
    let reported = cause == TerminalCause::Report;
    let matched =
        reported && report.as_ref().is_some_and(|r| match_report(mode, r.status, w_sem, spec.success.expected_label()));
    let b = reported && matched && w_sem;
    let labels = Labels {
        fr: reported && !matched,
        nr: cause == TerminalCause::BudgetExhausted,
        il: cause == TerminalCause::InvalidLimit,
    };
    let closure = match cause {
        TerminalCause::Aborted => ClosureCase::Aborted,
        TerminalCause::BudgetExhausted => ClosureCase::NoReport,
        TerminalCause::InvalidLimit => ClosureCase::InvalidLimit,
        TerminalCause::Report if b => ClosureCase::Success,
        TerminalCause::Report if matched => ClosureCase::HonestNonSuccess,
        TerminalCause::Report => ClosureCase::FalseReport,
    };
    let first_goal_step = if initial.w_sem { Some(0) } else { steps.iter().find(|s| s.progress.w_sem).map(|s| s.step) };
    Ok(Settlement {
        terminal_cause: cause,
        w_sem,
        w_strict,
        b,
        matched,
        report: if reported { report } else { None },
        labels,
        closure,
        first_goal_step,
        report_step: reported.then_some(steps_used),
        progress_at_report: if reported { last.map(|s| s.progress.progress) } else { None },
        steps_used,
        invalids_used: invalid_count.min(limit),
    })
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TraceLine {
    Header(TraceHeader),
    Step(StepRecord),
    Settlement(Settlement),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("malformed trace: {0}")]
    Shape(String),
}

impl Trace {
    /// Canonical JSON Lines: header, one line per step, settlement.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &TraceLine| {
            out.push_str(&to_canonical_json(line).expect("trace lines serialize"));
            out.push('\n');
        };
        push(&TraceLine::Header(self.header.clone()));
        for s in &self.steps {
            push(&TraceLine::Step(s.clone()));
        }
        push(&TraceLine::Settlement(self.settlement.clone()));
        out
    }

    pub fn digest(&self) -> String {
        trace_digest(self)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_jsonl().as_bytes())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Trace, TraceError> {
        let mut header = None;
        let mut steps = Vec::new();
        let mut settlement = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TraceLine =
                serde_json::from_str(&line).map_err(|source| TraceError::Json { line: i + 1, source })?;
            match parsed {
                TraceLine::Header(h) if header.is_none() && steps.is_empty() => header = Some(h),
                TraceLine::Step(s) if header.is_some() && settlement.is_none() => steps.push(s),
                TraceLine::Settlement(s) if header.is_some() && settlement.is_none() => settlement = Some(s),
                _ => return Err(TraceError::Shape(format!("unexpected line {}", i + 1))),
            }
        }
        match (header, settlement) {
            (Some(header), Some(settlement)) => Ok(Trace { header, steps, settlement }),
            _ => Err(TraceError::Shape("missing header or settlement".into())),
        }
    }
}

/// SHA-256 over the canonical JSON Lines form.
pub fn trace_digest(trace: &Trace) -> String {
    sha256_hex(trace.to_jsonl().as_bytes())
}
