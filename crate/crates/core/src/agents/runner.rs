//! The episode loop: observation, agent turn, budget gate, world update, record.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::canonical::canonical_digest;
use crate::contract::{
    parse_action, render_prompt, Action, BudgetState, CoordinateMode, DialogueHistory, GateVerdict, InvalidReason,
    Skill, PROMPT_POLICY,
};
use crate::episodes::{EpisodeSpec, Evaluator};
use crate::settlement::{settle, RunConfig, StepRecord, TerminalCause, Trace, TraceHeader, TRACE_FORMAT};
use crate::world::{
    apply_interact, apply_look, apply_navigate, render_frame, AgentState, FeedbackEvent, Frame, GridScene,
};

/// Everything the agent is shown on one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationPayload {
    pub step: u32,
    pub instruction: String,
    pub frame: Frame,
    pub remaining_steps: u32,
    pub remaining_invalid: u32,
    pub history: DialogueHistory,
    /// Outcome signals for the previous action; present only under the feedback intervention.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<FeedbackEvent>,
}

/// Privileged harness state. Scripted baselines may read it; remote agents never see it.
pub struct WorldView<'a> {
    pub spec: &'a EpisodeSpec,
    pub scene: &'a GridScene,
    pub state: &'a AgentState,
    pub evaluator: &'a Evaluator,
    pub budget: &'a BudgetState,
    pub first_goal_step: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Turn {
    Output(String),
    /// Nothing arrived before the deadline; counted as an invalid turn.
    Timeout,
    /// The agent went away; the episode is aborted.
    Disconnected,
}

pub trait Driver {
    fn turn(&mut self, obs: &ObservationPayload, view: &WorldView<'_>) -> Turn;
}

/// Config for a native-control run. The prompt digest is always the normalized-coordinate prompt.
pub fn run_config(spec: &EpisodeSpec, agent_id: &str, feedback: bool) -> RunConfig {
    RunConfig {
        agent_id: agent_id.to_string(),
        profile: if feedback { "action_feedback" } else { "native_control" }.to_string(),
        feedback,
        prompt_policy: PROMPT_POLICY.to_string(),
        prompt_sha256: render_prompt(&spec.instruction, CoordinateMode::Normalized1000).sha256,
    }
}

fn world_digest(scene: &GridScene, state: &AgentState) -> String {
    canonical_digest(&json!({ "objects": scene.objects, "agent": state })).expect("world state serializes")
}

fn history_line(step: u32, feedback: Option<FeedbackEvent>) -> String {
    match feedback {
        Some(f) if f.too_far || f.path_blocked => {
            let mut parts = Vec::new();
            if f.too_far {
                parts.push("too_far");
            }
            if f.path_blocked {
                parts.push("path_blocked");
            }
            format!("step {step}; feedback: {}", parts.join(", "))
        }
        _ => format!("step {step}"),
    }
}

/// Run one episode to closure.
pub fn run_episode(spec: &EpisodeSpec, driver: &mut dyn Driver, config: RunConfig) -> Trace {
    let mut scene = spec.scene.clone();
    let mut state = AgentState::at(scene.agent_start);
    let mut evaluator = Evaluator::new(spec);
    let initial = evaluator.observe(0, &scene, &state, None);
    let mut budget = BudgetState::new(spec.budget.step_budget, spec.budget.invalid_limit);
    let mut history = DialogueHistory::new();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut last_feedback = FeedbackEvent::default();
    let mut first_goal_step = initial.w_sem.then_some(0);

    let cause = loop {
        if budget.exhausted() {
            break TerminalCause::BudgetExhausted;
        }
        let step = budget.steps_used + 1;
        let shown_feedback = config.feedback.then_some(last_feedback);
        let obs = ObservationPayload {
            step,
            instruction: spec.instruction.clone(),
            frame: render_frame(&scene, &state.pose),
            remaining_steps: budget.steps_remaining(),
            remaining_invalid: budget.invalids_remaining(),
            history: history.clone(),
            feedback: shown_feedback,
        };
        let view =
            WorldView { spec, scene: &scene, state: &state, evaluator: &evaluator, budget: &budget, first_goal_step };
        let (raw, parsed) = match driver.turn(&obs, &view) {
            Turn::Output(raw) => {
                let parsed = parse_action(&raw);
                (raw, parsed)
            }
            Turn::Timeout => (String::new(), Err(InvalidReason::Timeout)),
            Turn::Disconnected => break TerminalCause::Aborted,
        };
        let verdict = budget.step_gate(&parsed);
        if verdict == GateVerdict::TerminateNoReport {
            break TerminalCause::BudgetExhausted;
        }

        let mut feedback = FeedbackEvent::default();
        let mut outcome = None;
        let mut grounding = None;
        if let Ok(action) = &parsed {
            match &action.skill {
                Skill::Navigate { mode, magnitude } => {
                    if let Ok((next, fb)) = apply_navigate(&scene, &state, *mode, *magnitude) {
                        state = next;
                        feedback = fb;
                    }
                }
                Skill::Look { direction, magnitude } => {
                    if let Ok(next) = apply_look(&state, *direction, *magnitude) {
                        state = next;
                    }
                }
                Skill::InteractPixel { intent, coords } => {
                    if let Ok(r) = apply_interact(&mut scene, &mut state, *intent, *coords) {
                        feedback = r.feedback;
                        outcome = Some(r.outcome);
                        grounding = r.grounding;
                    }
                }
                Skill::Report(_) => {}
            }
        }
        let progress = evaluator.observe(step, &scene, &state, grounding.as_ref());
        if progress.w_sem && first_goal_step.is_none() {
            first_goal_step = Some(step);
        }
        steps.push(StepRecord {
            step,
            skill: parsed.as_ref().ok().map(|a| a.skill.name()),
            action: parsed.as_ref().ok().map(Action::to_value),
            invalid: parsed.as_ref().err().copied(),
            raw: raw.clone(),
            outcome,
            feedback,
            grounding,
            progress,
            world_digest: world_digest(&scene, &state),
        });
        history.push(history_line(step, shown_feedback), raw);
        last_feedback = feedback;

        if verdict == GateVerdict::TerminateInvalidLimit {
            break TerminalCause::InvalidLimit;
        }
        if parsed.as_ref().is_ok_and(Action::is_report) {
            break TerminalCause::Report;
        }
    };

    let settlement = settle(spec, &initial, &steps, cause).expect("runner produces well-formed traces");
    Trace {
        header: TraceHeader {
            format: TRACE_FORMAT.to_string(),
            episode_id: spec.episode_id.clone(),
            family: spec.family,
            config,
            initial,
        },
        steps,
        settlement,
    }
}

/// Feeds a recorded trace's outputs back to the runner.
struct Scripted<'a> {
    steps: std::slice::Iter<'a, StepRecord>,
}

impl Driver for Scripted<'_> {
    fn turn(&mut self, _: &ObservationPayload, _: &WorldView<'_>) -> Turn {
        match self.steps.next() {
            Some(s) if s.invalid == Some(InvalidReason::Timeout) => Turn::Timeout,
            Some(s) => Turn::Output(s.raw.clone()),
            None => Turn::Disconnected,
        }
    }
}

/// Re-execute a trace from its raw outputs.
pub fn replay(spec: &EpisodeSpec, trace: &Trace) -> Trace {
    let mut driver = Scripted { steps: trace.steps.iter() };
    run_episode(spec, &mut driver, trace.header.config.clone())
}

/// True when re-execution reproduces the trace byte for byte.
pub fn replay_matches(spec: &EpisodeSpec, trace: &Trace) -> bool {
    replay(spec, trace).to_jsonl() == trace.to_jsonl()
}
