//! Scripted baseline agents.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canonical::derive_seed;
use crate::contract::{Action, ReportStatus, Skill};
use crate::episodes::{state_label, EpisodeSpec, Goal};
use crate::settlement::Trace;
use crate::world::{
    apply_look, apply_navigate, click_to_frame_cell, AgentState, CellReport, Frame, FrameCell, Intent, LookDirection,
    NavigateMode, VisualState, VIEW_RANGE,
};

use super::oracle::{face_target, idle_action, pursue, Pursuit};
use super::runner::{run_config, run_episode, Driver, ObservationPayload, Turn, WorldView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Full-state planner that reports a fixed number of steps after first attainment.
    Oracle,
    /// The oracle's actions without ever reporting.
    Drift,
    /// Reports success on the first turn.
    EagerReporter,
    /// Reports fail on the first turn.
    HonestFail,
    /// Uniform random skills with an occasional report.
    Random,
    /// Dead-reckoned pose belief with noisy execution; reports on frame evidence.
    StateCoupled,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Oracle,
        PolicyKind::Drift,
        PolicyKind::EagerReporter,
        PolicyKind::HonestFail,
        PolicyKind::Random,
        PolicyKind::StateCoupled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Oracle => "oracle",
            PolicyKind::Drift => "drift",
            PolicyKind::EagerReporter => "eager_reporter",
            PolicyKind::HonestFail => "honest_fail",
            PolicyKind::Random => "random",
            PolicyKind::StateCoupled => "state_coupled",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown policy {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Steps between first attainment and the report.
    pub report_delay: u32,
    /// Probability that a navigate command overshoots (one cell, or a quarter turn).
    pub execution_noise: f64,
    /// Whether execution feedback resynchronizes the pose belief.
    pub consume_feedback: bool,
    pub seed: u64,
    pub report_probability: f64,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        Self { kind, report_delay: 1, execution_noise: 0.25, consume_feedback: true, seed: 0, report_probability: 0.05 }
    }

    pub fn oracle() -> Self {
        Self::new(PolicyKind::Oracle)
    }

    pub fn agent_id(&self) -> String {
        match self.kind {
            PolicyKind::Oracle => format!("oracle-d{}", self.report_delay),
            PolicyKind::Random => format!("random-p{}-s{}", self.report_probability, self.seed),
            PolicyKind::StateCoupled => format!(
                "state_coupled-n{}-d{}-{}",
                self.execution_noise,
                self.report_delay,
                if self.consume_feedback { "consume" } else { "ignore" }
            ),
            k => k.as_str().to_string(),
        }
    }

    /// A fresh driver for one episode.
    pub fn driver(&self, spec: &EpisodeSpec) -> Box<dyn Driver> {
        let rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
            "policy",
            self.kind.as_str(),
            &self.seed.to_string(),
            &spec.episode_id,
        ]));
        match self.kind {
            PolicyKind::Oracle => Box::new(OracleDriver { delay: self.report_delay, report: true }),
            PolicyKind::Drift => Box::new(OracleDriver { delay: self.report_delay, report: false }),
            PolicyKind::EagerReporter => Box::new(Fixed(ReportStatus::Success)),
            PolicyKind::HonestFail => Box::new(Fixed(ReportStatus::Fail)),
            PolicyKind::Random => Box::new(RandomDriver { rng, report_probability: self.report_probability }),
            PolicyKind::StateCoupled => Box::new(StateCoupled::new(spec, self, rng)),
        }
    }
}

/// Run one episode with a scripted policy.
pub fn run_policy(spec: &EpisodeSpec, cfg: &PolicyConfig, feedback: bool) -> Trace {
    let mut driver = cfg.driver(spec);
    run_episode(spec, driver.as_mut(), run_config(spec, &cfg.agent_id(), feedback))
}

fn output(action: Action) -> Turn {
    Turn::Output(action.to_json())
}

/// The oracle's report: success, or the observed label for state verification.
fn oracle_report(view: &WorldView<'_>) -> Action {
    if let Goal::ReportStatus { target, .. } = &view.spec.success.goal {
        if let Some(label) = view.scene.object(target).and_then(state_label) {
            return Action::report(
                label,
                format!("The {} is {}.", view.scene.object(target).map_or("", |o| &o.category), label),
            );
        }
    }
    Action::report(ReportStatus::Success, "The task is complete.")
}

struct OracleDriver {
    delay: u32,
    report: bool,
}

impl Driver for OracleDriver {
    fn turn(&mut self, _: &ObservationPayload, view: &WorldView<'_>) -> Turn {
        let step = view.budget.steps_used + 1;
        match pursue(view.spec, view.scene, view.state, view.evaluator) {
            Pursuit::Act(a) => output(a),
            Pursuit::Done => {
                let due = view.first_goal_step.is_some_and(|t| step >= t + self.delay.max(1));
                if self.report && due {
                    output(oracle_report(view))
                } else {
                    output(idle_action())
                }
            }
        }
    }
}

struct Fixed(ReportStatus);

impl Driver for Fixed {
    fn turn(&mut self, _: &ObservationPayload, _: &WorldView<'_>) -> Turn {
        output(Action::report(self.0, "Reporting without further action."))
    }
}

struct RandomDriver {
    rng: ChaCha8Rng,
    report_probability: f64,
}

impl Driver for RandomDriver {
    fn turn(&mut self, _: &ObservationPayload, _: &WorldView<'_>) -> Turn {
        let rng = &mut self.rng;
        if rng.random_bool(self.report_probability) {
            let status = if rng.random_bool(0.5) { ReportStatus::Success } else { ReportStatus::Fail };
            return output(Action::report(status, "Random report."));
        }
        let action = match rng.random_range(0..3) {
            0 => {
                let mode =
                    *[NavigateMode::Forward, NavigateMode::Backward, NavigateMode::TurnLeft, NavigateMode::TurnRight]
                        .choose(rng)
                        .expect("non-empty");
                let mag = match mode {
                    NavigateMode::Forward | NavigateMode::Backward => f64::from(rng.random_range(1..=3)),
                    _ => *[90.0, 180.0].choose(rng).expect("non-empty"),
                };
                Action::navigate(mode, mag)
            }
            1 => {
                let dir = if rng.random_bool(0.5) { LookDirection::Up } else { LookDirection::Down };
                Action::look(dir, 30.0)
            }
            _ => {
                let intent = *Intent::ALL.choose(rng).expect("non-empty");
                let coords =
                    intent.needs_coordinates().then(|| (rng.random_range(0..=1000), rng.random_range(0..=1000)));
                Action::interact(intent, coords)
            }
        };
        output(action)
    }
}

/// A click whose effect is judged from the next frame.
struct PendingClick {
    intent: Intent,
    cell: FrameCell,
    category: Option<String>,
}

/// What the state-coupled agent can infer from its own frames and clicks.
#[derive(Default)]
struct Evidence {
    seen: BTreeSet<String>,
    grounded: BTreeSet<String>,
    held: Option<String>,
    placed: BTreeSet<(String, String)>,
}

fn category_at(frame: &Frame, fc: FrameCell) -> Option<(&str, VisualState)> {
    match frame.cell(fc.column, fc.row)? {
        CellReport::Object { category, state } => Some((category.as_str(), *state)),
        _ => None,
    }
}

fn frame_objects(frame: &Frame) -> impl Iterator<Item = (FrameCell, &str, VisualState)> {
    frame.iter().filter_map(|(column, row, rep)| match rep {
        CellReport::Object { category, state } => Some((FrameCell { column, row }, category.as_str(), *state)),
        _ => None,
    })
}

/// Agent that plans on a dead-reckoned pose belief.
///
/// With probability `execution_noise` a move overshoots by one cell or a turn
/// by a quarter turn; the belief assumes the commanded action. When it
/// consumes feedback, a `too_far` or `path_blocked` signal resynchronizes the
/// belief to the true pose. It reports only when its frames support the goal.
struct StateCoupled {
    spec: EpisodeSpec,
    noise: f64,
    consume_feedback: bool,
    delay: u32,
    rng: ChaCha8Rng,
    belief: Option<AgentState>,
    evidence: Evidence,
    pending: Option<PendingClick>,
    supported_since: Option<u32>,
}

impl StateCoupled {
    fn new(spec: &EpisodeSpec, cfg: &PolicyConfig, rng: ChaCha8Rng) -> Self {
        Self {
            spec: spec.clone(),
            noise: cfg.execution_noise,
            consume_feedback: cfg.consume_feedback,
            delay: cfg.report_delay.max(1),
            rng,
            belief: None,
            evidence: Evidence::default(),
            pending: None,
            supported_since: None,
        }
    }

    fn category(&self, id: &crate::world::ObjectId) -> &str {
        self.spec.scene.object(id).map_or("", |o| o.category.as_str())
    }

    fn ingest(&mut self, frame: &Frame) {
        if let Some(p) = self.pending.take() {
            let now = category_at(frame, p.cell).map(|(c, _)| c.to_string());
            match (p.intent, p.category) {
                (Intent::Ground, Some(c)) => {
                    self.evidence.grounded.insert(c);
                }
                (Intent::Pick, Some(c)) if now.as_deref() != Some(c.as_str()) => self.evidence.held = Some(c),
                (Intent::Place, Some(r)) => {
                    if let Some(h) = self.evidence.held.clone() {
                        if now.as_deref() == Some(h.as_str()) {
                            self.evidence.placed.insert((h, r));
                            self.evidence.held = None;
                        }
                    }
                }
                (Intent::Drop, _) => self.evidence.held = None,
                _ => {}
            }
        }
        for (_, c, _) in frame_objects(frame) {
            self.evidence.seen.insert(c.to_string());
        }
    }

    /// Whether the frames support the goal; for state verification, the label seen.
    fn supported(&self, goal: &Goal, frame: &Frame) -> Option<Option<ReportStatus>> {
        let ok = |b: bool| b.then_some(None);
        match goal {
            Goal::TargetGrounded { target } => ok(self.evidence.grounded.contains(self.category(target))),
            Goal::AgentNearTarget { target } => ok(frame_objects(frame).any(|(fc, c, _)| {
                let depth = VIEW_RANGE - fc.row as i32;
                let lateral = fc.column as i32 - 6;
                c == self.category(target) && f64::from(depth * depth + lateral * lateral).sqrt() < 1.5
            })),
            Goal::ObjectVisibleLatched { target } => ok(self.evidence.seen.contains(self.category(target))),
            Goal::ReportStatus { target, .. } => {
                frame_objects(frame).filter(|(_, c, _)| *c == self.category(target)).find_map(|(_, _, s)| match s {
                    VisualState::On => Some(Some(ReportStatus::On)),
                    VisualState::Off => Some(Some(ReportStatus::Off)),
                    VisualState::Open => Some(Some(ReportStatus::Open)),
                    VisualState::Closed => Some(Some(ReportStatus::Closed)),
                    VisualState::None => None,
                })
            }
            Goal::ObjectState { target, property, value } => {
                use crate::episodes::StateProperty;
                let want = match (property, value) {
                    (StateProperty::Toggled, true) => VisualState::On,
                    (StateProperty::Toggled, false) => VisualState::Off,
                    (StateProperty::Open, true) => VisualState::Open,
                    (StateProperty::Open, false) => VisualState::Closed,
                };
                ok(frame_objects(frame).any(|(_, c, s)| c == self.category(target) && s == want))
            }
            Goal::ObjectHeld { target } => ok(self.evidence.held.as_deref() == Some(self.category(target))),
            Goal::ObjectAtReceptacle { target, receptacle } => ok(self
                .evidence
                .placed
                .contains(&(self.category(target).to_string(), self.category(receptacle).to_string()))),
            Goal::ConstrainedGoal { goal, .. } => self.supported(goal, frame),
            Goal::OrderedChain { steps } => steps.last().and_then(|g| self.supported(g, frame)),
        }
    }

    /// Apply noise to a commanded action and advance the belief as if it ran exactly.
    fn execute(&mut self, action: Action, view: &WorldView<'_>, frame: &Frame) -> Action {
        let belief = self.belief.clone().expect("initialized");
        let mut sent = action.clone();
        match &action.skill {
            Skill::Navigate { mode, magnitude } => {
                if let Ok((next, _)) = apply_navigate(view.scene, &belief, *mode, *magnitude) {
                    self.belief = Some(AgentState { held: view.state.held.clone(), ..next });
                }
                if self.rng.random_bool(self.noise) {
                    let extra = match mode {
                        NavigateMode::Forward | NavigateMode::Backward => 1.0,
                        NavigateMode::TurnLeft | NavigateMode::TurnRight => 90.0,
                    };
                    sent = Action::navigate(*mode, magnitude + extra);
                }
            }
            Skill::Look { direction, magnitude } => {
                if let Ok(next) = apply_look(&belief, *direction, *magnitude) {
                    self.belief = Some(next);
                }
            }
            Skill::InteractPixel { intent, coords } => {
                let cell = coords.map(|(x, y)| click_to_frame_cell(x, y));
                self.pending = Some(PendingClick {
                    intent: *intent,
                    cell: cell.unwrap_or(FrameCell { column: 6, row: 5 }),
                    category: cell.and_then(|fc| category_at(frame, fc)).map(|(c, _)| c.to_string()),
                });
            }
            Skill::Report(_) => {}
        }
        sent
    }
}

impl Driver for StateCoupled {
    fn turn(&mut self, obs: &ObservationPayload, view: &WorldView<'_>) -> Turn {
        let belief = self.belief.get_or_insert_with(|| AgentState::at(view.spec.scene.agent_start));
        belief.held = view.state.held.clone();
        if self.consume_feedback && obs.feedback.is_some_and(|f| f.too_far || f.path_blocked) {
            *belief = view.state.clone();
        }
        self.ingest(&obs.frame);

        match self.supported(&self.spec.success.goal, &obs.frame) {
            Some(label) => {
                let since = *self.supported_since.get_or_insert(obs.step - 1);
                if obs.step >= since + self.delay {
                    let status = label.unwrap_or(ReportStatus::Success);
                    return output(Action::report(status, "What I see supports this."));
                }
            }
            None => self.supported_since = None,
        }

        let belief = self.belief.clone().expect("initialized");
        let action = match pursue(view.spec, view.scene, &belief, view.evaluator) {
            Pursuit::Act(a) => a,
            // the plan says done but the frames disagree: turn to face the target, else press on
            Pursuit::Done => face_target(view.spec, view.scene, &belief, view.evaluator)
                .unwrap_or_else(|| Action::navigate(NavigateMode::Forward, 1.0)),
        };
        let sent = self.execute(action, view, &obs.frame);
        output(sent)
    }
}
