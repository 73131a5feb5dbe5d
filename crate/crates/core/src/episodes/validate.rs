//! Independent re-check of generator guarantees plus oracle solvability.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::agents::{run_policy, PolicyConfig};
use crate::world::{visible_cells, world_to_frame_cell, AgentState, Cell, GridScene};

use super::evaluate::{reachable_within, Evaluator};
use super::family::Family;
use super::spec::{state_label, EpisodeSpec, Goal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    InvalidScene,
    BudgetMismatch,
    GoalKindMismatch,
    MissingTarget,
    AmbiguousTarget,
    VisibilityFlag,
    PreSatisfied,
    ProgressNotZero,
    LabelMismatch,
    ChainBinding,
    ConstraintNotBinding,
    ConstraintUnresolvable,
    Unsolvable,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::InvalidScene => "invalid_scene",
            ViolationKind::BudgetMismatch => "budget_mismatch",
            ViolationKind::GoalKindMismatch => "goal_kind_mismatch",
            ViolationKind::MissingTarget => "missing_target",
            ViolationKind::AmbiguousTarget => "ambiguous_target",
            ViolationKind::VisibilityFlag => "visibility_flag",
            ViolationKind::PreSatisfied => "pre_satisfied",
            ViolationKind::ProgressNotZero => "progress_not_zero",
            ViolationKind::LabelMismatch => "label_mismatch",
            ViolationKind::ChainBinding => "chain_binding",
            ViolationKind::ConstraintNotBinding => "constraint_not_binding",
            ViolationKind::ConstraintUnresolvable => "constraint_unresolvable",
            ViolationKind::Unsolvable => "unsolvable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.as_str(), self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, detail: impl Into<String>) {
        self.violations.push(Violation { kind, detail: detail.into() });
    }
}

/// Whether the cell is seen from the start pose and falls inside the viewport wedge.
pub fn in_view_at_start(scene: &GridScene, pos: Cell) -> bool {
    let pose = scene.agent_start;
    visible_cells(scene, &pose).contains(&pos) && world_to_frame_cell(&pose, pos).is_some()
}

fn kind_matches(family: Family, goal: &Goal) -> bool {
    match family {
        Family::PG => matches!(goal, Goal::TargetGrounded { .. }),
        Family::DA => matches!(goal, Goal::AgentNearTarget { .. }),
        Family::VS => matches!(goal, Goal::ObjectVisibleLatched { .. }),
        Family::SV => matches!(goal, Goal::ReportStatus { .. }),
        Family::AI | Family::SI => matches!(goal, Goal::ObjectState { .. } | Goal::ObjectHeld { .. }),
        Family::SM => matches!(goal, Goal::OrderedChain { .. }),
        Family::CR => matches!(goal, Goal::ConstrainedGoal { .. }),
    }
}

/// Check a spec against every generator guarantee; stops before the oracle
/// run if structural checks already failed.
pub fn validate_episode(spec: &EpisodeSpec) -> Verdict {
    use ViolationKind as V;
    let mut verdict = Verdict::default();
    let scene = &spec.scene;
    if let Err(e) = scene.validate() {
        verdict.push(V::InvalidScene, e.to_string());
        return verdict;
    }
    let fs = spec.family.spec();
    if spec.budget.step_budget != fs.step_budget || spec.budget.invalid_limit != fs.invalid_limit {
        verdict.push(V::BudgetMismatch, format!("{:?} differs from the {} table", spec.budget, spec.family));
    }
    let goal = &spec.success.goal;
    if !kind_matches(spec.family, goal) {
        verdict.push(V::GoalKindMismatch, format!("{} cannot use this goal kind", spec.family));
    }
    for id in goal.referenced_objects() {
        let Some(obj) = scene.object(id) else {
            verdict.push(V::MissingTarget, format!("{id} is not in the scene"));
            continue;
        };
        if scene.objects.iter().filter(|o| o.category == obj.category).count() > 1 {
            verdict.push(V::AmbiguousTarget, format!("category {} appears more than once", obj.category));
        }
    }
    if !verdict.passed() {
        return verdict;
    }

    let target = spec.target_object().expect("references checked");
    let target_pos = target.position.expect("targets start on the grid");
    let in_view = in_view_at_start(scene, target_pos);
    if fs.target_visible_at_start && !in_view {
        verdict.push(V::VisibilityFlag, format!("{} is not in view at start", target.object_id));
    }
    if !fs.target_visible_at_start && visible_cells(scene, &scene.agent_start).contains(&target_pos) {
        verdict.push(V::VisibilityFlag, format!("{} is visible at start", target.object_id));
    }

    if !spec.family.is_state_verification() {
        let mut ev = Evaluator::new(spec);
        let sample = ev.observe(0, scene, &AgentState::at(scene.agent_start), None);
        if sample.w_sem {
            verdict.push(V::PreSatisfied, "goal holds at step 0");
        } else if sample.progress > 0.0 {
            verdict.push(V::ProgressNotZero, format!("progress {} at step 0", sample.progress));
        }
    }

    match goal {
        Goal::ReportStatus { expected_label, .. } => {
            if state_label(target) != Some(*expected_label) {
                verdict.push(V::LabelMismatch, format!("expected label {expected_label} disagrees with hidden state"));
            }
        }
        Goal::OrderedChain { steps } => {
            if steps.len() < 2 || goal.referenced_objects().len() < 2 {
                verdict.push(V::ChainBinding, "a chain needs at least two steps over two objects");
            }
        }
        Goal::ConstrainedGoal { obstacle, goal: inner } => {
            let obs = scene.object(obstacle).expect("references checked");
            let start = scene.agent_start.position;
            let inner_pos = inner
                .primary_target()
                .and_then(|t| scene.object(t))
                .and_then(|o| o.position)
                .expect("references checked");
            if reachable_within(scene, start, inner_pos, crate::world::INTERACTION_RANGE) {
                verdict.push(V::ConstraintNotBinding, "a path reaches the target without moving the obstacle");
            }
            let mut cleared = scene.clone();
            cleared.objects.retain(|o| &o.object_id != obstacle);
            if !(obs.blocking && obs.pickable)
                || !reachable_within(&cleared, start, inner_pos, crate::world::INTERACTION_RANGE)
            {
                verdict.push(V::ConstraintUnresolvable, "removing the obstacle does not open a path");
            }
        }
        _ => {}
    }
    if !verdict.passed() {
        return verdict;
    }

    let trace = run_policy(spec, &PolicyConfig::oracle(), false);
    if !trace.settlement.b {
        verdict.push(
            V::Unsolvable,
            format!("oracle settled {:?} within {} steps", trace.settlement.closure, spec.budget.step_budget),
        );
    }
    verdict
}
