//! Full-state goal pursuit shared by the oracle-derived policies.

use crate::contract::Action;
use crate::episodes::{constraint_resolved, target_distance, EpisodeSpec, Evaluator, Goal, Metric};
use crate::world::{
    frame_cell_center, rendered_frame_cell, AgentPose, AgentState, GridScene, Intent, ObjectId, INTERACTION_RANGE,
};

use super::planner::plan_to;

/// What the pursuit logic wants to do next.
#[derive(Debug, Clone, PartialEq)]
pub enum Pursuit {
    Act(Action),
    /// The goal holds in the given state.
    Done,
}

/// The click a waiting agent issues: a grounding click, which never changes the world.
pub fn idle_action() -> Action {
    Action::interact(Intent::Ground, Some((500, 500)))
}

struct Ctx<'a> {
    spec: &'a EpisodeSpec,
    scene: &'a GridScene,
    state: &'a AgentState,
    ev: &'a Evaluator,
}

/// Next action toward the episode goal from `state`, planning over the true scene.
pub fn pursue(spec: &EpisodeSpec, scene: &GridScene, state: &AgentState, ev: &Evaluator) -> Pursuit {
    if ev.goal_met(Metric::Semantic, scene, state) {
        return Pursuit::Done;
    }
    let ctx = Ctx { spec, scene, state, ev };
    match ctx.goal_action(&spec.success.goal) {
        Some(a) => Pursuit::Act(a),
        None => Pursuit::Done,
    }
}

/// First step toward a pose that is near the goal target and faces it, or
/// `None` when `state` already has one (or none is reachable).
pub fn face_target(spec: &EpisodeSpec, scene: &GridScene, state: &AgentState, ev: &Evaluator) -> Option<Action> {
    let target = terminal_target(&spec.success.goal)?;
    let ctx = Ctx { spec, scene, state, ev };
    let obj = scene.object(target)?;
    let pos = obj.position?;
    let tol = spec.success.tolerance;
    let facing = |p: &AgentPose| rendered_frame_cell(scene, p, obj).is_some();
    ctx.goto(|p| p.position.distance(pos) < tol.near_semantic && facing(p))
}

/// The object the last sub-goal is about.
fn terminal_target(goal: &Goal) -> Option<&ObjectId> {
    match goal {
        Goal::ConstrainedGoal { goal, .. } => terminal_target(goal),
        Goal::OrderedChain { steps } => steps.last().and_then(terminal_target),
        g => g.primary_target(),
    }
}

impl Ctx<'_> {
    fn holds(&self, g: &Goal) -> bool {
        self.ev.holds(g, Metric::Semantic, self.scene, self.state)
    }

    fn goal_action(&self, goal: &Goal) -> Option<Action> {
        match goal {
            Goal::TargetGrounded { target } => {
                (!self.ev.is_grounded(target, Metric::Semantic)).then(|| self.interact(target, Intent::Ground))
            }
            Goal::AgentNearTarget { target } => (!self.holds(goal)).then(|| self.approach(target)),
            Goal::ObjectVisibleLatched { target } => (!self.ev.has_seen(target)).then(|| self.look_at(target)),
            Goal::ReportStatus { target, .. } => (!self.holds(goal)).then(|| self.look_at(target)),
            Goal::ObjectState { target, property, value } => {
                (!self.holds(goal)).then(|| self.interact(target, property.intent_for(*value)))
            }
            Goal::ObjectHeld { target } => (!self.holds(goal)).then(|| self.acquire(target)),
            Goal::ObjectAtReceptacle { target, receptacle } => {
                if self.holds(goal) {
                    return None;
                }
                if self.state.held.as_ref() != Some(target) {
                    return Some(self.acquire(target));
                }
                let r = self.scene.object(receptacle)?;
                Some(if r.openable && !r.is_open {
                    self.interact(receptacle, Intent::OpenAccess)
                } else {
                    self.interact(receptacle, Intent::Place)
                })
            }
            Goal::ConstrainedGoal { obstacle, goal: inner } => {
                let resolved = constraint_resolved(self.scene, self.spec.scene.agent_start.position, inner);
                if !resolved && self.state.held.as_ref() != Some(obstacle) {
                    Some(self.acquire(obstacle))
                } else {
                    self.goal_action(inner)
                }
            }
            Goal::OrderedChain { steps } => {
                let idx = self.ev.chain_index(Metric::Semantic);
                steps[idx..].iter().find_map(|g| self.goal_action(g))
            }
        }
    }

    fn goto(&self, goal: impl Fn(&AgentPose) -> bool) -> Option<Action> {
        plan_to(self.scene, self.state.pose, goal).and_then(|p| p.into_iter().next())
    }

    fn fallback() -> Action {
        Action::navigate(crate::world::NavigateMode::TurnRight, 90.0)
    }

    fn look_at(&self, target: &ObjectId) -> Action {
        let Some(obj) = self.scene.object(target) else { return Self::fallback() };
        self.goto(|p| rendered_frame_cell(self.scene, p, obj).is_some()).unwrap_or_else(Self::fallback)
    }

    /// Face the target from as close as the tolerances allow, strict first.
    fn approach(&self, target: &ObjectId) -> Action {
        let Some(obj) = self.scene.object(target) else { return Self::fallback() };
        let Some(pos) = obj.position else { return Self::fallback() };
        let tol = self.spec.success.tolerance;
        let facing = |p: &AgentPose| rendered_frame_cell(self.scene, p, obj).is_some();
        self.goto(|p| p.position.distance(pos) <= tol.near_strict && facing(p))
            .or_else(|| self.goto(|p| p.position.distance(pos) < tol.near_semantic && facing(p)))
            .or_else(|| self.goto(|p| p.position.distance(pos) < tol.near_semantic))
            .unwrap_or_else(Self::fallback)
    }

    fn acquire(&self, target: &ObjectId) -> Action {
        if let Some(h) = &self.state.held {
            if h != target {
                return Action::interact(Intent::Drop, None);
            }
        }
        let Some(obj) = self.scene.object(target) else { return Self::fallback() };
        if let Some(cid) = &obj.contained_in {
            if self.scene.object(cid).is_some_and(|c| !c.is_open) {
                return self.interact(cid, Intent::OpenAccess);
            }
        }
        self.interact(target, Intent::Pick)
    }

    /// Click the target with `intent`, moving first until it is drawn and in range.
    fn interact(&self, target: &ObjectId, intent: Intent) -> Action {
        let Some(obj) = self.scene.object(target) else { return Self::fallback() };
        let in_reach = |p: &AgentPose| {
            intent == Intent::Ground
                || target_distance(self.scene, &AgentState { pose: *p, held: None }, target)
                    .is_some_and(|d| d <= INTERACTION_RANGE)
        };
        if let Some(fc) = rendered_frame_cell(self.scene, &self.state.pose, obj) {
            if in_reach(&self.state.pose) {
                return Action::interact(intent, Some(frame_cell_center(fc)));
            }
        }
        self.goto(|p| in_reach(p) && rendered_frame_cell(self.scene, p, obj).is_some()).unwrap_or_else(Self::fallback)
    }
}
