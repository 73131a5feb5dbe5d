//! Per-step goal evaluation and the progress scalar.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::world::{rendered_frame_cell, AgentState, Cell, GridScene, GroundingClick, ObjectId, INTERACTION_RANGE};

use super::family::Family;
use super::spec::{EpisodeSpec, Goal, SuccessSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Semantic,
    Strict,
}

/// Goal status after one step. `w_sem` is the per-step W used for
/// first-goal timing and progress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgressSample {
    pub step: u32,
    pub w_sem: bool,
    pub w_strict: bool,
    pub progress: f64,
}

/// Tracks latched facts (sightings, grounding hits, chain prefixes) across
/// an episode and scores each state.
#[derive(Debug, Clone)]
pub struct Evaluator {
    family: Family,
    success: SuccessSpec,
    start: Cell,
    d0: Option<f64>,
    seen: BTreeSet<ObjectId>,
    grounded_sem: BTreeSet<ObjectId>,
    grounded_strict: BTreeSet<ObjectId>,
    chain_sem: usize,
    chain_strict: usize,
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

impl Evaluator {
    pub fn new(spec: &EpisodeSpec) -> Self {
        let start = spec.scene.agent_start.position;
        let d0 = spec
            .success
            .goal
            .primary_target()
            .and_then(|t| spec.scene.object(t))
            .and_then(|o| o.position)
            .map(|p| start.distance(p));
        Self {
            family: spec.family,
            success: spec.success.clone(),
            start,
            d0,
            seen: BTreeSet::new(),
            grounded_sem: BTreeSet::new(),
            grounded_strict: BTreeSet::new(),
            chain_sem: 0,
            chain_strict: 0,
        }
    }

    pub fn initial_distance(&self) -> Option<f64> {
        self.d0
    }

    /// Update latches with the post-action state and score it.
    pub fn observe(
        &mut self,
        step: u32,
        scene: &GridScene,
        state: &AgentState,
        grounding: Option<&GroundingClick>,
    ) -> ProgressSample {
        let refs: Vec<ObjectId> = self.success.goal.referenced_objects().into_iter().cloned().collect();
        for id in &refs {
            let Some(obj) = scene.object(id) else { continue };
            let rendered = rendered_frame_cell(scene, &state.pose, obj);
            if rendered.is_some() {
                self.seen.insert(id.clone());
            }
            if let Some(click) = grounding {
                if click.object_id.as_ref() == Some(id) {
                    self.grounded_strict.insert(id.clone());
                    self.grounded_sem.insert(id.clone());
                }
                if let Some(fc) = rendered {
                    let r = self.success.tolerance.grounding_radius;
                    if fc.column.abs_diff(click.cell.column) <= r && fc.row.abs_diff(click.cell.row) <= r {
                        self.grounded_sem.insert(id.clone());
                    }
                }
            }
        }
        if let Goal::OrderedChain { steps } = &self.success.goal {
            let steps = steps.clone();
            for metric in [Metric::Semantic, Metric::Strict] {
                let mut idx = self.chain_index(metric);
                while idx + 1 < steps.len() && self.holds(&steps[idx], metric, scene, state) {
                    idx += 1;
                }
                match metric {
                    Metric::Semantic => self.chain_sem = idx,
                    Metric::Strict => self.chain_strict = idx,
                }
            }
        }
        let w_sem = self.goal_met(Metric::Semantic, scene, state);
        let w_strict = self.goal_met(Metric::Strict, scene, state);
        let progress = if w_sem { 1.0 } else { self.partial_progress(scene, state) };
        ProgressSample { step, w_sem, w_strict, progress }
    }

    /// W for the current state, given the latches accumulated so far.
    pub fn goal_met(&self, metric: Metric, scene: &GridScene, state: &AgentState) -> bool {
        match &self.success.goal {
            Goal::OrderedChain { steps } => {
                let idx = self.chain_index(metric);
                idx + 1 == steps.len() && self.holds(&steps[idx], metric, scene, state)
            }
            g => self.holds(g, metric, scene, state),
        }
    }

    /// Index of the first chain element not yet latched.
    pub fn chain_index(&self, metric: Metric) -> usize {
        match metric {
            Metric::Semantic => self.chain_sem,
            Metric::Strict => self.chain_strict,
        }
    }

    pub fn has_seen(&self, id: &ObjectId) -> bool {
        self.seen.contains(id)
    }

    pub fn is_grounded(&self, id: &ObjectId, metric: Metric) -> bool {
        match metric {
            Metric::Semantic => self.grounded_sem.contains(id),
            Metric::Strict => self.grounded_strict.contains(id),
        }
    }

    /// Whether a single goal holds now. Nested chains count as done only if
    /// every element holds simultaneously.
    pub fn holds(&self, goal: &Goal, metric: Metric, scene: &GridScene, state: &AgentState) -> bool {
        let tol = &self.success.tolerance;
        match goal {
            Goal::TargetGrounded { target } => self.is_grounded(target, metric),
            Goal::AgentNearTarget { target } => match target_distance(scene, state, target) {
                Some(d) => match metric {
                    Metric::Semantic => d < tol.near_semantic,
                    Metric::Strict => d <= tol.near_strict,
                },
                None => false,
            },
            Goal::ObjectVisibleLatched { target } => self.seen.contains(target),
            Goal::ReportStatus { target, .. } => {
                scene.object(target).is_some_and(|o| rendered_frame_cell(scene, &state.pose, o).is_some())
            }
            Goal::ObjectState { target, property, value } => {
                scene.object(target).is_some_and(|o| property.read(o) == *value)
            }
            Goal::ObjectHeld { target } => state.held.as_ref() == Some(target),
            Goal::ObjectAtReceptacle { target, receptacle } => {
                let (Some(o), Some(r)) = (scene.object(target), scene.object(receptacle)) else {
                    return false;
                };
                if o.contained_in.as_ref() == Some(receptacle) {
                    return true;
                }
                metric == Metric::Semantic
                    && matches!((o.position, r.position), (Some(a), Some(b)) if a.distance(b) <= tol.placement_radius)
            }
            Goal::ConstrainedGoal { obstacle: _, goal } => {
                constraint_resolved(scene, self.start, goal) && self.holds(goal, metric, scene, state)
            }
            Goal::OrderedChain { steps } => steps.iter().all(|g| self.holds(g, metric, scene, state)),
        }
    }

    fn distance_term(&self, scene: &GridScene, state: &AgentState) -> Option<f64> {
        let d0 = self.d0?;
        let near = self.success.tolerance.near_semantic;
        if d0 <= near {
            return None;
        }
        let target = self.success.goal.primary_target()?;
        let dt = target_distance(scene, state, target)?;
        Some(clamp01((d0 - dt) / (d0 - near)))
    }

    fn partial_progress(&self, scene: &GridScene, state: &AgentState) -> f64 {
        let goal = &self.success.goal;
        let target = goal.primary_target();
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        let seen = target.is_some_and(|t| self.seen.contains(t));
        let mut terms: Vec<f64> = Vec::new();
        match self.family {
            Family::PG => terms.push(flag(target.is_some_and(|t| self.is_grounded(t, Metric::Semantic)))),
            Family::DA => terms.extend(self.distance_term(scene, state)),
            Family::VS => terms.push(flag(seen)),
            Family::SV => terms.push(flag(self.holds(goal, Metric::Semantic, scene, state))),
            Family::AI | Family::SI => {
                if self.family == Family::SI {
                    terms.push(flag(seen));
                }
                terms.extend(self.distance_term(scene, state));
                terms.push(flag(self.holds(goal, Metric::Semantic, scene, state)));
            }
            Family::SM => match goal {
                Goal::OrderedChain { steps } => {
                    let idx = self.chain_sem;
                    let last = idx + 1 == steps.len() && self.holds(&steps[idx], Metric::Semantic, scene, state);
                    terms.push((idx + usize::from(last)) as f64 / steps.len() as f64);
                }
                g => terms.push(flag(self.holds(g, Metric::Semantic, scene, state))),
            },
            Family::CR => match goal {
                Goal::ConstrainedGoal { goal: inner, .. } => {
                    terms.push(flag(constraint_resolved(scene, self.start, inner)));
                    terms.extend(self.distance_term(scene, state));
                    terms.push(flag(self.holds(inner, Metric::Semantic, scene, state)));
                }
                g => terms.push(flag(self.holds(g, Metric::Semantic, scene, state))),
            },
        }
        if terms.is_empty() {
            return 0.0;
        }
        clamp01(terms.iter().sum::<f64>() / terms.len() as f64)
    }
}

/// Distance from the agent to an object; zero while the agent holds it.
pub fn target_distance(scene: &GridScene, state: &AgentState, target: &ObjectId) -> Option<f64> {
    if state.held.as_ref() == Some(target) {
        return Some(0.0);
    }
    scene.object(target)?.position.map(|p| state.pose.position.distance(p))
}

/// Whether a 4-connected walk over passable cells leads from `start` to some
/// cell within interaction range of the goal's target.
pub fn constraint_resolved(scene: &GridScene, start: Cell, goal: &Goal) -> bool {
    let Some(target) = goal.primary_target().and_then(|t| scene.object(t)) else {
        return false;
    };
    let Some(tpos) = target.position else {
        return true;
    };
    reachable_within(scene, start, tpos, INTERACTION_RANGE)
}

/// Breadth-first reachability from `start` to any passable cell within `radius` of `target`.
pub fn reachable_within(scene: &GridScene, start: Cell, target: Cell, radius: f64) -> bool {
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        if c.distance(target) <= radius && (c == start || scene.passable(c)) {
            return true;
        }
        for n in c.neighbors4() {
            if scene.passable(n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    false
}
