use serde::{Deserialize, Serialize};

use crate::contract::ReportStatus;
use crate::world::{GridScene, Intent, ObjectId, SceneObject};

use super::family::Family;

/// Which boolean property an `object_state` goal inspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateProperty {
    Toggled,
    Open,
}

impl StateProperty {
    pub fn read(self, obj: &SceneObject) -> bool {
        match self {
            StateProperty::Toggled => obj.is_toggled,
            StateProperty::Open => obj.is_open,
        }
    }

    /// The intent that drives the property to `value`.
    pub fn intent_for(self, value: bool) -> Intent {
        match (self, value) {
            (StateProperty::Toggled, true) => Intent::Activate,
            (StateProperty::Toggled, false) => Intent::Deactivate,
            (StateProperty::Open, true) => Intent::OpenAccess,
            (StateProperty::Open, false) => Intent::CloseAccess,
        }
    }
}

/// World-state goal predicate. Evaluated under a semantic and a strict
/// parameterization (see [`Tolerance`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Goal {
    TargetGrounded {
        target: ObjectId,
    },
    AgentNearTarget {
        target: ObjectId,
    },
    ObjectVisibleLatched {
        target: ObjectId,
    },
    ReportStatus {
        target: ObjectId,
        expected_label: ReportStatus,
    },
    ObjectState {
        target: ObjectId,
        property: StateProperty,
        value: bool,
    },
    ObjectHeld {
        target: ObjectId,
    },
    ObjectAtReceptacle {
        target: ObjectId,
        receptacle: ObjectId,
    },
    /// `goal` must hold and `obstacle` must no longer sever every path to the goal target.
    ConstrainedGoal {
        obstacle: ObjectId,
        goal: Box<Goal>,
    },
    /// Sub-goals that must be completed in order; earlier ones latch.
    OrderedChain {
        steps: Vec<Goal>,
    },
}

impl Goal {
    /// The object whose distance and visibility drive the progress scalar.
    pub fn primary_target(&self) -> Option<&ObjectId> {
        match self {
            Goal::TargetGrounded { target }
            | Goal::AgentNearTarget { target }
            | Goal::ObjectVisibleLatched { target }
            | Goal::ReportStatus { target, .. }
            | Goal::ObjectState { target, .. }
            | Goal::ObjectHeld { target } => Some(target),
            Goal::ObjectAtReceptacle { receptacle, .. } => Some(receptacle),
            Goal::ConstrainedGoal { goal, .. } => goal.primary_target(),
            Goal::OrderedChain { steps } => steps.first().and_then(Goal::primary_target),
        }
    }

    /// Every object the goal mentions, in first-mention order.
    pub fn referenced_objects(&self) -> Vec<&ObjectId> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a ObjectId>) {
        let mut add = |id: &'a ObjectId| {
            if !out.contains(&id) {
                out.push(id);
            }
        };
        match self {
            Goal::TargetGrounded { target }
            | Goal::AgentNearTarget { target }
            | Goal::ObjectVisibleLatched { target }
            | Goal::ReportStatus { target, .. }
            | Goal::ObjectState { target, .. }
            | Goal::ObjectHeld { target } => add(target),
            Goal::ObjectAtReceptacle { target, receptacle } => {
                add(target);
                add(receptacle);
            }
            Goal::ConstrainedGoal { obstacle, goal } => {
                add(obstacle);
                goal.collect_refs(out);
            }
            Goal::OrderedChain { steps } => {
                for s in steps {
                    s.collect_refs(out);
                }
            }
        }
    }
}

/// Thresholds separating the semantic and strict world metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    /// Semantic near predicate: distance strictly below this.
    pub near_semantic: f64,
    /// Strict near predicate: distance at most this.
    pub near_strict: f64,
    /// Semantic placement also accepts the object within this distance of the receptacle cell.
    pub placement_radius: f64,
    /// Semantic grounding accepts clicks within this Chebyshev distance of the target's rendered cell.
    pub grounding_radius: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { near_semantic: 1.5, near_strict: 1.0, placement_radius: 1.0, grounding_radius: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessSpec {
    pub goal: Goal,
    pub tolerance: Tolerance,
}

impl SuccessSpec {
    pub fn new(goal: Goal) -> Self {
        Self { goal, tolerance: Tolerance::default() }
    }

    /// The categorical label a correct report must carry, for state-verification goals.
    pub fn expected_label(&self) -> Option<ReportStatus> {
        match &self.goal {
            Goal::ReportStatus { expected_label, .. } => Some(*expected_label),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub step_budget: u32,
    pub invalid_limit: u32,
}

/// One frozen task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub episode_id: String,
    pub family: Family,
    /// SM template name; absent for other families.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    pub instruction: String,
    pub scene: GridScene,
    pub success: SuccessSpec,
    pub budget: Budget,
    pub seed: u64,
}

impl EpisodeSpec {
    pub fn target_object(&self) -> Option<&SceneObject> {
        self.success.goal.primary_target().and_then(|id| self.scene.object(id))
    }
}

/// The label a correct state-verification report carries for an object.
pub fn state_label(obj: &SceneObject) -> Option<ReportStatus> {
    if obj.toggleable {
        Some(if obj.is_toggled { ReportStatus::On } else { ReportStatus::Off })
    } else if obj.openable {
        Some(if obj.is_open { ReportStatus::Open } else { ReportStatus::Closed })
    } else {
        None
    }
}
