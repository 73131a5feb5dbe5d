//! State transitions for the three non-terminal skills.

use serde::{Deserialize, Serialize};

use super::geometry::{Cell, Elevation, Pitch};
use super::scene::{AgentState, GridScene, ObjectId};
use super::view::{object_at_frame_cell, FrameCell, FRAME_COLUMNS, FRAME_ROWS};
use super::WorldError;

/// Interaction reach in cells (inclusive).
pub const INTERACTION_RANGE: f64 = 1.5;
/// Upper bound of normalized click coordinates.
pub const COORD_MAX: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NavigateMode {
    Forward,
    Backward,
    TurnLeft,
    TurnRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LookDirection {
    Up,
    Down,
}

/// The eight canonical interaction intents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    Ground,
    OpenAccess,
    CloseAccess,
    Activate,
    Deactivate,
    Pick,
    Place,
    Drop,
}

impl Intent {
    pub const ALL: [Intent; 8] = [
        Intent::Ground,
        Intent::OpenAccess,
        Intent::CloseAccess,
        Intent::Activate,
        Intent::Deactivate,
        Intent::Pick,
        Intent::Place,
        Intent::Drop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Intent::Ground => "ground",
            Intent::OpenAccess => "open_access",
            Intent::CloseAccess => "close_access",
            Intent::Activate => "activate",
            Intent::Deactivate => "deactivate",
            Intent::Pick => "pick",
            Intent::Place => "place",
            Intent::Drop => "drop",
        }
    }

    pub fn needs_coordinates(self) -> bool {
        self != Intent::Drop
    }
}

/// Execution-outcome signals for the preceding action.
///
/// Always computed and logged; only forwarded to the agent when the feedback
/// intervention is enabled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub too_far: bool,
    pub path_blocked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractOutcome {
    Applied,
    NoTarget,
    TooFar,
    Incompatible,
}

/// Evaluator-side record of a grounding click.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroundingClick {
    pub cell: FrameCell,
    pub object_id: Option<ObjectId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractResult {
    pub outcome: InteractOutcome,
    pub feedback: FeedbackEvent,
    pub grounding: Option<GroundingClick>,
}

/// Map normalized coordinates to a viewport cell.
pub fn click_to_frame_cell(x: u32, y: u32) -> FrameCell {
    let column = ((x as usize * FRAME_COLUMNS) / COORD_MAX as usize).min(FRAME_COLUMNS - 1);
    let row = ((y as usize * FRAME_ROWS) / COORD_MAX as usize).min(FRAME_ROWS - 1);
    FrameCell { column, row }
}

/// Normalized coordinates at the centre of a viewport cell.
pub fn frame_cell_center(fc: FrameCell) -> (u32, u32) {
    let x = (2 * fc.column as u32 + 1) * COORD_MAX / (2 * FRAME_COLUMNS as u32);
    let y = (2 * fc.row as u32 + 1) * COORD_MAX / (2 * FRAME_ROWS as u32);
    (x, y)
}

fn positive_magnitude(magnitude: f64) -> Result<f64, WorldError> {
    if magnitude.is_finite() && magnitude > 0.0 {
        Ok(magnitude)
    } else {
        Err(WorldError::BadMagnitude(magnitude))
    }
}

/// Nearest positive multiple of `unit`, expressed in units.
fn quantize(magnitude: f64, unit: f64) -> i64 {
    let k = (magnitude / unit).round().max(1.0);
    // only the residue matters for headings, and pitch saturates after two steps
    if k > 1e6 {
        1_000_000 + (k % 4.0) as i64
    } else {
        k as i64
    }
}

pub fn apply_navigate(
    scene: &GridScene,
    state: &AgentState,
    mode: NavigateMode,
    magnitude: f64,
) -> Result<(AgentState, FeedbackEvent), WorldError> {
    let magnitude = positive_magnitude(magnitude)?;
    let mut next = state.clone();
    let mut feedback = FeedbackEvent::default();
    match mode {
        NavigateMode::TurnLeft => {
            next.pose.heading = state.pose.heading.rotate(-quantize(magnitude, 90.0));
        }
        NavigateMode::TurnRight => {
            next.pose.heading = state.pose.heading.rotate(quantize(magnitude, 90.0));
        }
        NavigateMode::Forward | NavigateMode::Backward => {
            let (fx, fy) = state.pose.heading.forward();
            let sign = if mode == NavigateMode::Forward { 1 } else { -1 };
            let steps = magnitude.floor();
            let mut moved = 0.0;
            while moved < steps {
                let candidate = next.pose.position.offset(sign * fx, sign * fy);
                if !scene.passable(candidate) {
                    feedback.path_blocked = true;
                    break;
                }
                next.pose.position = candidate;
                moved += 1.0;
            }
        }
    }
    Ok((next, feedback))
}

pub fn apply_look(state: &AgentState, direction: LookDirection, magnitude: f64) -> Result<AgentState, WorldError> {
    let magnitude = positive_magnitude(magnitude)?;
    let k = quantize(magnitude, 30.0).min(3);
    let delta = match direction {
        LookDirection::Up => 30 * k,
        LookDirection::Down => -30 * k,
    };
    let mut next = state.clone();
    next.pose.pitch = Pitch::from_clamped_degrees(i64::from(state.pose.pitch.degrees()) + delta);
    Ok(next)
}

/// Apply an interaction. `coords` are normalized `[0, 1000]` viewport coordinates.
pub fn apply_interact(
    scene: &mut GridScene,
    state: &mut AgentState,
    intent: Intent,
    coords: Option<(u32, u32)>,
) -> Result<InteractResult, WorldError> {
    let result = |outcome, feedback, grounding| Ok(InteractResult { outcome, feedback, grounding });

    if intent == Intent::Drop {
        return drop_held(scene, state);
    }
    let (x, y) = coords.ok_or(WorldError::MissingCoordinates(intent))?;
    if x > COORD_MAX || y > COORD_MAX {
        return Err(WorldError::CoordinatesOutOfRange(x, y));
    }
    let fc = click_to_frame_cell(x, y);
    let pose = state.pose;
    let target = object_at_frame_cell(scene, &pose, fc).map(|o| (o.object_id.clone(), o.position));

    if intent == Intent::Ground {
        let grounding = GroundingClick { cell: fc, object_id: target.as_ref().map(|t| t.0.clone()) };
        let outcome = if target.is_some() { InteractOutcome::Applied } else { InteractOutcome::NoTarget };
        return result(outcome, FeedbackEvent::default(), Some(grounding));
    }

    let Some((target_id, Some(target_pos))) = target else {
        return result(InteractOutcome::NoTarget, FeedbackEvent::default(), None);
    };
    if pose.position.distance(target_pos) > INTERACTION_RANGE {
        let feedback = FeedbackEvent { too_far: true, path_blocked: false };
        return result(InteractOutcome::TooFar, feedback, None);
    }

    let outcome = {
        let held = state.held.clone();
        let obj = scene.object(&target_id).expect("target resolved from scene");
        match intent {
            Intent::OpenAccess | Intent::CloseAccess if obj.openable => {
                let open = intent == Intent::OpenAccess;
                scene.object_mut(&target_id).expect("present").is_open = open;
                InteractOutcome::Applied
            }
            Intent::Activate | Intent::Deactivate if obj.toggleable => {
                let on = intent == Intent::Activate;
                scene.object_mut(&target_id).expect("present").is_toggled = on;
                InteractOutcome::Applied
            }
            Intent::Pick if obj.pickable && held.is_none() => {
                let o = scene.object_mut(&target_id).expect("present");
                o.position = None;
                o.contained_in = None;
                state.held = Some(target_id.clone());
                InteractOutcome::Applied
            }
            Intent::Place if obj.receptacle && (obj.is_open || !obj.openable) => match held {
                Some(held_id) if held_id != target_id => {
                    let elevation = obj.elevation;
                    let o = scene.object_mut(&held_id).ok_or_else(|| WorldError::UnknownObject(held_id.clone()))?;
                    if o.blocking {
                        InteractOutcome::Incompatible
                    } else {
                        o.position = Some(target_pos);
                        o.contained_in = Some(target_id.clone());
                        o.elevation = elevation;
                        state.held = None;
                        InteractOutcome::Applied
                    }
                }
                _ => InteractOutcome::Incompatible,
            },
            _ => InteractOutcome::Incompatible,
        }
    };
    result(outcome, FeedbackEvent::default(), None)
}

fn drop_held(scene: &mut GridScene, state: &mut AgentState) -> Result<InteractResult, WorldError> {
    let incompatible = Ok(InteractResult {
        outcome: InteractOutcome::Incompatible,
        feedback: FeedbackEvent::default(),
        grounding: None,
    });
    let Some(held_id) = state.held.clone() else {
        return incompatible;
    };
    let blocking = scene.object(&held_id).ok_or_else(|| WorldError::UnknownObject(held_id.clone()))?.blocking;
    let (fx, fy) = state.pose.heading.forward();
    let ahead = state.pose.position.offset(fx, fy);
    let ahead_free = scene.passable(ahead) && scene.objects_at(ahead).next().is_none();
    let spot: Cell = if ahead_free {
        ahead
    } else if !blocking {
        state.pose.position
    } else {
        // a blocker cannot share the agent's cell
        return incompatible;
    };
    let o = scene.object_mut(&held_id).expect("checked above");
    o.position = Some(spot);
    o.contained_in = None;
    o.elevation = Elevation::Low;
    state.held = None;
    Ok(InteractResult { outcome: InteractOutcome::Applied, feedback: FeedbackEvent::default(), grounding: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::geometry::Heading;
    use crate::world::scene::{AgentPose, Layout, SceneObject};
    use crate::world::view::world_to_frame_cell;

    fn room() -> GridScene {
        GridScene {
            scene_id: "t".into(),
            layout: Layout::walled_room(11, 11),
            objects: vec![],
            agent_start: AgentPose::new(Cell::new(5, 8), Heading::North),
        }
    }

    fn agent(x: i32, y: i32, h: Heading) -> AgentState {
        AgentState::at(AgentPose::new(Cell::new(x, y), h))
    }

    #[test]
    fn forward_clear_path() {
        let s = room();
        let (next, fb) = apply_navigate(&s, &agent(5, 8, Heading::North), NavigateMode::Forward, 3.0).unwrap();
        assert_eq!(next.pose.position, Cell::new(5, 5));
        assert!(!fb.path_blocked);
    }

    #[test]
    fn forward_stops_at_wall() {
        let mut s = room();
        s.layout.set_wall(Cell::new(5, 6), true);
        let (next, fb) = apply_navigate(&s, &agent(5, 8, Heading::North), NavigateMode::Forward, 3.0).unwrap();
        assert_eq!(next.pose.position, Cell::new(5, 7));
        assert!(fb.path_blocked);
    }

    #[test]
    fn turns_quantize_to_quarter_turns() {
        let s = room();
        let a = agent(5, 8, Heading::North);
        let (n, _) = apply_navigate(&s, &a, NavigateMode::TurnLeft, 100.0).unwrap();
        assert_eq!(n.pose.heading, Heading::West);
        let (n, _) = apply_navigate(&s, &a, NavigateMode::TurnRight, 10.0).unwrap();
        assert_eq!(n.pose.heading, Heading::East);
        let (n, _) = apply_navigate(&s, &a, NavigateMode::TurnRight, 180.0).unwrap();
        assert_eq!(n.pose.heading, Heading::South);
        assert!(apply_navigate(&s, &a, NavigateMode::Forward, 0.0).is_err());
        assert!(apply_navigate(&s, &a, NavigateMode::Forward, f64::NAN).is_err());
    }

    #[test]
    fn look_quantizes_and_clamps() {
        let a = agent(5, 5, Heading::North);
        let up = apply_look(&a, LookDirection::Up, 30.0).unwrap();
        assert_eq!(up.pose.pitch, Pitch::Up);
        assert_eq!(apply_look(&up, LookDirection::Up, 30.0).unwrap().pose.pitch, Pitch::Up);
        assert_eq!(apply_look(&a, LookDirection::Down, 45.0).unwrap().pose.pitch, Pitch::Down);
        assert!(apply_look(&a, LookDirection::Down, -1.0).is_err());
    }

    #[test]
    fn click_mapping() {
        assert_eq!(click_to_frame_cell(500, 900), FrameCell { column: 6, row: 5 });
        assert_eq!(click_to_frame_cell(1000, 1000), FrameCell { column: 12, row: 5 });
        assert_eq!(click_to_frame_cell(0, 0), FrameCell { column: 0, row: 0 });
        for column in 0..FRAME_COLUMNS {
            for row in 0..FRAME_ROWS {
                let fc = FrameCell { column, row };
                let (x, y) = frame_cell_center(fc);
                assert_eq!(click_to_frame_cell(x, y), fc);
            }
        }
    }

    fn click_on(state: &AgentState, c: Cell) -> (u32, u32) {
        frame_cell_center(world_to_frame_cell(&state.pose, c).unwrap())
    }

    #[test]
    fn pick_diagonal_neighbor_within_reach() {
        let mut s = room();
        let mut mug = SceneObject::new("m", "mug", Cell::new(6, 4));
        mug.pickable = true;
        s.objects.push(mug);
        let mut a = agent(5, 5, Heading::North);
        let xy = click_on(&a, Cell::new(6, 4));
        let r = apply_interact(&mut s, &mut a, Intent::Pick, Some(xy)).unwrap();
        assert_eq!(r.outcome, InteractOutcome::Applied);
        assert_eq!(a.held, Some(ObjectId::new("m")));
        assert_eq!(s.objects[0].position, None);
    }

    #[test]
    fn activate_too_far_leaves_lamp_alone() {
        let mut s = room();
        let mut lamp = SceneObject::new("l", "lamp", Cell::new(5, 3));
        lamp.toggleable = true;
        s.objects.push(lamp);
        let mut a = agent(5, 5, Heading::North);
        let xy = click_on(&a, Cell::new(5, 3));
        let r = apply_interact(&mut s, &mut a, Intent::Activate, Some(xy)).unwrap();
        assert_eq!(r.outcome, InteractOutcome::TooFar);
        assert!(r.feedback.too_far);
        assert!(!s.objects[0].is_toggled);
    }

    #[test]
    fn ground_changes_nothing_and_ignores_distance() {
        let mut s = room();
        s.objects.push(SceneObject::new("tv", "television", Cell::new(5, 1)));
        let mut a = agent(5, 5, Heading::North);
        let before = (s.clone(), a.clone());
        let xy = click_on(&a, Cell::new(5, 1));
        let r = apply_interact(&mut s, &mut a, Intent::Ground, Some(xy)).unwrap();
        assert_eq!(r.outcome, InteractOutcome::Applied);
        assert_eq!(r.grounding.unwrap().object_id, Some(ObjectId::new("tv")));
        assert_eq!((s, a), before);
    }

    #[test]
    fn capability_mismatch_is_incompatible() {
        let mut s = room();
        s.objects.push(SceneObject::new("b", "book", Cell::new(5, 4)));
        let mut a = agent(5, 5, Heading::North);
        let xy = click_on(&a, Cell::new(5, 4));
        let r = apply_interact(&mut s, &mut a, Intent::Activate, Some(xy)).unwrap();
        assert_eq!(r.outcome, InteractOutcome::Incompatible);
        let r = apply_interact(&mut s, &mut a, Intent::Pick, Some((0, 0))).unwrap();
        assert_eq!(r.outcome, InteractOutcome::NoTarget);
        assert!(apply_interact(&mut s, &mut a, Intent::Pick, None).is_err());
    }

    #[test]
    fn place_and_drop() {
        let mut s = room();
        let mut mug = SceneObject::new("m", "mug", Cell::new(5, 4));
        mug.pickable = true;
        let mut cab = SceneObject::new("c", "cabinet", Cell::new(4, 4));
        cab.openable = true;
        cab.receptacle = true;
        cab.blocking = true;
        s.objects = vec![mug, cab];
        let mut a = agent(5, 5, Heading::North);
        let mug_xy = click_on(&a, Cell::new(5, 4));
        let cab_xy = click_on(&a, Cell::new(4, 4));
        apply_interact(&mut s, &mut a, Intent::Pick, Some(mug_xy)).unwrap();
        // closed cabinet refuses
        let r = apply_interact(&mut s, &mut a, Intent::Place, Some(cab_xy)).unwrap();
        assert_eq!(r.outcome, InteractOutcome::Incompatible);
        apply_interact(&mut s, &mut a, Intent::OpenAccess, Some(cab_xy)).unwrap();
        let r = apply_interact(&mut s, &mut a, Intent::Place, Some(cab_xy)).unwrap();
        assert_eq!(r.outcome, InteractOutcome::Applied);
        assert_eq!(s.objects[0].contained_in, Some(ObjectId::new("c")));
        assert_eq!(s.objects[0].position, Some(Cell::new(4, 4)));
        assert!(a.held.is_none());
        s.validate().unwrap();

        let r = apply_interact(&mut s, &mut a, Intent::Drop, None).unwrap();
        assert_eq!(r.outcome, InteractOutcome::Incompatible);
        // contained object is drawn over the open cabinet
        apply_interact(&mut s, &mut a, Intent::Pick, Some(cab_xy)).unwrap();
        assert_eq!(a.held, Some(ObjectId::new("m")));
        apply_interact(&mut s, &mut a, Intent::Drop, None).unwrap();
        assert_eq!(s.objects[0].position, Some(Cell::new(5, 4)));
    }
}
