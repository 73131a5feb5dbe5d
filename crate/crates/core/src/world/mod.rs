//! Deterministic egocentric gridworld.
//!
//! One cell is one metre. The agent sees a 13x6 symbolic viewport of the
//! cells in its forward 90 degree cone within 6 cells, subject to line of
//! sight; pitch selects which elevation band of objects is drawn.

mod geometry;
mod physics;
mod scene;
mod view;

use thiserror::Error;

pub use geometry::{line_cells, Cell, Elevation, Heading, LineCells, Pitch};
pub use physics::{
    apply_interact, apply_look, apply_navigate, click_to_frame_cell, frame_cell_center, FeedbackEvent, GroundingClick,
    Intent, InteractOutcome, InteractResult, LookDirection, NavigateMode, COORD_MAX, INTERACTION_RANGE,
};
pub use scene::{AgentPose, AgentState, CellKind, GridScene, Layout, ObjectId, SceneObject};
pub use view::{
    drawn_object_at, frame_cell_to_world, in_view_cone, is_visible, line_of_sight, object_at_frame_cell, render_frame,
    rendered_frame_cell, visible_cells, world_to_frame_cell, CellReport, Frame, FrameCell, VisualState, FRAME_COLUMNS,
    FRAME_ROWS, VIEW_RANGE,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("magnitude must be a positive finite number, got {0}")]
    BadMagnitude(f64),
    #[error("intent {0:?} requires coordinates")]
    MissingCoordinates(Intent),
    #[error("coordinates ({0}, {1}) outside [0, 1000]")]
    CoordinatesOutOfRange(u32, u32),
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
}
