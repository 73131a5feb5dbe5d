//! Line-of-sight visibility and the egocentric viewport.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::geometry::{line_cells, Cell};
use super::scene::{AgentPose, GridScene, SceneObject};

/// Maximum sight distance in cells, compared on squared distance.
pub const VIEW_RANGE: i32 = 6;
pub const FRAME_COLUMNS: usize = 13;
pub const FRAME_ROWS: usize = 6;
const CENTER_COLUMN: i32 = 6;

/// Whether `target` lies in the forward 90 degree cone within range (no occlusion test).
pub fn in_view_cone(pose: &AgentPose, target: Cell) -> bool {
    let dx = target.x - pose.position.x;
    let dy = target.y - pose.position.y;
    if dx * dx + dy * dy > VIEW_RANGE * VIEW_RANGE {
        return false;
    }
    let (f, l) = pose.heading.to_agent_frame(dx, dy);
    f >= 0 && l.abs() <= f
}

/// No wall or blocking object strictly between `from` and `to` on the discrete line.
pub fn line_of_sight(scene: &GridScene, from: Cell, to: Cell) -> bool {
    line_cells(from, to).filter(|&c| c != from && c != to).all(|c| !scene.occludes(c))
}

pub fn is_visible(scene: &GridScene, pose: &AgentPose, target: Cell) -> bool {
    scene.in_bounds(target) && in_view_cone(pose, target) && line_of_sight(scene, pose.position, target)
}

/// All cells the agent can currently see, its own cell included.
pub fn visible_cells(scene: &GridScene, pose: &AgentPose) -> BTreeSet<Cell> {
    let mut out = BTreeSet::new();
    for dy in -VIEW_RANGE..=VIEW_RANGE {
        for dx in -VIEW_RANGE..=VIEW_RANGE {
            let c = pose.position.offset(dx, dy);
            if is_visible(scene, pose, c) {
                out.insert(c);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisualState {
    On,
    Off,
    Open,
    Closed,
    None,
}

impl VisualState {
    pub fn of(obj: &SceneObject) -> Self {
        if obj.toggleable {
            if obj.is_toggled {
                VisualState::On
            } else {
                VisualState::Off
            }
        } else if obj.openable {
            if obj.is_open {
                VisualState::Open
            } else {
                VisualState::Closed
            }
        } else {
            VisualState::None
        }
    }
}

/// What the agent sees in one viewport cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellReport {
    OutOfView,
    Wall,
    Floor,
    Object { category: String, state: VisualState },
}

/// Egocentric observation: 6 depth rows (far to near) by 13 lateral columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub role: String,
    pub rows: Vec<Vec<CellReport>>,
}

impl Frame {
    pub fn cell(&self, column: usize, row: usize) -> Option<&CellReport> {
        self.rows.get(row).and_then(|r| r.get(column))
    }

    /// Iterate `(column, row, report)` over every viewport cell.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &CellReport)> {
        self.rows.iter().enumerate().flat_map(|(r, row)| row.iter().enumerate().map(move |(c, rep)| (c, r, rep)))
    }
}

/// A viewport position (column, row).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameCell {
    pub column: usize,
    pub row: usize,
}

/// The world cell shown at a viewport position, if that position is inside the projection wedge.
pub fn frame_cell_to_world(pose: &AgentPose, fc: FrameCell) -> Option<Cell> {
    if fc.column >= FRAME_COLUMNS || fc.row >= FRAME_ROWS {
        return None;
    }
    let depth = VIEW_RANGE - fc.row as i32;
    let lateral = fc.column as i32 - CENTER_COLUMN;
    if lateral.abs() > depth {
        return None;
    }
    let (dx, dy) = pose.heading.to_world_offset(depth, lateral);
    Some(pose.position.offset(dx, dy))
}

/// Inverse projection: where a world cell would appear in the viewport.
pub fn world_to_frame_cell(pose: &AgentPose, c: Cell) -> Option<FrameCell> {
    let (depth, lateral) = pose.heading.to_agent_frame(c.x - pose.position.x, c.y - pose.position.y);
    if !(1..=VIEW_RANGE).contains(&depth) || lateral.abs() > depth {
        return None;
    }
    Some(FrameCell { column: (lateral + CENTER_COLUMN) as usize, row: (VIEW_RANGE - depth) as usize })
}

/// The object drawn at a visible cell under the current pitch gate.
///
/// Objects inside closed containers are skipped. When a container and its
/// contents are both drawable, the contents win; remaining ties go to the
/// lowest object id.
pub fn drawn_object_at<'a>(scene: &'a GridScene, pose: &AgentPose, c: Cell) -> Option<&'a SceneObject> {
    let band = pose.pitch.gated_elevation();
    scene.objects_at(c).filter(|o| o.elevation == band && !scene.is_enclosed(o)).min_by(|a, b| {
        b.contained_in.is_some().cmp(&a.contained_in.is_some()).then_with(|| a.object_id.cmp(&b.object_id))
    })
}

/// The object the agent would target by clicking a viewport position.
pub fn object_at_frame_cell<'a>(scene: &'a GridScene, pose: &AgentPose, fc: FrameCell) -> Option<&'a SceneObject> {
    let c = frame_cell_to_world(pose, fc)?;
    if !is_visible(scene, pose, c) {
        return None;
    }
    drawn_object_at(scene, pose, c)
}

/// Where an object is currently drawn in the viewport, if anywhere.
pub fn rendered_frame_cell(scene: &GridScene, pose: &AgentPose, obj: &SceneObject) -> Option<FrameCell> {
    let pos = obj.position?;
    let fc = world_to_frame_cell(pose, pos)?;
    let drawn = object_at_frame_cell(scene, pose, fc)?;
    (drawn.object_id == obj.object_id).then_some(fc)
}

pub fn render_frame(scene: &GridScene, pose: &AgentPose) -> Frame {
    let mut rows = Vec::with_capacity(FRAME_ROWS);
    for row in 0..FRAME_ROWS {
        let mut cells = Vec::with_capacity(FRAME_COLUMNS);
        for column in 0..FRAME_COLUMNS {
            let report = match frame_cell_to_world(pose, FrameCell { column, row }) {
                Some(c) if is_visible(scene, pose, c) => {
                    if scene.is_wall(c) {
                        CellReport::Wall
                    } else if let Some(o) = drawn_object_at(scene, pose, c) {
                        CellReport::Object { category: o.category.clone(), state: VisualState::of(o) }
                    } else {
                        CellReport::Floor
                    }
                }
                _ => CellReport::OutOfView,
            };
            cells.push(report);
        }
        rows.push(cells);
    }
    Frame { role: "current".into(), rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::geometry::{Elevation, Heading, Pitch};
    use crate::world::scene::Layout;

    fn room(w: i32, h: i32) -> GridScene {
        GridScene {
            scene_id: "t".into(),
            layout: Layout::walled_room(w, h),
            objects: vec![],
            agent_start: AgentPose::new(Cell::new(5, 5), Heading::North),
        }
    }

    #[test]
    fn on_axis_cell_visible_in_empty_room() {
        let s = room(11, 11);
        let pose = AgentPose::new(Cell::new(5, 5), Heading::North);
        let vis = visible_cells(&s, &pose);
        assert!(vis.contains(&Cell::new(5, 1)));
        assert!(vis.contains(&Cell::new(5, 5)));
        assert!(!vis.contains(&Cell::new(5, 6)));
    }

    #[test]
    fn wall_on_ray_occludes() {
        let mut s = room(11, 11);
        s.layout.set_wall(Cell::new(5, 3), true);
        let pose = AgentPose::new(Cell::new(5, 5), Heading::North);
        let vis = visible_cells(&s, &pose);
        assert!(!vis.contains(&Cell::new(5, 1)));
        // the occluder itself is seen
        assert!(vis.contains(&Cell::new(5, 3)));
    }

    #[test]
    fn projection_places_object_two_ahead_at_row_four() {
        let mut s = room(11, 11);
        s.objects.push(SceneObject::new("o", "mug", Cell::new(5, 3)));
        let pose = AgentPose::new(Cell::new(5, 5), Heading::North);
        let frame = render_frame(&s, &pose);
        assert_eq!(frame.cell(6, 4), Some(&CellReport::Object { category: "mug".into(), state: VisualState::None }));
        let up = AgentPose { pitch: Pitch::Up, ..pose };
        assert_eq!(render_frame(&s, &up).cell(6, 4), Some(&CellReport::Floor));
    }

    #[test]
    fn toggled_lamp_reports_on() {
        let mut s = room(11, 11);
        let mut lamp = SceneObject::new("l", "lamp", Cell::new(6, 3));
        lamp.toggleable = true;
        lamp.is_toggled = true;
        lamp.elevation = Elevation::High;
        s.objects.push(lamp);
        let pose = AgentPose { position: Cell::new(5, 5), heading: Heading::North, pitch: Pitch::Up };
        let frame = render_frame(&s, &pose);
        assert_eq!(frame.cell(7, 4), Some(&CellReport::Object { category: "lamp".into(), state: VisualState::On }));
    }

    #[test]
    fn contents_shown_only_when_container_open() {
        let mut s = room(11, 11);
        let mut fridge = SceneObject::new("c", "fridge", Cell::new(5, 4));
        fridge.openable = true;
        fridge.receptacle = true;
        fridge.blocking = true;
        let mut egg = SceneObject::new("e", "egg", Cell::new(5, 4));
        egg.pickable = true;
        egg.contained_in = Some(fridge.object_id.clone());
        s.objects = vec![fridge, egg];
        let pose = AgentPose::new(Cell::new(5, 5), Heading::North);
        let closed = render_frame(&s, &pose);
        assert!(matches!(closed.cell(6, 5), Some(CellReport::Object { category, .. }) if category == "fridge"));
        s.objects[0].is_open = true;
        let open = render_frame(&s, &pose);
        assert!(matches!(open.cell(6, 5), Some(CellReport::Object { category, .. }) if category == "egg"));
    }

    #[test]
    fn frame_projection_round_trip() {
        for h in Heading::ALL {
            let pose = AgentPose::new(Cell::new(10, 10), h);
            for row in 0..FRAME_ROWS {
                for column in 0..FRAME_COLUMNS {
                    let fc = FrameCell { column, row };
                    if let Some(c) = frame_cell_to_world(&pose, fc) {
                        assert_eq!(world_to_frame_cell(&pose, c), Some(fc));
                    }
                }
            }
        }
    }

    #[test]
    fn frame_never_mentions_ids_or_coordinates() {
        let mut s = room(11, 11);
        s.objects.push(SceneObject::new("secret-id-42", "mug", Cell::new(5, 3)));
        let pose = AgentPose::new(Cell::new(5, 5), Heading::North);
        let json = serde_json::to_string(&render_frame(&s, &pose)).unwrap();
        assert!(!json.contains("secret-id-42"));
        assert!(!json.contains("\"x\""));
        assert!(!json.contains("position"));
    }
}
