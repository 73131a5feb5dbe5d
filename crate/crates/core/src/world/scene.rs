//! Hidden world state: layout, objects, and the agent.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::geometry::{Cell, Elevation, Heading, Pitch};
use super::WorldError;

/// Evaluator-side object identity. Never shown to the agent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub String);

impl ObjectId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Floor,
    Wall,
}

/// Row-major wall/floor layout, serialized as one string per row (`#` wall, `.` floor).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    width: i32,
    height: i32,
    walls: Vec<bool>,
}

impl Layout {
    /// A room of the given size whose border cells are walls.
    pub fn walled_room(width: i32, height: i32) -> Self {
        let mut walls = vec![false; (width * height) as usize];
        for y in 0..height {
            for x in 0..width {
                if x == 0 || y == 0 || x == width - 1 || y == height - 1 {
                    walls[(y * width + x) as usize] = true;
                }
            }
        }
        Self { width, height, walls }
    }

    pub fn from_rows(rows: &[&str]) -> Result<Self, WorldError> {
        let height = rows.len() as i32;
        let width = rows.first().map_or(0, |r| r.chars().count()) as i32;
        if width == 0 || height == 0 {
            return Err(WorldError::InvalidScene("empty layout".into()));
        }
        let mut walls = Vec::with_capacity((width * height) as usize);
        for row in rows {
            if row.chars().count() as i32 != width {
                return Err(WorldError::InvalidScene("ragged layout rows".into()));
            }
            for ch in row.chars() {
                match ch {
                    '#' => walls.push(true),
                    '.' => walls.push(false),
                    other => return Err(WorldError::InvalidScene(format!("unknown layout glyph {other:?}"))),
                }
            }
        }
        Ok(Self { width, height, walls })
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    pub fn kind(&self, c: Cell) -> Option<CellKind> {
        if !self.in_bounds(c) {
            return None;
        }
        Some(if self.walls[(c.y * self.width + c.x) as usize] { CellKind::Wall } else { CellKind::Floor })
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        self.kind(c) == Some(CellKind::Wall)
    }

    pub fn set_wall(&mut self, c: Cell, wall: bool) {
        if self.in_bounds(c) {
            self.walls[(c.y * self.width + c.x) as usize] = wall;
        }
    }

    fn rows(&self) -> Vec<String> {
        (0..self.height)
            .map(|y| {
                (0..self.width).map(|x| if self.walls[(y * self.width + x) as usize] { '#' } else { '.' }).collect()
            })
            .collect()
    }
}

impl Serialize for Layout {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Layout {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<String>::deserialize(deserializer)?;
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        Layout::from_rows(&refs).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub object_id: ObjectId,
    pub category: String,
    /// `None` while the object is held by the agent.
    pub position: Option<Cell>,
    pub elevation: Elevation,
    pub toggleable: bool,
    pub is_toggled: bool,
    pub openable: bool,
    pub is_open: bool,
    pub pickable: bool,
    pub receptacle: bool,
    /// Occludes sight and blocks movement.
    pub blocking: bool,
    pub contained_in: Option<ObjectId>,
}

impl SceneObject {
    /// A plain, inert object at `position`; callers flip capability flags as needed.
    pub fn new(id: impl Into<String>, category: impl Into<String>, position: Cell) -> Self {
        Self {
            object_id: ObjectId::new(id),
            category: category.into(),
            position: Some(position),
            elevation: Elevation::Mid,
            toggleable: false,
            is_toggled: false,
            openable: false,
            is_open: false,
            pickable: false,
            receptacle: false,
            blocking: false,
            contained_in: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentPose {
    pub position: Cell,
    pub heading: Heading,
    pub pitch: Pitch,
}

impl AgentPose {
    pub fn new(position: Cell, heading: Heading) -> Self {
        Self { position, heading, pitch: Pitch::Level }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentState {
    pub pose: AgentPose,
    pub held: Option<ObjectId>,
}

impl AgentState {
    pub fn at(pose: AgentPose) -> Self {
        Self { pose, held: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridScene {
    pub scene_id: String,
    pub layout: Layout,
    pub objects: Vec<SceneObject>,
    pub agent_start: AgentPose,
}

impl GridScene {
    pub fn width(&self) -> i32 {
        self.layout.width()
    }

    pub fn height(&self) -> i32 {
        self.layout.height()
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        self.layout.in_bounds(c)
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        self.layout.is_wall(c)
    }

    pub fn object(&self, id: &ObjectId) -> Option<&SceneObject> {
        self.objects.iter().find(|o| &o.object_id == id)
    }

    pub fn object_mut(&mut self, id: &ObjectId) -> Option<&mut SceneObject> {
        self.objects.iter_mut().find(|o| &o.object_id == id)
    }

    pub fn objects_at(&self, c: Cell) -> impl Iterator<Item = &SceneObject> {
        self.objects.iter().filter(move |o| o.position == Some(c))
    }

    pub fn has_blocking_object(&self, c: Cell) -> bool {
        self.objects_at(c).any(|o| o.blocking)
    }

    /// True for cells that stop sight lines (walls and blocking objects).
    pub fn occludes(&self, c: Cell) -> bool {
        self.is_wall(c) || self.has_blocking_object(c)
    }

    /// True for cells the agent may stand on.
    pub fn passable(&self, c: Cell) -> bool {
        self.layout.kind(c) == Some(CellKind::Floor) && !self.has_blocking_object(c)
    }

    /// Whether an object is hidden inside a closed container.
    pub fn is_enclosed(&self, obj: &SceneObject) -> bool {
        obj.contained_in.as_ref().and_then(|cid| self.object(cid)).is_some_and(|c| !c.is_open)
    }

    /// Checks the structural invariants a scene must satisfy.
    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |msg: String| Err(WorldError::InvalidScene(msg));
        let mut ids = BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(&o.object_id) {
                return bad(format!("duplicate object id {}", o.object_id));
            }
            if o.is_toggled && !o.toggleable {
                return bad(format!("{} is toggled but not toggleable", o.object_id));
            }
            if o.is_open && !o.openable {
                return bad(format!("{} is open but not openable", o.object_id));
            }
            if let Some(p) = o.position {
                if self.layout.kind(p) != Some(CellKind::Floor) {
                    return bad(format!("{} is not on a floor cell", o.object_id));
                }
            }
            if let Some(cid) = &o.contained_in {
                let Some(container) = self.object(cid) else {
                    return bad(format!("{} is contained in unknown {cid}", o.object_id));
                };
                if !(container.openable && container.receptacle) {
                    return bad(format!("{cid} is not an openable receptacle"));
                }
                if container.position != o.position {
                    return bad(format!("{} does not share its container's cell", o.object_id));
                }
                if o.blocking {
                    return bad(format!("contained {} must not block", o.object_id));
                }
            }
        }
        let mut blocking_cells = BTreeSet::new();
        for o in self.objects.iter().filter(|o| o.blocking) {
            if let Some(p) = o.position {
                if !blocking_cells.insert(p) {
                    return bad(format!("two blocking objects share cell {p}"));
                }
            }
        }
        let start = self.agent_start.position;
        if !self.passable(start) {
            return bad(format!("agent start {start} is not a free floor cell"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> GridScene {
        GridScene {
            scene_id: "t".into(),
            layout: Layout::walled_room(7, 7),
            objects: vec![],
            agent_start: AgentPose::new(Cell::new(3, 3), Heading::North),
        }
    }

    #[test]
    fn layout_round_trips_through_rows() {
        let mut layout = Layout::walled_room(5, 4);
        layout.set_wall(Cell::new(2, 2), true);
        let json = serde_json::to_string(&layout).unwrap();
        assert_eq!(json, "[\"#####\",\"#...#\",\"#.#.#\",\"#####\"]");
        let back: Layout = serde_json::from_str(&json).unwrap();
        assert_eq!(back, layout);
    }

    #[test]
    fn rejects_start_on_blocking_object() {
        let mut s = scene();
        let mut crate_obj = SceneObject::new("o1", "crate", Cell::new(3, 3));
        crate_obj.blocking = true;
        s.objects.push(crate_obj);
        assert!(s.validate().is_err());
    }

    #[test]
    fn rejects_object_in_wall_and_double_blockers() {
        let mut s = scene();
        s.objects.push(SceneObject::new("o1", "lamp", Cell::new(0, 0)));
        assert!(s.validate().is_err());

        let mut s = scene();
        for id in ["a", "b"] {
            let mut o = SceneObject::new(id, "sofa", Cell::new(1, 1));
            o.blocking = true;
            s.objects.push(o);
        }
        assert!(s.validate().is_err());
    }

    #[test]
    fn containment_rules() {
        let mut s = scene();
        let mut fridge = SceneObject::new("c", "fridge", Cell::new(1, 1));
        fridge.openable = true;
        fridge.receptacle = true;
        fridge.blocking = true;
        let mut egg = SceneObject::new("e", "egg", Cell::new(1, 1));
        egg.pickable = true;
        egg.contained_in = Some(ObjectId::new("c"));
        s.objects = vec![fridge, egg];
        s.validate().unwrap();
        assert!(s.is_enclosed(&s.objects[1]));

        s.objects[1].position = Some(Cell::new(2, 1));
        assert!(s.validate().is_err());
    }
}
