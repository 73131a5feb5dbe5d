//! Grid coordinates, headings, pitch, and the discrete line used for sight.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A grid cell. `x` grows east, `y` grows south; one cell is one metre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub const fn offset(self, dx: i32, dy: i32) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    pub fn distance_sq(self, other: Cell) -> i32 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(self, other: Cell) -> f64 {
        f64::from(self.distance_sq(other)).sqrt()
    }

    /// The four orthogonal neighbours in N, E, S, W order.
    pub fn neighbors4(self) -> [Cell; 4] {
        [self.offset(0, -1), self.offset(1, 0), self.offset(0, 1), self.offset(-1, 0)]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Compass heading in degrees; 0 faces north (decreasing `y`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u16", try_from = "u16")]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    pub fn degrees(self) -> u16 {
        match self {
            Heading::North => 0,
            Heading::East => 90,
            Heading::South => 180,
            Heading::West => 270,
        }
    }

    pub fn from_degrees(deg: i64) -> Option<Self> {
        match deg.rem_euclid(360) {
            0 => Some(Heading::North),
            90 => Some(Heading::East),
            180 => Some(Heading::South),
            270 => Some(Heading::West),
            _ => None,
        }
    }

    /// Rotate clockwise by `quarters` quarter turns (negative is counter-clockwise).
    pub fn rotate(self, quarters: i64) -> Self {
        let idx = (self.index() as i64 + quarters).rem_euclid(4) as usize;
        Heading::ALL[idx]
    }

    fn index(self) -> usize {
        match self {
            Heading::North => 0,
            Heading::East => 1,
            Heading::South => 2,
            Heading::West => 3,
        }
    }

    /// Unit vector pointing forward.
    pub fn forward(self) -> (i32, i32) {
        match self {
            Heading::North => (0, -1),
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
        }
    }

    /// Unit vector pointing to the agent's right.
    pub fn right(self) -> (i32, i32) {
        self.rotate(1).forward()
    }

    /// Express a world offset as (forward, lateral) components; lateral is positive to the right.
    pub fn to_agent_frame(self, dx: i32, dy: i32) -> (i32, i32) {
        let (fx, fy) = self.forward();
        let (rx, ry) = self.right();
        (dx * fx + dy * fy, dx * rx + dy * ry)
    }

    /// Inverse of [`Heading::to_agent_frame`].
    pub fn to_world_offset(self, forward: i32, lateral: i32) -> (i32, i32) {
        let (fx, fy) = self.forward();
        let (rx, ry) = self.right();
        (forward * fx + lateral * rx, forward * fy + lateral * ry)
    }
}

impl From<Heading> for u16 {
    fn from(h: Heading) -> u16 {
        h.degrees()
    }
}

impl TryFrom<u16> for Heading {
    type Error = String;

    fn try_from(value: u16) -> Result<Self, Self::Error> {
        match value {
            0 | 90 | 180 | 270 => Ok(Heading::from_degrees(i64::from(value)).expect("enumerated")),
            other => Err(format!("heading must be 0, 90, 180 or 270, got {other}")),
        }
    }
}

/// Camera pitch in degrees: -30 (down), 0 (level), +30 (up).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "i32", try_from = "i32")]
pub enum Pitch {
    Down,
    Level,
    Up,
}

impl Pitch {
    pub const ALL: [Pitch; 3] = [Pitch::Down, Pitch::Level, Pitch::Up];

    pub fn degrees(self) -> i32 {
        match self {
            Pitch::Down => -30,
            Pitch::Level => 0,
            Pitch::Up => 30,
        }
    }

    pub fn from_clamped_degrees(deg: i64) -> Self {
        match deg.clamp(-30, 30) {
            d if d < 0 => Pitch::Down,
            0 => Pitch::Level,
            _ => Pitch::Up,
        }
    }

    /// The elevation band this pitch brings into view.
    pub fn gated_elevation(self) -> Elevation {
        match self {
            Pitch::Down => Elevation::Low,
            Pitch::Level => Elevation::Mid,
            Pitch::Up => Elevation::High,
        }
    }

    pub fn for_elevation(e: Elevation) -> Self {
        match e {
            Elevation::Low => Pitch::Down,
            Elevation::Mid => Pitch::Level,
            Elevation::High => Pitch::Up,
        }
    }
}

impl From<Pitch> for i32 {
    fn from(p: Pitch) -> i32 {
        p.degrees()
    }
}

impl TryFrom<i32> for Pitch {
    type Error = String;

    fn try_from(value: i32) -> Result<Self, Self::Error> {
        match value {
            -30 => Ok(Pitch::Down),
            0 => Ok(Pitch::Level),
            30 => Ok(Pitch::Up),
            other => Err(format!("pitch must be -30, 0 or 30, got {other}")),
        }
    }
}

/// Height band an object occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Elevation {
    Low,
    Mid,
    High,
}

/// Cells on the discrete line from `from` to `to`, both endpoints included.
///
/// Steps one cell at a time along the major axis; the minor-axis offset at
/// major index `i` is `floor((2*i*minor + major) / (2*major))`, i.e. the exact
/// ratio rounded half up. Integer-only, so identical on every platform.
pub fn line_cells(from: Cell, to: Cell) -> LineCells {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let (major, minor) = if dx.abs() >= dy.abs() { (dx.abs(), dy.abs()) } else { (dy.abs(), dx.abs()) };
    LineCells {
        origin: from,
        x_major: dx.abs() >= dy.abs(),
        sx: dx.signum(),
        sy: dy.signum(),
        major,
        minor,
        i: 0,
        minor_offset: 0,
        acc: major,
    }
}

#[derive(Debug, Clone)]
pub struct LineCells {
    origin: Cell,
    x_major: bool,
    sx: i32,
    sy: i32,
    major: i32,
    minor: i32,
    i: i32,
    minor_offset: i32,
    acc: i32,
}

impl Iterator for LineCells {
    type Item = Cell;

    fn next(&mut self) -> Option<Cell> {
        if self.i > self.major {
            return None;
        }
        let cell = if self.x_major {
            self.origin.offset(self.sx * self.i, self.sy * self.minor_offset)
        } else {
            self.origin.offset(self.sx * self.minor_offset, self.sy * self.i)
        };
        self.i += 1;
        self.acc += 2 * self.minor;
        if self.acc >= 2 * self.major && self.major > 0 {
            self.acc -= 2 * self.major;
            self.minor_offset += 1;
        }
        Some(cell)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heading_frame_round_trip() {
        for h in Heading::ALL {
            for dx in -3..=3 {
                for dy in -3..=3 {
                    let (f, l) = h.to_agent_frame(dx, dy);
                    assert_eq!(h.to_world_offset(f, l), (dx, dy));
                }
            }
        }
    }

    #[test]
    fn north_forward_is_negative_y() {
        assert_eq!(Heading::North.to_agent_frame(0, -4), (4, 0));
        assert_eq!(Heading::North.to_agent_frame(1, 0), (0, 1));
        assert_eq!(Heading::East.to_agent_frame(1, 0), (1, 0));
    }

    #[test]
    fn rotation_wraps() {
        assert_eq!(Heading::North.rotate(-1), Heading::West);
        assert_eq!(Heading::West.rotate(1), Heading::North);
        assert_eq!(Heading::East.rotate(6), Heading::West);
    }

    #[test]
    fn line_endpoints_and_length() {
        let cells: Vec<_> = line_cells(Cell::new(0, 0), Cell::new(5, 2)).collect();
        assert_eq!(cells.first(), Some(&Cell::new(0, 0)));
        assert_eq!(cells.last(), Some(&Cell::new(5, 2)));
        assert_eq!(cells.len(), 6);
        let single: Vec<_> = line_cells(Cell::new(3, 3), Cell::new(3, 3)).collect();
        assert_eq!(single, vec![Cell::new(3, 3)]);
    }

    #[test]
    fn pitch_serializes_as_degrees() {
        assert_eq!(serde_json::to_string(&Pitch::Up).unwrap(), "30");
        assert_eq!(serde_json::from_str::<Pitch>("-30").unwrap(), Pitch::Down);
        assert!(serde_json::from_str::<Pitch>("15").is_err());
        assert_eq!(serde_json::to_string(&Heading::West).unwrap(), "270");
    }
}
