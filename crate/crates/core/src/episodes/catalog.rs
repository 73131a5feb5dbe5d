//! Object categories and their capability flags.

use crate::world::{Cell, Elevation, SceneObject};

#[derive(Debug, Clone, Copy)]
pub struct Kind {
    pub category: &'static str,
    pub blocking: bool,
    pub pickable: bool,
    pub toggleable: bool,
    pub openable: bool,
}

const fn kind(category: &'static str, blocking: bool, pickable: bool, toggleable: bool, openable: bool) -> Kind {
    Kind { category, blocking, pickable, toggleable, openable }
}

pub const TOGGLEABLE: &[Kind] = &[
    kind("lamp", false, false, true, false),
    kind("television", true, false, true, false),
    kind("stove", true, false, true, false),
    kind("coffee_machine", false, false, true, false),
    kind("desk_fan", false, false, true, false),
];

/// Openable receptacles.
pub const CONTAINERS: &[Kind] = &[
    kind("fridge", true, false, false, true),
    kind("cabinet", true, false, false, true),
    kind("microwave", false, false, false, true),
    kind("drawer", false, false, false, true),
    kind("box", false, false, false, true),
];

pub const SMALL: &[Kind] = &[
    kind("egg", false, true, false, false),
    kind("pen", false, true, false, false),
    kind("watch", false, true, false, false),
    kind("apple", false, true, false, false),
    kind("mug", false, true, false, false),
    kind("book", false, true, false, false),
    kind("key", false, true, false, false),
    kind("remote", false, true, false, false),
];

pub const FURNITURE: &[Kind] = &[
    kind("sofa", true, false, false, false),
    kind("armchair", true, false, false, false),
    kind("bookshelf", true, false, false, false),
    kind("plant", false, false, false, false),
    kind("rug", false, false, false, false),
];

/// Blocking objects that can be carried out of the way.
pub const OBSTACLES: &[Kind] = &[
    kind("chair", true, true, false, false),
    kind("stool", true, true, false, false),
    kind("laundry_basket", true, true, false, false),
];

/// Large, medium and small grounding targets.
pub const GROUNDING: &[&str] = &["fridge", "television", "microwave", "cabinet", "egg", "pen", "watch"];

pub fn lookup(category: &str) -> Option<Kind> {
    [TOGGLEABLE, CONTAINERS, SMALL, FURNITURE, OBSTACLES]
        .iter()
        .flat_map(|t| t.iter())
        .find(|k| k.category == category)
        .copied()
}

pub fn make_object(id: String, k: Kind, pos: Cell, elevation: Elevation) -> SceneObject {
    let mut o = SceneObject::new(id, k.category, pos);
    o.blocking = k.blocking;
    o.pickable = k.pickable;
    o.toggleable = k.toggleable;
    o.openable = k.openable;
    o.receptacle = k.openable;
    o.elevation = elevation;
    o
}

/// Human-readable category name for instructions.
pub fn display_name(category: &str) -> String {
    category.replace('_', " ")
}
