//! Procedural episode generation from family templates.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::canonical::derive_seed;
use crate::contract::ReportStatus;
use crate::world::{
    visible_cells, world_to_frame_cell, AgentPose, Cell, Elevation, GridScene, Heading, Layout, ObjectId, SceneObject,
};

use super::catalog::{self, display_name, make_object, Kind};
use super::family::Family;
use super::spec::{state_label, Budget, EpisodeSpec, Goal, StateProperty, SuccessSpec};
use super::validate::validate_episode;

/// Attempts per episode before generation gives up.
pub const MAX_ATTEMPTS: usize = 64;

pub const SM_TEMPLATES: [&str; 4] = ["reveal_pick", "put_into", "rearrange", "open_pick_place"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("could not generate {family} episode from seed {seed} after {attempts} attempts: last violation {violation}")]
pub struct GenerationError {
    pub family: Family,
    pub seed: u64,
    pub attempts: usize,
    pub violation: String,
}

/// Deterministically build a validated episode.
pub fn generate_episode(family: Family, seed: u64) -> Result<EpisodeSpec, GenerationError> {
    generate_episode_with_id(family, seed, &format!("{}-{seed:016x}", family.as_str().to_lowercase()))
}

pub fn generate_episode_with_id(family: Family, seed: u64, episode_id: &str) -> Result<EpisodeSpec, GenerationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&["episode", family.as_str(), &seed.to_string()]));
    let fs = family.spec();
    let mut violation = String::from("none");
    for _ in 0..MAX_ATTEMPTS {
        let draft = match family {
            Family::PG => draft_pg(&mut rng),
            Family::DA => draft_da(&mut rng),
            Family::VS => draft_vs(&mut rng),
            Family::SV => draft_sv(&mut rng),
            Family::AI => draft_interact(&mut rng, false),
            Family::SI => draft_interact(&mut rng, true),
            Family::SM => draft_sm(&mut rng),
            Family::CR => draft_cr(&mut rng),
        };
        let d = match draft {
            Ok(d) => d,
            Err(v) => {
                violation = v;
                continue;
            }
        };
        let spec = EpisodeSpec {
            episode_id: episode_id.to_string(),
            family,
            template: d.template.map(str::to_string),
            instruction: d.instruction,
            scene: d.scene,
            success: SuccessSpec::new(d.goal),
            budget: Budget { step_budget: fs.step_budget, invalid_limit: fs.invalid_limit },
            seed,
        };
        let verdict = validate_episode(&spec);
        if verdict.passed() {
            return Ok(spec);
        }
        violation = verdict.violations[0].to_string();
    }
    Err(GenerationError { family, seed, attempts: MAX_ATTEMPTS, violation })
}

struct Drafted {
    template: Option<&'static str>,
    instruction: String,
    scene: GridScene,
    goal: Goal,
}

type DraftResult = Result<Drafted, String>;

/// Scene under construction.
struct Builder {
    scene: GridScene,
    used: BTreeSet<&'static str>,
}

impl Builder {
    fn room(rng: &mut ChaCha8Rng) -> Self {
        let w = rng.random_range(9..=15);
        let h = rng.random_range(9..=15);
        Self::with_layout(Layout::walled_room(w, h))
    }

    fn with_layout(layout: Layout) -> Self {
        Self {
            scene: GridScene {
                scene_id: String::new(),
                layout,
                objects: Vec::new(),
                agent_start: AgentPose::new(Cell::new(1, 1), Heading::North),
            },
            used: BTreeSet::new(),
        }
    }

    fn interior(&self) -> impl Iterator<Item = Cell> + '_ {
        let (w, h) = (self.scene.width(), self.scene.height());
        (1..h - 1).flat_map(move |y| (1..w - 1).map(move |x| Cell::new(x, y)))
    }

    /// Floor cells with no object on them, excluding the agent's start cell.
    fn free_cells(&self) -> Vec<Cell> {
        let start = self.scene.agent_start.position;
        self.interior()
            .filter(|&c| !self.scene.is_wall(c) && c != start && self.scene.objects_at(c).next().is_none())
            .collect()
    }

    fn place_agent(&mut self, rng: &mut ChaCha8Rng) -> Result<(), String> {
        let cells: Vec<Cell> =
            self.interior().filter(|&c| !self.scene.is_wall(c) && self.scene.objects_at(c).next().is_none()).collect();
        let pos = *cells.choose(rng).ok_or("no free cell for the agent")?;
        let heading = *Heading::ALL.choose(rng).expect("non-empty");
        self.scene.agent_start = AgentPose::new(pos, heading);
        Ok(())
    }

    /// Short interior wall runs; never on the agent's cell.
    fn add_wall_segments(&mut self, rng: &mut ChaCha8Rng, count: usize) {
        let (w, h) = (self.scene.width(), self.scene.height());
        for _ in 0..count {
            let len = rng.random_range(2..=4);
            let horizontal = rng.random_bool(0.5);
            let x0 = rng.random_range(2..w - 2);
            let y0 = rng.random_range(2..h - 2);
            for i in 0..len {
                let c = if horizontal { Cell::new(x0 + i, y0) } else { Cell::new(x0, y0 + i) };
                if c.x < w - 1 && c.y < h - 1 && c != self.scene.agent_start.position {
                    self.scene.layout.set_wall(c, true);
                }
            }
        }
    }

    fn next_id(&self, k: Kind) -> String {
        format!("{}-{}", k.category, self.scene.objects.len() + 1)
    }

    fn add(&mut self, k: Kind, pos: Cell, elevation: Elevation) -> ObjectId {
        let id = self.next_id(k);
        self.used.insert(k.category);
        self.scene.objects.push(make_object(id.clone(), k, pos, elevation));
        ObjectId::new(id)
    }

    fn pick_kind(&self, rng: &mut ChaCha8Rng, table: &[Kind]) -> Result<Kind, String> {
        let options: Vec<Kind> = table.iter().filter(|k| !self.used.contains(k.category)).copied().collect();
        options.choose(rng).copied().ok_or_else(|| "category table exhausted".to_string())
    }

    fn object_mut(&mut self, id: &ObjectId) -> &mut SceneObject {
        self.scene.object_mut(id).expect("builder-created id")
    }

    /// Cells the agent sees from its start pose that also fall inside the viewport wedge.
    fn visible_spots(&self, min_d: f64, max_d: f64) -> Vec<Cell> {
        let pose = self.scene.agent_start;
        let vis = visible_cells(&self.scene, &pose);
        self.free_cells()
            .into_iter()
            .filter(|c| vis.contains(c) && world_to_frame_cell(&pose, *c).is_some())
            .filter(|c| {
                let d = pose.position.distance(*c);
                d >= min_d && d <= max_d
            })
            .collect()
    }

    fn hidden_spots(&self) -> Vec<Cell> {
        let vis = visible_cells(&self.scene, &self.scene.agent_start);
        self.free_cells().into_iter().filter(|c| !vis.contains(c)).collect()
    }

    /// A few unrelated objects on free cells.
    fn add_distractors(&mut self, rng: &mut ChaCha8Rng, count: usize, avoid: &[Cell]) {
        for _ in 0..count {
            let table =
                [catalog::SMALL, catalog::FURNITURE, catalog::TOGGLEABLE].choose(rng).copied().expect("non-empty");
            let Ok(k) = self.pick_kind(rng, table) else { continue };
            let cells: Vec<Cell> = self.free_cells().into_iter().filter(|c| !avoid.contains(c)).collect();
            let Some(&pos) = cells.choose(rng) else { return };
            let elevation = if k.blocking { Elevation::Mid } else { random_elevation(rng) };
            let id = self.add(k, pos, elevation);
            if k.toggleable && rng.random_bool(0.5) {
                self.object_mut(&id).is_toggled = true;
            }
        }
    }

    fn finish(mut self, template: Option<&'static str>, instruction: String, goal: Goal) -> DraftResult {
        self.scene.scene_id = format!(
            "grid-{}x{}-{}",
            self.scene.width(),
            self.scene.height(),
            &crate::canonical::canonical_digest(&self.scene).map_err(|e| e.to_string())?[..12]
        );
        Ok(Drafted { template, instruction, scene: self.scene, goal })
    }
}

fn random_elevation(rng: &mut ChaCha8Rng) -> Elevation {
    *[Elevation::Low, Elevation::Mid, Elevation::High].choose(rng).expect("non-empty")
}

fn choose_cell(rng: &mut ChaCha8Rng, cells: &[Cell], what: &str) -> Result<Cell, String> {
    cells.choose(rng).copied().ok_or_else(|| format!("no_spot_for_{what}"))
}

fn draft_pg(rng: &mut ChaCha8Rng) -> DraftResult {
    let mut b = Builder::room(rng);
    b.place_agent(rng)?;
    let category = *catalog::GROUNDING.choose(rng).expect("non-empty");
    let k = catalog::lookup(category).expect("catalogued");
    let pos = choose_cell(rng, &b.visible_spots(1.0, 5.0), "target")?;
    let target = b.add(k, pos, Elevation::Mid);
    let n = rng.random_range(0..=3);
    b.add_distractors(rng, n, &[]);
    let instruction = format!("Point at the {} by clicking on it, then report.", display_name(category));
    b.finish(None, instruction, Goal::TargetGrounded { target })
}

fn draft_da(rng: &mut ChaCha8Rng) -> DraftResult {
    let mut b = Builder::room(rng);
    let walls = rng.random_range(0..=1);
    b.add_wall_segments(rng, walls);
    b.place_agent(rng)?;
    let table = [catalog::FURNITURE, catalog::TOGGLEABLE, catalog::CONTAINERS].choose(rng).copied().expect("non-empty");
    let k = b.pick_kind(rng, table)?;
    let pos = choose_cell(rng, &b.visible_spots(3.0, 6.0), "target")?;
    let target = b.add(k, pos, Elevation::Mid);
    let n = rng.random_range(0..=3);
    b.add_distractors(rng, n, &[]);
    let instruction =
        format!("Walk over to the {} and stop within arm's reach of it, then report.", display_name(k.category));
    b.finish(None, instruction, Goal::AgentNearTarget { target })
}

fn draft_vs(rng: &mut ChaCha8Rng) -> DraftResult {
    let mut b = Builder::room(rng);
    let walls = rng.random_range(0..=2);
    b.add_wall_segments(rng, walls);
    b.place_agent(rng)?;
    let table = [catalog::SMALL, catalog::TOGGLEABLE, catalog::CONTAINERS, catalog::FURNITURE]
        .choose(rng)
        .copied()
        .expect("non-empty");
    let k = b.pick_kind(rng, table)?;
    let pos = choose_cell(rng, &b.hidden_spots(), "target")?;
    let elevation = if k.blocking { Elevation::Mid } else { random_elevation(rng) };
    let target = b.add(k, pos, elevation);
    let n = rng.random_range(0..=3);
    b.add_distractors(rng, n, &[]);
    let instruction = format!("Look around until the {} is in view, then report.", display_name(k.category));
    b.finish(None, instruction, Goal::ObjectVisibleLatched { target })
}

fn draft_sv(rng: &mut ChaCha8Rng) -> DraftResult {
    let mut b = Builder::room(rng);
    b.place_agent(rng)?;
    let toggle = rng.random_bool(0.5);
    let k = b.pick_kind(rng, if toggle { catalog::TOGGLEABLE } else { catalog::CONTAINERS })?;
    let pos = choose_cell(rng, &b.visible_spots(1.0, 5.0), "target")?;
    let elevation = if k.blocking { Elevation::Mid } else { random_elevation(rng) };
    let target = b.add(k, pos, elevation);
    let state = rng.random_bool(0.5);
    let obj = b.object_mut(&target);
    if toggle {
        obj.is_toggled = state;
    } else {
        obj.is_open = state;
    }
    let expected_label = state_label(obj).expect("stateful target");
    let n = rng.random_range(0..=2);
    b.add_distractors(rng, n, &[]);
    let question = if toggle { "on or off" } else { "open or closed" };
    let instruction =
        format!("Check whether the {} is {question}, and report the state you observe.", display_name(k.category));
    b.finish(None, instruction, Goal::ReportStatus { target, expected_label })
}

#[derive(Clone, Copy)]
enum Interaction {
    Toggle(bool),
    Open(bool),
    Pick,
}

impl Interaction {
    fn random(rng: &mut ChaCha8Rng, allow_pick: bool) -> Self {
        let n = if allow_pick { 5 } else { 4 };
        match rng.random_range(0..n) {
            0 => Interaction::Toggle(true),
            1 => Interaction::Toggle(false),
            2 => Interaction::Open(true),
            3 => Interaction::Open(false),
            _ => Interaction::Pick,
        }
    }

    fn table(self) -> &'static [Kind] {
        match self {
            Interaction::Toggle(_) => catalog::TOGGLEABLE,
            Interaction::Open(_) => catalog::CONTAINERS,
            Interaction::Pick => catalog::SMALL,
        }
    }

    /// Set the target's initial state opposite the goal and return the goal.
    fn prepare(self, obj: &mut SceneObject) -> Goal {
        let target = obj.object_id.clone();
        match self {
            Interaction::Toggle(on) => {
                obj.is_toggled = !on;
                Goal::ObjectState { target, property: StateProperty::Toggled, value: on }
            }
            Interaction::Open(open) => {
                obj.is_open = !open;
                Goal::ObjectState { target, property: StateProperty::Open, value: open }
            }
            Interaction::Pick => Goal::ObjectHeld { target },
        }
    }

    fn verb(self) -> &'static str {
        match self {
            Interaction::Toggle(true) => "turn on",
            Interaction::Toggle(false) => "turn off",
            Interaction::Open(true) => "open",
            Interaction::Open(false) => "close",
            Interaction::Pick => "pick up",
        }
    }
}

fn draft_interact(rng: &mut ChaCha8Rng, search: bool) -> DraftResult {
    let mut b = Builder::room(rng);
    if search {
        let walls = rng.random_range(0..=2);
        b.add_wall_segments(rng, walls);
    }
    b.place_agent(rng)?;
    let interaction = Interaction::random(rng, true);
    let k = b.pick_kind(rng, interaction.table())?;
    let (pos, elevation) = if search {
        let e = if k.blocking { Elevation::Mid } else { random_elevation(rng) };
        (choose_cell(rng, &b.hidden_spots(), "target")?, e)
    } else {
        (choose_cell(rng, &b.visible_spots(2.0, 6.0), "target")?, Elevation::Mid)
    };
    let target = b.add(k, pos, elevation);
    let goal = interaction.prepare(b.object_mut(&target));
    let n = rng.random_range(0..=3);
    b.add_distractors(rng, n, &[]);
    let name = display_name(k.category);
    let instruction = if search {
        format!("Find the {name} and {} it, then report.", interaction.verb())
    } else {
        let verb = interaction.verb();
        let mut v = verb.to_string();
        v[..1].make_ascii_uppercase();
        format!("{v} the {name}, then report.")
    };
    b.finish(None, instruction, goal)
}

fn draft_sm(rng: &mut ChaCha8Rng) -> DraftResult {
    let template = *SM_TEMPLATES.choose(rng).expect("non-empty");
    let mut b = Builder::room(rng);
    b.place_agent(rng)?;
    let first_spot = choose_cell(rng, &b.visible_spots(2.0, 6.0), "first_object")?;
    let small = b.pick_kind(rng, catalog::SMALL)?;
    let (goal, instruction) = match template {
        "reveal_pick" => {
            let ck = b.pick_kind(rng, catalog::CONTAINERS)?;
            let c = b.add(ck, first_spot, Elevation::Mid);
            let o = b.add(small, first_spot, Elevation::Mid);
            b.object_mut(&o).contained_in = Some(c.clone());
            let goal = Goal::OrderedChain {
                steps: vec![
                    Goal::ObjectState { target: c, property: StateProperty::Open, value: true },
                    Goal::ObjectHeld { target: o },
                ],
            };
            let text = format!(
                "Open the {} and pick up the {} inside it, then report.",
                display_name(ck.category),
                display_name(small.category)
            );
            (goal, text)
        }
        "put_into" => {
            let o = b.add(small, first_spot, Elevation::Mid);
            let rk = b.pick_kind(rng, catalog::CONTAINERS)?;
            let rpos = choose_cell(rng, &b.free_cells(), "receptacle")?;
            let r = b.add(rk, rpos, Elevation::Mid);
            b.object_mut(&r).is_open = true;
            let goal = Goal::OrderedChain {
                steps: vec![
                    Goal::ObjectHeld { target: o.clone() },
                    Goal::ObjectAtReceptacle { target: o, receptacle: r },
                ],
            };
            let text = format!(
                "Pick up the {} and put it in the {}, then report.",
                display_name(small.category),
                display_name(rk.category)
            );
            (goal, text)
        }
        "rearrange" => {
            let ak = b.pick_kind(rng, catalog::CONTAINERS)?;
            let a = b.add(ak, first_spot, Elevation::Mid);
            b.object_mut(&a).is_open = true;
            let o = b.add(small, first_spot, Elevation::Mid);
            b.object_mut(&o).contained_in = Some(a);
            let bk = b.pick_kind(rng, catalog::CONTAINERS)?;
            let bpos = choose_cell(rng, &b.free_cells(), "receptacle")?;
            let dest = b.add(bk, bpos, Elevation::Mid);
            b.object_mut(&dest).is_open = true;
            let goal = Goal::OrderedChain {
                steps: vec![
                    Goal::ObjectHeld { target: o.clone() },
                    Goal::ObjectAtReceptacle { target: o, receptacle: dest },
                ],
            };
            let text = format!(
                "Move the {} from the {} to the {}, then report.",
                display_name(small.category),
                display_name(ak.category),
                display_name(bk.category)
            );
            (goal, text)
        }
        _ => {
            let ck = b.pick_kind(rng, catalog::CONTAINERS)?;
            let c = b.add(ck, first_spot, Elevation::Mid);
            let o = b.add(small, first_spot, Elevation::Mid);
            b.object_mut(&o).contained_in = Some(c.clone());
            let dk = b.pick_kind(rng, catalog::CONTAINERS)?;
            let dpos = choose_cell(rng, &b.free_cells(), "receptacle")?;
            let dest = b.add(dk, dpos, Elevation::Mid);
            b.object_mut(&dest).is_open = true;
            let goal = Goal::OrderedChain {
                steps: vec![
                    Goal::ObjectState { target: c, property: StateProperty::Open, value: true },
                    Goal::ObjectHeld { target: o.clone() },
                    Goal::ObjectAtReceptacle { target: o, receptacle: dest },
                ],
            };
            let text = format!(
                "Open the {}, take out the {}, and put it in the {}, then report.",
                display_name(ck.category),
                display_name(small.category),
                display_name(dk.category)
            );
            (goal, text)
        }
    };
    let n = rng.random_range(0..=2);
    b.add_distractors(rng, n, &[]);
    b.finish(Some(template), instruction, goal)
}

/// A diagonal wall splits the room. Four-connected movement cannot cross a
/// diagonal, but a pure diagonal sight line passes between its cells, so
/// the target is visible from the start yet only reachable through a single
/// door cell holding a pickable blocking obstacle.
fn draft_cr(rng: &mut ChaCha8Rng) -> DraftResult {
    let w = rng.random_range(9..=15);
    let h = rng.random_range(9..=15);
    let k = rng.random_range(2..=4);
    let ax = rng.random_range(1..=(w - 2 - k));
    let ay = rng.random_range((1 + k)..=(h - 2));
    let agent = Cell::new(ax, ay);
    let target_pos = Cell::new(ax + k, ay - k);
    let seam = ax - ay + 1;

    let mut layout = Layout::walled_room(w, h);
    let mut wall_cells = Vec::new();
    for y in 1..h - 1 {
        let x = y + seam;
        if (1..w - 1).contains(&x) {
            layout.set_wall(Cell::new(x, y), true);
            wall_cells.push(Cell::new(x, y));
        }
    }
    let doors: Vec<Cell> = wall_cells
        .iter()
        .copied()
        .filter(|d| d.neighbors4().iter().all(|n| n.x >= 1 && n.y >= 1 && n.x < w - 1 && n.y < h - 1))
        .collect();
    let door = choose_cell(rng, &doors, "door")?;
    layout.set_wall(door, false);

    let mut b = Builder::with_layout(layout);
    let heading = if rng.random_bool(0.5) { Heading::North } else { Heading::East };
    b.scene.agent_start = AgentPose::new(agent, heading);
    let ok = b.pick_kind(rng, catalog::OBSTACLES)?;
    let obstacle = b.add(ok, door, Elevation::Mid);
    let interaction = Interaction::random(rng, false);
    let tk = b.pick_kind(rng, interaction.table())?;
    let target = b.add(tk, target_pos, Elevation::Mid);
    let inner = interaction.prepare(b.object_mut(&target));
    let sight_line: Vec<Cell> = (0..=k).map(|i| agent.offset(i, -i)).collect();
    let n = rng.random_range(0..=2);
    b.add_distractors(rng, n, &sight_line);

    let rot = rng.random_range(0..4);
    let mirror = rng.random_bool(0.5);
    b.scene = transform_scene(&b.scene, rot, mirror);
    let instruction = format!(
        "A {} is in the way. Clear the path, then {} the {} and report.",
        display_name(ok.category),
        interaction.verb(),
        display_name(tk.category)
    );
    b.finish(None, instruction, Goal::ConstrainedGoal { obstacle, goal: Box::new(inner) })
}

/// Rotate the scene clockwise by `quarters` quarter turns, then optionally mirror it left-right.
pub fn transform_scene(scene: &GridScene, quarters: u8, mirror: bool) -> GridScene {
    let mut s = scene.clone();
    for _ in 0..quarters % 4 {
        let h = s.height();
        s = map_scene(&s, s.height(), s.width(), |c| Cell::new(h - 1 - c.y, c.x), |hd| hd.rotate(1));
    }
    if mirror {
        let w = s.width();
        s = map_scene(
            &s,
            s.width(),
            s.height(),
            |c| Cell::new(w - 1 - c.x, c.y),
            |hd| match hd {
                Heading::East => Heading::West,
                Heading::West => Heading::East,
                other => other,
            },
        );
    }
    s
}

fn map_scene(
    s: &GridScene,
    new_w: i32,
    new_h: i32,
    f: impl Fn(Cell) -> Cell,
    g: impl Fn(Heading) -> Heading,
) -> GridScene {
    let mut rows = vec![vec!['.'; new_w as usize]; new_h as usize];
    for y in 0..s.height() {
        for x in 0..s.width() {
            let c = Cell::new(x, y);
            if s.is_wall(c) {
                let m = f(c);
                rows[m.y as usize][m.x as usize] = '#';
            }
        }
    }
    let rows: Vec<String> = rows.into_iter().map(|r| r.into_iter().collect()).collect();
    let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
    let layout = Layout::from_rows(&refs).expect("same glyph set");
    let objects = s
        .objects
        .iter()
        .map(|o| {
            let mut o = o.clone();
            o.position = o.position.map(&f);
            o
        })
        .collect();
    let start = s.agent_start;
    GridScene {
        scene_id: s.scene_id.clone(),
        layout,
        objects,
        agent_start: AgentPose { position: f(start.position), heading: g(start.heading), pitch: start.pitch },
    }
}

/// The expected label for a state-verification target, as derived from hidden state.
pub fn expected_label_for(scene: &GridScene, target: &ObjectId) -> Option<ReportStatus> {
    scene.object(target).and_then(state_label)
}
