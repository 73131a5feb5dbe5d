//! Breadth-first search over agent poses using the simulator's own physics.

use std::collections::{HashMap, VecDeque};

use crate::contract::Action;
use crate::world::{apply_look, apply_navigate, AgentPose, AgentState, GridScene, LookDirection, NavigateMode};

/// Pose-changing actions available from `pose` that complete without obstruction.
pub fn pose_moves(scene: &GridScene, pose: AgentPose) -> Vec<(Action, AgentPose)> {
    let state = AgentState::at(pose);
    let mut out = Vec::new();
    for mode in [NavigateMode::Forward, NavigateMode::Backward] {
        for n in 1..=12 {
            let (next, fb) = apply_navigate(scene, &state, mode, f64::from(n)).expect("positive magnitude");
            if fb.path_blocked {
                break;
            }
            out.push((Action::navigate(mode, f64::from(n)), next.pose));
        }
    }
    for (mode, deg) in
        [(NavigateMode::TurnLeft, 90.0), (NavigateMode::TurnRight, 90.0), (NavigateMode::TurnRight, 180.0)]
    {
        let (next, _) = apply_navigate(scene, &state, mode, deg).expect("positive magnitude");
        out.push((Action::navigate(mode, deg), next.pose));
    }
    for dir in [LookDirection::Up, LookDirection::Down] {
        for deg in [30.0, 60.0] {
            let next = apply_look(&state, dir, deg).expect("positive magnitude");
            if next.pose.pitch != pose.pitch {
                out.push((Action::look(dir, deg), next.pose));
            }
        }
    }
    out
}

/// Shortest action sequence from `start` to any pose satisfying `goal`.
/// Returns an empty plan when `start` already satisfies it and `None` when
/// no reachable pose does.
pub fn plan_to(scene: &GridScene, start: AgentPose, goal: impl Fn(&AgentPose) -> bool) -> Option<Vec<Action>> {
    if goal(&start) {
        return Some(Vec::new());
    }
    let mut parent: HashMap<AgentPose, (AgentPose, Action)> = HashMap::new();
    let mut queue = VecDeque::from([start]);
    parent.insert(start, (start, Action::look(LookDirection::Up, 30.0)));
    while let Some(p) = queue.pop_front() {
        for (action, next) in pose_moves(scene, p) {
            if parent.contains_key(&next) {
                continue;
            }
            parent.insert(next, (p, action));
            if goal(&next) {
                let mut plan = Vec::new();
                let mut cur = next;
                while cur != start {
                    let (prev, a) = parent[&cur].clone();
                    plan.push(a);
                    cur = prev;
                }
                plan.reverse();
                return Some(plan);
            }
            queue.push_back(next);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Cell, Heading, Layout, Pitch};

    #[test]
    fn plans_around_a_wall() {
        let mut layout = Layout::walled_room(9, 9);
        for x in 1..7 {
            layout.set_wall(Cell::new(x, 4), true);
        }
        let scene = GridScene {
            scene_id: "t".into(),
            layout,
            objects: vec![],
            agent_start: AgentPose::new(Cell::new(1, 6), Heading::North),
        };
        let goal = Cell::new(1, 2);
        let plan = plan_to(&scene, scene.agent_start, |p| p.position == goal).unwrap();
        let mut state = AgentState::at(scene.agent_start);
        for a in &plan {
            if let crate::contract::Skill::Navigate { mode, magnitude } = a.skill {
                let (next, fb) = apply_navigate(&scene, &state, mode, magnitude).unwrap();
                assert!(!fb.path_blocked);
                state = next;
            }
        }
        assert_eq!(state.pose.position, goal);
        // right, forward 6, left, forward 4, left, forward 6
        assert_eq!(plan.len(), 6);
    }

    #[test]
    fn pitch_only_goal_is_one_look() {
        let scene = GridScene {
            scene_id: "t".into(),
            layout: Layout::walled_room(5, 5),
            objects: vec![],
            agent_start: AgentPose::new(Cell::new(2, 2), Heading::North),
        };
        let plan = plan_to(&scene, scene.agent_start, |p| p.pitch == Pitch::Down).unwrap();
        assert_eq!(plan, vec![Action::look(LookDirection::Down, 30.0)]);
    }
}
