use proptest::prelude::*;

use closurebench::episodes::{generate_episode, Family};
use closurebench::world::{
    apply_interact, apply_look, apply_navigate, render_frame, AgentState, Intent, LookDirection, NavigateMode,
    FRAME_COLUMNS, FRAME_ROWS,
};

#[derive(Debug, Clone)]
enum Step {
    Nav(NavigateMode, f64),
    Look(LookDirection, f64),
    Interact(Intent, u32, u32),
}

fn step() -> impl Strategy<Value = Step> {
    let nav = prop::sample::select(vec![
        NavigateMode::Forward,
        NavigateMode::Backward,
        NavigateMode::TurnLeft,
        NavigateMode::TurnRight,
    ]);
    let look = prop::sample::select(vec![LookDirection::Up, LookDirection::Down]);
    prop_oneof![
        (nav, 0.5f64..200.0).prop_map(|(m, x)| Step::Nav(m, x)),
        (look, 1.0f64..120.0).prop_map(|(d, x)| Step::Look(d, x)),
        (prop::sample::select(Intent::ALL.to_vec()), 0u32..=1000, 0u32..=1000)
            .prop_map(|(i, x, y)| Step::Interact(i, x, y)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_play_keeps_scene_consistent(
        family in prop::sample::select(Family::ALL.to_vec()),
        seed in 0u64..500,
        steps in prop::collection::vec(step(), 1..40),
    ) {
        let spec = generate_episode(family, seed).unwrap();
        let mut scene = spec.scene.clone();
        let mut state = AgentState::at(scene.agent_start);
        for s in steps {
            match s {
                Step::Nav(m, x) => {
                    if let Ok((next, _)) = apply_navigate(&scene, &state, m, x) {
                        state = next;
                    }
                }
                Step::Look(d, x) => {
                    if let Ok(next) = apply_look(&state, d, x) {
                        state = next;
                    }
                }
                Step::Interact(i, x, y) => {
                    let coords = i.needs_coordinates().then_some((x, y));
                    let _ = apply_interact(&mut scene, &mut state, i, coords);
                }
            }
            prop_assert!(scene.passable(state.pose.position));
            let mut check = scene.clone();
            check.agent_start = state.pose;
            prop_assert!(check.validate().is_ok());
            let held: Vec<_> = scene.objects.iter().filter(|o| o.position.is_none()).map(|o| &o.object_id).collect();
            prop_assert_eq!(held, state.held.iter().collect::<Vec<_>>());

            let frame = render_frame(&scene, &state.pose);
            prop_assert_eq!(frame.rows.len(), FRAME_ROWS);
            prop_assert!(frame.rows.iter().all(|r| r.len() == FRAME_COLUMNS));
            let json = serde_json::to_string(&frame).unwrap();
            for o in &scene.objects {
                prop_assert!(!json.contains(o.object_id.as_str()));
            }
        }
    }

    #[test]
    fn navigation_is_monotone_in_magnitude(seed in 0u64..200, a in 1u32..8, b in 1u32..8) {
        // walking n then m cells ends where walking n + m cells ends, until a blocker stops both
        let spec = generate_episode(Family::SI, seed).unwrap();
        let start = AgentState::at(spec.scene.agent_start);
        let (one, _) = apply_navigate(&spec.scene, &start, NavigateMode::Forward, f64::from(a)).unwrap();
        let (two, _) = apply_navigate(&spec.scene, &one, NavigateMode::Forward, f64::from(b)).unwrap();
        let (all, _) = apply_navigate(&spec.scene, &start, NavigateMode::Forward, f64::from(a + b)).unwrap();
        prop_assert_eq!(two.pose, all.pose);
    }
}

#[test]
fn blocked_walk_reports_path_blocked() {
    let spec = generate_episode(Family::PG, 3).unwrap();
    let state = AgentState::at(spec.scene.agent_start);
    // no room is 100 cells wide
    let (_, fb) = apply_navigate(&spec.scene, &state, NavigateMode::Forward, 100.0).unwrap();
    assert!(fb.path_blocked);
    assert!(!fb.too_far);
}

#[test]
fn non_positive_magnitudes_are_rejected() {
    let spec = generate_episode(Family::PG, 3).unwrap();
    let state = AgentState::at(spec.scene.agent_start);
    assert!(apply_navigate(&spec.scene, &state, NavigateMode::Forward, 0.0).is_err());
    assert!(apply_look(&state, LookDirection::Up, -30.0).is_err());
}
