//! The episode runner, scripted baselines, and the wire protocol for remote agents.

mod oracle;
mod planner;
mod policies;
mod runner;
pub mod wire;

pub use oracle::{face_target, idle_action, pursue, Pursuit};
pub use planner::{plan_to, pose_moves};
pub use policies::{run_policy, PolicyConfig, PolicyKind};
pub use runner::{replay, replay_matches, run_config, run_episode, Driver, ObservationPayload, Turn, WorldView};
