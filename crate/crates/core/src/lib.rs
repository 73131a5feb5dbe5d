//! Deterministic harness for scoring embodied agents on two separate axes:
//! whether the world reached the goal state, and whether the agent's
//! terminal report correctly says so.

pub mod agents;
pub mod analytics;
pub mod canonical;
pub mod contract;
pub mod episodes;
pub mod settlement;
pub mod world;
