//! Task families, goal predicates, the per-step evaluator, procedural
//! generation, validation, and frozen packs.

pub mod catalog;
mod evaluate;
mod family;
mod generate;
mod pack;
mod spec;
mod validate;

pub use evaluate::{constraint_resolved, reachable_within, target_distance, Evaluator, Metric, ProgressSample};
pub use family::{Family, FamilySpec};
pub use generate::{
    expected_label_for, generate_episode, generate_episode_with_id, transform_scene, GenerationError, MAX_ATTEMPTS,
    SM_TEMPLATES,
};
pub use pack::{
    assemble_pack, build_pack, content_hash, episode_bytes, episode_id, episode_seed, pack_jobs, Pack, PackError,
    PackManifest, PACK_FORMAT,
};
pub use spec::{state_label, Budget, EpisodeSpec, Goal, StateProperty, SuccessSpec, Tolerance};
pub use validate::{in_view_at_start, validate_episode, Verdict, Violation, ViolationKind};
