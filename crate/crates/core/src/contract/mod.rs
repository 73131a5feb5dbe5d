//! The native-control contract between harness and agent: parsing raw
//! output, budget accounting, the bounded history, and the system prompt.

mod action;
mod budget;
mod history;
mod prompt;

pub use action::{
    normalize_intent, normalize_status, parse_action, Action, InvalidReason, ReportContent, ReportStatus, Skill,
    SkillName,
};
pub use budget::{BudgetState, GateVerdict};
pub use history::{DialogueHistory, HistoryTurn, HISTORY_CAPACITY};
pub use prompt::{render_prompt, CoordinateMode, RenderedPrompt, PROMPT_POLICY};
