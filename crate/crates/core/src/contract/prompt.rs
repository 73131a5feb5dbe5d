//! System prompt assembly and hashing.

use serde::{Deserialize, Serialize};

use crate::canonical::sha256_hex;

/// Version tag recorded next to every prompt digest.
pub const PROMPT_POLICY: &str = "native_embodied_public_evidence_v1";

const BLOCK_TASK: &str = include_str!("../../prompts/block1_task.txt");
const BLOCK_ACTIONS: &str = include_str!("../../prompts/block2_actions.txt");
const BLOCK_GROUNDING: &str = include_str!("../../prompts/block3_grounding.txt");
const BLOCK_OUTPUT: &str = include_str!("../../prompts/block4_output.txt");
const NORMALIZED_RULE: &str = include_str!("../../prompts/normalized_1000_rule.txt");

const INSTRUCTION_SLOT: &str = "<TASK_INSTRUCTION>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateMode {
    Pixel,
    Normalized1000,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub sha256: String,
}

/// Blocks 1-4 in fixed order, separated by blank lines, with the task
/// instruction substituted. In `normalized_1000` mode the coordinate rule is
/// prepended as its own paragraph.
pub fn render_prompt(task_instruction: &str, mode: CoordinateMode) -> RenderedPrompt {
    let mut text = String::new();
    if mode == CoordinateMode::Normalized1000 {
        text.push_str(NORMALIZED_RULE);
        text.push('\n');
    }
    let blocks = [
        BLOCK_TASK.replace(INSTRUCTION_SLOT, task_instruction),
        BLOCK_ACTIONS.to_string(),
        BLOCK_GROUNDING.to_string(),
        BLOCK_OUTPUT.to_string(),
    ];
    text.push_str(&blocks.join("\n"));
    let sha256 = sha256_hex(text.as_bytes());
    RenderedPrompt { text, sha256 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_instruction_sensitive() {
        let a = render_prompt("Find the mug.", CoordinateMode::Normalized1000);
        let b = render_prompt("Find the mug.", CoordinateMode::Normalized1000);
        let c = render_prompt("Find the lamp.", CoordinateMode::Normalized1000);
        assert_eq!(a, b);
        assert_ne!(a.sha256, c.sha256);
        assert!(a.text.contains("Task: Find the mug.\n"));
        assert!(!a.text.contains(INSTRUCTION_SLOT));
    }

    #[test]
    fn coordinate_rule_only_in_normalized_mode() {
        let n = render_prompt("x", CoordinateMode::Normalized1000);
        let p = render_prompt("x", CoordinateMode::Pixel);
        assert!(n.text.starts_with("For interact_pixel, output x and y in normalized_1000"));
        assert!(!p.text.contains("normalized_1000"));
        let blocks: Vec<_> =
            ["You are an embodied agent", "## Allowed actions", "## Grounding Rules", "## Output format"]
                .iter()
                .map(|h| p.text.find(h).unwrap())
                .collect();
        assert!(blocks.windows(2).all(|w| w[0] < w[1]));
    }
}
