//! Bounded dialogue history carried in every observation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub const HISTORY_CAPACITY: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryTurn {
    /// Text-only summary of what the agent was shown on that turn.
    pub observation: String,
    /// The agent's raw output, verbatim.
    pub output: String,
}

/// FIFO of the last [`HISTORY_CAPACITY`] turns.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DialogueHistory {
    turns: VecDeque<HistoryTurn>,
}

impl DialogueHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, observation: impl Into<String>, output: impl Into<String>) {
        if self.turns.len() == HISTORY_CAPACITY {
            self.turns.pop_front();
        }
        self.turns.push_back(HistoryTurn { observation: observation.into(), output: output.into() });
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &HistoryTurn> {
        self.turns.iter()
    }
}
