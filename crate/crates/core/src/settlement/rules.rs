//! Report matching.

use serde::{Deserialize, Serialize};

use crate::contract::ReportStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    GoalCompletion,
    StateVerification,
}

/// Whether a terminal report status matches the hidden state.
///
/// Goal mode: `success` matches W = 1; `fail`, `unsafe` and `invalid` match
/// W = 0; categorical labels never match. State-verification mode: exact
/// equality with the expected label (observability is checked separately,
/// as part of B).
pub fn match_report(mode: MatchMode, status: ReportStatus, w_sem: bool, expected_label: Option<ReportStatus>) -> bool {
    match mode {
        MatchMode::GoalCompletion => match status {
            ReportStatus::Success => w_sem,
            ReportStatus::Fail | ReportStatus::Unsafe | ReportStatus::Invalid => !w_sem,
            ReportStatus::On | ReportStatus::Off | ReportStatus::Open | ReportStatus::Closed => false,
        },
        MatchMode::StateVerification => expected_label == Some(status),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        assert!(match_report(MatchMode::GoalCompletion, ReportStatus::Success, true, None));
        assert!(match_report(MatchMode::GoalCompletion, ReportStatus::Fail, false, None));
        assert!(!match_report(MatchMode::StateVerification, ReportStatus::Success, true, Some(ReportStatus::On)));
    }
}
