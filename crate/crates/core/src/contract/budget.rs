//! Step and invalid-action budgets.

use serde::{Deserialize, Serialize};

use super::action::{Action, InvalidReason};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetState {
    pub step_budget: u32,
    pub invalid_limit: u32,
    pub steps_used: u32,
    pub invalids_used: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateVerdict {
    Proceed,
    TerminateNoReport,
    TerminateInvalidLimit,
}

impl BudgetState {
    pub fn new(step_budget: u32, invalid_limit: u32) -> Self {
        Self { step_budget, invalid_limit, steps_used: 0, invalids_used: 0 }
    }

    /// No step left; the next turn cannot be admitted.
    pub fn exhausted(&self) -> bool {
        self.steps_used >= self.step_budget
    }

    pub fn steps_remaining(&self) -> u32 {
        self.step_budget.saturating_sub(self.steps_used)
    }

    pub fn invalids_remaining(&self) -> u32 {
        self.invalid_limit.saturating_sub(self.invalids_used)
    }

    /// Account for one agent turn before it is applied to the world.
    ///
    /// A turn requested with the budget already spent terminates without
    /// consuming anything. Otherwise the turn consumes a step; an invalid
    /// turn that would push the invalid counter past its limit terminates
    /// the episode, and the counter stays at the limit.
    pub fn step_gate(&mut self, parsed: &Result<Action, InvalidReason>) -> GateVerdict {
        if self.exhausted() {
            return GateVerdict::TerminateNoReport;
        }
        self.steps_used += 1;
        if parsed.is_err() {
            if self.invalids_used >= self.invalid_limit {
                return GateVerdict::TerminateInvalidLimit;
            }
            self.invalids_used += 1;
        }
        GateVerdict::Proceed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::LookDirection;

    fn valid() -> Result<Action, InvalidReason> {
        Ok(Action::look(LookDirection::Up, 30.0))
    }

    #[test]
    fn sixth_turn_of_five_step_budget_terminates() {
        let mut b = BudgetState::new(5, 3);
        for _ in 0..5 {
            assert_eq!(b.step_gate(&valid()), GateVerdict::Proceed);
        }
        assert_eq!(b.step_gate(&valid()), GateVerdict::TerminateNoReport);
        assert_eq!(b.steps_used, 5);
    }

    #[test]
    fn fourth_invalid_trips_limit_of_three() {
        let mut b = BudgetState::new(5, 3);
        for _ in 0..3 {
            assert_eq!(b.step_gate(&Err(InvalidReason::NotJson)), GateVerdict::Proceed);
        }
        assert_eq!(b.step_gate(&Err(InvalidReason::NotJson)), GateVerdict::TerminateInvalidLimit);
        assert_eq!(b.invalids_used, 3);
        assert_eq!(b.steps_used, 4);
    }

    #[test]
    fn report_on_last_step_is_admitted() {
        let mut b = BudgetState::new(2, 1);
        b.step_gate(&valid());
        let report = Ok(Action::report(crate::contract::ReportStatus::Success, "done"));
        assert_eq!(b.step_gate(&report), GateVerdict::Proceed);
        assert!(b.exhausted());
    }
}
