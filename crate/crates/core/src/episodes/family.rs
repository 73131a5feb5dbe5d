use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The eight task families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    PG,
    DA,
    VS,
    SV,
    AI,
    SI,
    SM,
    CR,
}

/// Per-family budgets and start-visibility requirement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: Family,
    pub step_budget: u32,
    pub invalid_limit: u32,
    pub target_visible_at_start: bool,
}

impl Family {
    pub const ALL: [Family; 8] =
        [Family::PG, Family::DA, Family::VS, Family::SV, Family::AI, Family::SI, Family::SM, Family::CR];

    pub fn spec(self) -> FamilySpec {
        let (step_budget, invalid_limit, target_visible_at_start) = match self {
            Family::PG => (5, 3, true),
            Family::DA => (12, 4, true),
            Family::VS => (20, 6, false),
            Family::SV => (5, 2, true),
            Family::AI => (25, 8, true),
            Family::SI => (35, 10, false),
            Family::SM => (30, 10, true),
            Family::CR => (40, 12, true),
        };
        FamilySpec { family: self, step_budget, invalid_limit, target_visible_at_start }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::PG => "PG",
            Family::DA => "DA",
            Family::VS => "VS",
            Family::SV => "SV",
            Family::AI => "AI",
            Family::SI => "SI",
            Family::SM => "SM",
            Family::CR => "CR",
        }
    }

    /// Whether reports are matched against a categorical label instead of W.
    pub fn is_state_verification(self) -> bool {
        self == Family::SV
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_uppercase();
        Family::ALL.into_iter().find(|f| f.as_str() == up).ok_or_else(|| format!("unknown family {s:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budgets_table() {
        let got: Vec<_> = Family::ALL
            .iter()
            .map(|f| {
                let s = f.spec();
                (f.as_str(), s.step_budget, s.invalid_limit, s.target_visible_at_start)
            })
            .collect();
        assert_eq!(
            got,
            vec![
                ("PG", 5, 3, true),
                ("DA", 12, 4, true),
                ("VS", 20, 6, false),
                ("SV", 5, 2, true),
                ("AI", 25, 8, true),
                ("SI", 35, 10, false),
                ("SM", 30, 10, true),
                ("CR", 40, 12, true),
            ]
        );
    }

    #[test]
    fn parses_case_insensitively() {
        assert_eq!("sm".parse::<Family>().unwrap(), Family::SM);
        assert!("XX".parse::<Family>().is_err());
    }
}
