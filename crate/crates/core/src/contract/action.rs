//! Raw agent output parsing and normalization.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::world::{Intent, LookDirection, NavigateMode, COORD_MAX};

/// The eight canonical report statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Success,
    Fail,
    Unsafe,
    Invalid,
    On,
    Off,
    Open,
    Closed,
}

impl ReportStatus {
    pub const ALL: [ReportStatus; 8] = [
        ReportStatus::Success,
        ReportStatus::Fail,
        ReportStatus::Unsafe,
        ReportStatus::Invalid,
        ReportStatus::On,
        ReportStatus::Off,
        ReportStatus::Open,
        ReportStatus::Closed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportStatus::Success => "success",
            ReportStatus::Fail => "fail",
            ReportStatus::Unsafe => "unsafe",
            ReportStatus::Invalid => "invalid",
            ReportStatus::On => "on",
            ReportStatus::Off => "off",
            ReportStatus::Open => "open",
            ReportStatus::Closed => "closed",
        }
    }

    /// on/off/open/closed
    pub fn is_categorical(self) -> bool {
        matches!(self, ReportStatus::On | ReportStatus::Off | ReportStatus::Open | ReportStatus::Closed)
    }
}

impl fmt::Display for ReportStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Trim, case-fold, and match exactly; anything unrecognized becomes `invalid`.
pub fn normalize_status(raw: &str) -> ReportStatus {
    let folded = raw.trim().to_lowercase();
    ReportStatus::ALL.into_iter().find(|s| s.as_str() == folded).unwrap_or(ReportStatus::Invalid)
}

/// Resolve an intent name, applying the closed alias table.
pub fn normalize_intent(raw: &str) -> Option<Intent> {
    let folded = raw.trim().to_lowercase();
    let canonical = match folded.as_str() {
        "open" => "open_access",
        "close" => "close_access",
        "toggle_on" => "activate",
        "toggle_off" => "deactivate",
        other => other,
    };
    Intent::ALL.into_iter().find(|i| i.as_str() == canonical)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportContent {
    pub status: ReportStatus,
    pub summary: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillName {
    Navigate,
    Look,
    InteractPixel,
    Report,
}

impl SkillName {
    pub const ALL: [SkillName; 4] = [SkillName::Navigate, SkillName::Look, SkillName::InteractPixel, SkillName::Report];

    pub fn as_str(self) -> &'static str {
        match self {
            SkillName::Navigate => "navigate",
            SkillName::Look => "look",
            SkillName::InteractPixel => "interact_pixel",
            SkillName::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Skill {
    Navigate { mode: NavigateMode, magnitude: f64 },
    Look { direction: LookDirection, magnitude: f64 },
    InteractPixel { intent: Intent, coords: Option<(u32, u32)> },
    Report(ReportContent),
}

impl Skill {
    pub fn name(&self) -> SkillName {
        match self {
            Skill::Navigate { .. } => SkillName::Navigate,
            Skill::Look { .. } => SkillName::Look,
            Skill::InteractPixel { .. } => SkillName::InteractPixel,
            Skill::Report(_) => SkillName::Report,
        }
    }
}

/// A parsed, normalized skill invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub skill: Skill,
    pub thought: Option<String>,
    pub cognitive_state: Option<String>,
}

impl Action {
    pub fn new(skill: Skill) -> Self {
        Self { skill, thought: None, cognitive_state: None }
    }

    pub fn navigate(mode: NavigateMode, magnitude: f64) -> Self {
        Self::new(Skill::Navigate { mode, magnitude })
    }

    pub fn look(direction: LookDirection, magnitude: f64) -> Self {
        Self::new(Skill::Look { direction, magnitude })
    }

    pub fn interact(intent: Intent, coords: Option<(u32, u32)>) -> Self {
        Self::new(Skill::InteractPixel { intent, coords })
    }

    pub fn report(status: ReportStatus, summary: impl Into<String>) -> Self {
        Self::new(Skill::Report(ReportContent { status, summary: summary.into() }))
    }

    pub fn is_report(&self) -> bool {
        matches!(self.skill, Skill::Report(_))
    }

    pub fn to_value(&self) -> Value {
        let mut args = Map::new();
        match &self.skill {
            Skill::Navigate { mode, magnitude } => {
                args.insert("mode".into(), serde_json::to_value(mode).expect("enum"));
                args.insert("magnitude".into(), Value::from(*magnitude));
            }
            Skill::Look { direction, magnitude } => {
                args.insert("direction".into(), serde_json::to_value(direction).expect("enum"));
                args.insert("magnitude".into(), Value::from(*magnitude));
            }
            Skill::InteractPixel { intent, coords } => {
                args.insert("intent".into(), Value::from(intent.as_str()));
                if let Some((x, y)) = coords {
                    args.insert("x".into(), Value::from(*x));
                    args.insert("y".into(), Value::from(*y));
                }
            }
            Skill::Report(r) => {
                args.insert("status".into(), Value::from(r.status.as_str()));
                args.insert("summary".into(), Value::from(r.summary.clone()));
            }
        }
        let mut obj = Map::new();
        obj.insert("skill_name".into(), Value::from(self.skill.name().as_str()));
        obj.insert("arguments".into(), Value::Object(args));
        if let Some(t) = &self.thought {
            obj.insert("thought".into(), Value::from(t.clone()));
        }
        if let Some(c) = &self.cognitive_state {
            obj.insert("cognitive_state".into(), Value::from(c.clone()));
        }
        Value::Object(obj)
    }

    /// Single-line JSON in the output format agents are asked to produce.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_value()).expect("json values always serialize")
    }
}

/// Machine-readable reason an agent turn was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    NotJson,
    MultipleObjects,
    UnknownSkill,
    MissingArgument,
    BadType,
    OutOfRange,
    /// No action arrived within the per-turn deadline (wire mode).
    Timeout,
}

impl InvalidReason {
    pub fn as_str(self) -> &'static str {
        match self {
            InvalidReason::NotJson => "not_json",
            InvalidReason::MultipleObjects => "multiple_objects",
            InvalidReason::UnknownSkill => "unknown_skill",
            InvalidReason::MissingArgument => "missing_argument",
            InvalidReason::BadType => "bad_type",
            InvalidReason::OutOfRange => "out_of_range",
            InvalidReason::Timeout => "timeout",
        }
    }
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

type Parsed<T> = Result<T, InvalidReason>;

/// Parse one turn of raw agent output.
///
/// Accepts exactly one JSON object (surrounding whitespace allowed) with
/// `skill_name` and `arguments`; optional `thought` and `cognitive_state`
/// must be strings. Unknown extra keys are ignored.
pub fn parse_action(raw: &str) -> Parsed<Action> {
    let value = single_json_value(raw)?;
    let Value::Object(obj) = value else {
        return Err(InvalidReason::NotJson);
    };
    let skill_name = match obj.get("skill_name") {
        None => return Err(InvalidReason::MissingArgument),
        Some(Value::String(s)) => s.trim().to_string(),
        Some(_) => return Err(InvalidReason::BadType),
    };
    let skill_name =
        SkillName::ALL.into_iter().find(|s| s.as_str() == skill_name).ok_or(InvalidReason::UnknownSkill)?;
    let args = match obj.get("arguments") {
        None => return Err(InvalidReason::MissingArgument),
        Some(Value::Object(a)) => a,
        Some(_) => return Err(InvalidReason::BadType),
    };
    let skill = match skill_name {
        SkillName::Navigate => {
            let mode = enum_arg(args, "mode", |s| match s {
                "forward" => Some(NavigateMode::Forward),
                "backward" => Some(NavigateMode::Backward),
                "turn_left" => Some(NavigateMode::TurnLeft),
                "turn_right" => Some(NavigateMode::TurnRight),
                _ => None,
            })?;
            Skill::Navigate { mode, magnitude: magnitude_arg(args)? }
        }
        SkillName::Look => {
            let direction = enum_arg(args, "direction", |s| match s {
                "up" => Some(LookDirection::Up),
                "down" => Some(LookDirection::Down),
                _ => None,
            })?;
            Skill::Look { direction, magnitude: magnitude_arg(args)? }
        }
        SkillName::InteractPixel => {
            let intent = enum_arg(args, "intent", normalize_intent)?;
            let coords =
                if intent.needs_coordinates() { Some((coord_arg(args, "x")?, coord_arg(args, "y")?)) } else { None };
            Skill::InteractPixel { intent, coords }
        }
        SkillName::Report => {
            let status = match args.get("status") {
                None => return Err(InvalidReason::MissingArgument),
                Some(Value::String(s)) => normalize_status(s),
                Some(_) => return Err(InvalidReason::BadType),
            };
            let summary = match args.get("summary") {
                None => return Err(InvalidReason::MissingArgument),
                Some(Value::String(s)) => s.clone(),
                Some(_) => return Err(InvalidReason::BadType),
            };
            Skill::Report(ReportContent { status, summary })
        }
    };
    Ok(Action {
        skill,
        thought: optional_text(&obj, "thought")?,
        cognitive_state: optional_text(&obj, "cognitive_state")?,
    })
}

fn single_json_value(raw: &str) -> Parsed<Value> {
    let mut stream = serde_json::Deserializer::from_str(raw).into_iter::<Value>();
    let first = match stream.next() {
        Some(Ok(v)) => v,
        _ => return Err(InvalidReason::NotJson),
    };
    let rest = &raw[stream.byte_offset()..];
    if rest.trim().is_empty() {
        return Ok(first);
    }
    // trailing content: a second JSON value means several objects, anything else is prose
    let mut tail = serde_json::Deserializer::from_str(rest).into_iter::<Value>();
    match tail.next() {
        Some(Ok(_)) => Err(InvalidReason::MultipleObjects),
        _ => Err(InvalidReason::NotJson),
    }
}

fn enum_arg<T>(args: &Map<String, Value>, key: &str, lookup: impl Fn(&str) -> Option<T>) -> Parsed<T> {
    match args.get(key) {
        None | Some(Value::Null) => Err(InvalidReason::MissingArgument),
        Some(Value::String(s)) => lookup(&s.trim().to_lowercase()).ok_or(InvalidReason::BadType),
        Some(_) => Err(InvalidReason::BadType),
    }
}

fn magnitude_arg(args: &Map<String, Value>) -> Parsed<f64> {
    match args.get("magnitude") {
        None | Some(Value::Null) => Err(InvalidReason::MissingArgument),
        Some(Value::Number(n)) => {
            let m = n.as_f64().ok_or(InvalidReason::BadType)?;
            if m.is_finite() && m > 0.0 {
                Ok(m)
            } else {
                Err(InvalidReason::OutOfRange)
            }
        }
        Some(_) => Err(InvalidReason::BadType),
    }
}

fn coord_arg(args: &Map<String, Value>, key: &str) -> Parsed<u32> {
    match args.get(key) {
        None | Some(Value::Null) => Err(InvalidReason::MissingArgument),
        Some(Value::Number(n)) => {
            if let Some(u) = n.as_u64() {
                if u <= u64::from(COORD_MAX) {
                    Ok(u as u32)
                } else {
                    Err(InvalidReason::OutOfRange)
                }
            } else if n.as_i64().is_some() {
                Err(InvalidReason::OutOfRange)
            } else {
                Err(InvalidReason::BadType)
            }
        }
        Some(_) => Err(InvalidReason::BadType),
    }
}

fn optional_text(obj: &Map<String, Value>, key: &str) -> Parsed<Option<String>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(InvalidReason::BadType),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_alias_normalizes() {
        let a =
            parse_action(r#"{"skill_name":"interact_pixel","arguments":{"intent":"open","x":310,"y":620}}"#).unwrap();
        assert_eq!(a.skill, Skill::InteractPixel { intent: Intent::OpenAccess, coords: Some((310, 620)) });
    }

    #[test]
    fn drop_needs_no_coordinates() {
        let a = parse_action(r#"{"skill_name":"interact_pixel","arguments":{"intent":"drop"}}"#).unwrap();
        assert_eq!(a.skill, Skill::InteractPixel { intent: Intent::Drop, coords: None });
    }

    #[test]
    fn prose_is_not_json() {
        assert_eq!(parse_action("I will now open the fridge"), Err(InvalidReason::NotJson));
        assert_eq!(parse_action(""), Err(InvalidReason::NotJson));
        assert_eq!(parse_action("[1,2]"), Err(InvalidReason::NotJson));
        assert_eq!(
            parse_action(r#"{"skill_name":"look","arguments":{"direction":"up","magnitude":30}} thanks"#),
            Err(InvalidReason::NotJson)
        );
        assert_eq!(
            parse_action(
                "```json\n{\"skill_name\":\"look\",\"arguments\":{\"direction\":\"up\",\"magnitude\":30}}\n```"
            ),
            Err(InvalidReason::NotJson)
        );
    }

    #[test]
    fn two_objects_rejected() {
        let one = r#"{"skill_name":"look","arguments":{"direction":"up","magnitude":30}}"#;
        assert_eq!(parse_action(&format!("{one} {one}")), Err(InvalidReason::MultipleObjects));
        assert_eq!(parse_action(&format!("{one}{one}")), Err(InvalidReason::MultipleObjects));
    }

    #[test]
    fn rejection_reasons() {
        assert_eq!(parse_action(r#"{"skill_name":"stop","arguments":{}}"#), Err(InvalidReason::UnknownSkill));
        assert_eq!(parse_action(r#"{"arguments":{}}"#), Err(InvalidReason::MissingArgument));
        assert_eq!(parse_action(r#"{"skill_name":"look"}"#), Err(InvalidReason::MissingArgument));
        assert_eq!(
            parse_action(r#"{"skill_name":"look","arguments":{"direction":"up"}}"#),
            Err(InvalidReason::MissingArgument)
        );
        assert_eq!(
            parse_action(r#"{"skill_name":"look","arguments":{"direction":"up","magnitude":"30"}}"#),
            Err(InvalidReason::BadType)
        );
        assert_eq!(
            parse_action(r#"{"skill_name":"navigate","arguments":{"mode":"fly","magnitude":1}}"#),
            Err(InvalidReason::BadType)
        );
        assert_eq!(
            parse_action(r#"{"skill_name":"navigate","arguments":{"mode":"forward","magnitude":0}}"#),
            Err(InvalidReason::OutOfRange)
        );
        assert_eq!(
            parse_action(r#"{"skill_name":"interact_pixel","arguments":{"intent":"pick","x":1001,"y":5}}"#),
            Err(InvalidReason::OutOfRange)
        );
        assert_eq!(
            parse_action(r#"{"skill_name":"interact_pixel","arguments":{"intent":"pick","x":-1,"y":5}}"#),
            Err(InvalidReason::OutOfRange)
        );
        assert_eq!(
            parse_action(r#"{"skill_name":"interact_pixel","arguments":{"intent":"pick","x":1.5,"y":5}}"#),
            Err(InvalidReason::BadType)
        );
        assert_eq!(
            parse_action(r#"{"skill_name":"interact_pixel","arguments":{"intent":"smash","x":1,"y":5}}"#),
            Err(InvalidReason::BadType)
        );
        assert_eq!(
            parse_action(r#"{"skill_name":"interact_pixel","arguments":{"intent":"pick","x":10}}"#),
            Err(InvalidReason::MissingArgument)
        );
        assert_eq!(
            parse_action(r#"{"skill_name":"report","arguments":{"status":"success"}}"#),
            Err(InvalidReason::MissingArgument)
        );
    }

    #[test]
    fn unknown_status_becomes_invalid_report() {
        let a = parse_action(r#"{"skill_name":"report","arguments":{"status":"done","summary":"ok"}}"#).unwrap();
        assert_eq!(a.skill, Skill::Report(ReportContent { status: ReportStatus::Invalid, summary: "ok".into() }));
    }

    #[test]
    fn status_normalization() {
        assert_eq!(normalize_status(" Success "), ReportStatus::Success);
        assert_eq!(normalize_status("CLOSED"), ReportStatus::Closed);
        assert_eq!(normalize_status("done"), ReportStatus::Invalid);
        assert_eq!(normalize_status("succeeded"), ReportStatus::Invalid);
    }

    #[test]
    fn alias_table_is_closed() {
        assert_eq!(normalize_intent("Toggle_On"), Some(Intent::Activate));
        assert_eq!(normalize_intent("toggle_off"), Some(Intent::Deactivate));
        assert_eq!(normalize_intent("close"), Some(Intent::CloseAccess));
        assert_eq!(normalize_intent("turn_on"), None);
        assert_eq!(normalize_intent("grab"), None);
    }

    #[test]
    fn optional_fields() {
        let a = parse_action(
            r#"{"skill_name":"look","arguments":{"direction":"down","magnitude":30},"thought":"check the floor","cognitive_state":"searching"}"#,
        )
        .unwrap();
        assert_eq!(a.thought.as_deref(), Some("check the floor"));
        assert_eq!(a.cognitive_state.as_deref(), Some("searching"));
        assert_eq!(
            parse_action(r#"{"skill_name":"look","arguments":{"direction":"down","magnitude":30},"thought":5}"#),
            Err(InvalidReason::BadType)
        );
    }
}
