//! Extraction of plan/step objects and grounded actions from raw model
//! output, plus rendering of actions back to the one-line descriptions used
//! in execution histories.
//!
//! Model output is frequently wrapped in code fences, single-quoted, or
//! surrounded by prose; the parsers here recover from that noise and report
//! which recoveries were applied. They never panic on arbitrary input.

mod loose;

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Action, ClickTarget, ElementKind, Point, Screen, ScrollDirection};
use loose::{first_object_with_keys, LooseValue};

/// A parsed plan: the split step list plus the original plan text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<String>,
    pub raw: String,
}

/// The step the model chose to execute now.
#[derive(Clone, Debug, PartialEq)]
pub struct ChosenStep {
    pub text: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryKind {
    CodeFenceStripped,
    SingleQuotesNormalized,
    TrailingProseDropped,
}

/// What the parser had to do to succeed, and any oddities worth keeping.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub recovery_applied: Vec<RecoveryKind>,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("no JSON object with the required keys found")]
    NoObject,
    #[error("object is missing the `{key}` key")]
    MissingKey { key: &'static str },
    #[error("`{key}` has the wrong shape: {message}")]
    InvalidValue { key: &'static str, message: String },
    #[error("empty plan value")]
    EmptyPlan,
    #[error("empty step value")]
    EmptyStep,
    #[error("unknown action_type `{action_type}`")]
    UnknownAction { action_type: String },
    #[error("{action_type} action is missing the `{key}` key")]
    MissingPayload { action_type: &'static str, key: &'static str },
    #[error("cannot resolve description target `{target}` on this screen")]
    UnresolvedDescription { target: String },
    #[error("unrecognized action description `{text}`")]
    UnknownDescription { text: String },
}

/// Remove Markdown code-fence marker lines, keeping their contents.
fn strip_code_fences(text: &str) -> (String, bool) {
    if !text.contains("```") {
        return (text.to_string(), false);
    }
    let mut stripped = false;
    let kept: Vec<&str> = text
        .lines()
        .filter(|line| {
            let t = line.trim();
            if t.starts_with("```") {
                stripped = true;
                false
            } else {
                true
            }
        })
        .collect();
    (kept.join("\n"), stripped)
}

static STEP_BOUNDARY: OnceLock<Regex> = OnceLock::new();

/// Split a plan string on numbered-step boundaries ("1.", "2)", "Step 3.").
/// A plan without numbering is a single step. Label text ahead of the first
/// boundary is dropped.
pub fn split_plan_steps(plan: &str) -> Vec<String> {
    let re = STEP_BOUNDARY
        .get_or_init(|| Regex::new(r"(?:^|\s)(?:Step\s+)?\d+[.)]\s+").unwrap());
    let mut boundaries: Vec<(usize, usize)> = re.find_iter(plan).map(|m| (m.start(), m.end())).collect();
    if boundaries.is_empty() {
        let t = plan.trim();
        return if t.is_empty() { vec![] } else { vec![t.to_string()] };
    }
    boundaries.push((plan.len(), plan.len()));
    let mut steps = Vec::new();
    for w in boundaries.windows(2) {
        let text = plan[w[0].1..w[1].0].trim();
        if !text.is_empty() {
            steps.push(text.to_string());
        }
    }
    steps
}

/// Extract the first object carrying both `plan` and `step` keys, split the
/// plan into steps, and return the chosen step verbatim.
pub fn parse_plan_step(text: &str) -> Result<(Plan, ChosenStep, ParseDiagnostics), ParseError> {
    let (working, fences) = strip_code_fences(text);
    let obj = first_object_with_keys(&working, &["plan", "step"]).ok_or_else(|| {
        // Distinguish "an object without the keys" from "no object at all"
        // only as far as naming the missing key helps debugging.
        match first_object_with_keys(&working, &["plan"]) {
            Some(_) => ParseError::MissingKey { key: "step" },
            None => match first_object_with_keys(&working, &["step"]) {
                Some(_) => ParseError::MissingKey { key: "plan" },
                None => ParseError::NoObject,
            },
        }
    })?;

    let mut diagnostics = ParseDiagnostics { recovery_applied: vec![], ok: true, notes: vec![] };
    if fences {
        diagnostics.recovery_applied.push(RecoveryKind::CodeFenceStripped);
    }
    if obj.single_quoted {
        diagnostics.recovery_applied.push(RecoveryKind::SingleQuotesNormalized);
    }
    if loose::char_len(working.trim()) != obj.end - obj.start {
        diagnostics.recovery_applied.push(RecoveryKind::TrailingProseDropped);
    }

    let raw_plan = match obj.get("plan").unwrap() {
        LooseValue::Str(s) => s.clone(),
        LooseValue::Array(items) => {
            let strs: Vec<&str> = items.iter().filter_map(|v| v.as_str()).collect();
            if strs.len() != items.len() {
                return Err(ParseError::InvalidValue {
                    key: "plan",
                    message: "array plan must contain only strings".into(),
                });
            }
            strs.join("\n")
        }
        other => {
            return Err(ParseError::InvalidValue {
                key: "plan",
                message: format!("expected a string, got {other:?}"),
            })
        }
    };
    let step = match obj.get("step").unwrap() {
        LooseValue::Str(s) => s.clone(),
        other => {
            return Err(ParseError::InvalidValue {
                key: "step",
                message: format!("expected a string, got {other:?}"),
            })
        }
    };
    if step.trim().is_empty() {
        return Err(ParseError::EmptyStep);
    }
    let steps = split_plan_steps(&raw_plan);
    if steps.is_empty() {
        return Err(ParseError::EmptyPlan);
    }
    if !steps.iter().any(|s| s.contains(step.trim()) || step.contains(s.as_str())) {
        diagnostics
            .notes
            .push("chosen step does not textually appear in the plan".to_string());
    }
    Ok((Plan { steps, raw: raw_plan }, ChosenStep { text: step }, diagnostics))
}

fn int_value(v: &LooseValue) -> Option<i64> {
    match v {
        LooseValue::Int(n) => Some(*n),
        LooseValue::Float(f) if f.fract() == 0.0 && f.is_finite() => Some(*f as i64),
        LooseValue::Str(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// Map raw model text to an action from the closed set. Unknown action
/// types and missing payload keys are typed errors, never panics; the
/// caller counts them as incorrect predictions.
pub fn parse_action(text: &str) -> Result<Action, ParseError> {
    let (working, _) = strip_code_fences(text);
    let obj = first_object_with_keys(&working, &["action_type"]).ok_or(ParseError::NoObject)?;
    let action_type = match obj.get("action_type").unwrap() {
        LooseValue::Str(s) => s.clone(),
        other => format!("{other:?}"),
    };
    match action_type.as_str() {
        "click" => {
            let idx = obj
                .get("idx")
                .ok_or(ParseError::MissingPayload { action_type: "click", key: "idx" })?;
            let idx = int_value(idx).ok_or_else(|| ParseError::InvalidValue {
                key: "idx",
                message: "expected an integer".into(),
            })?;
            if idx < 0 {
                return Err(ParseError::InvalidValue {
                    key: "idx",
                    message: format!("negative element index {idx}"),
                });
            }
            Ok(Action::Click { target: ClickTarget::Element(idx as usize) })
        }
        "scroll" => {
            let dir = obj
                .get("direction")
                .ok_or(ParseError::MissingPayload { action_type: "scroll", key: "direction" })?;
            let dir = dir.as_str().ok_or_else(|| ParseError::InvalidValue {
                key: "direction",
                message: "expected a string".into(),
            })?;
            let direction = ScrollDirection::parse(dir).ok_or_else(|| ParseError::InvalidValue {
                key: "direction",
                message: format!("`{dir}` is not one of up/down/left/right"),
            })?;
            Ok(Action::Scroll { direction })
        }
        "type" => {
            let text = obj
                .get("text")
                .ok_or(ParseError::MissingPayload { action_type: "type", key: "text" })?;
            let text = text.as_str().ok_or_else(|| ParseError::InvalidValue {
                key: "text",
                message: "expected a string".into(),
            })?;
            Ok(Action::Type { text: text.to_string() })
        }
        "navigate_home" => Ok(Action::Navigate { dest: crate::model::NavDest::Home }),
        "navigate_back" => Ok(Action::Navigate { dest: crate::model::NavDest::Back }),
        "press_enter" => Ok(Action::PressEnter),
        "status_complete" => Ok(Action::StatusComplete),
        other => Err(ParseError::UnknownAction { action_type: other.to_string() }),
    }
}

/// Render an action as the one-line description used in execution
/// histories. With screen context, clicks name the target element's text
/// when it has any, otherwise its index; point clicks render empty
/// brackets. Typed text is not embedded.
pub fn describe_action(a: &Action, screen: Option<&Screen>) -> String {
    match a {
        Action::Click { target } => match target {
            ClickTarget::Element(idx) => {
                let label = screen
                    .and_then(|s| s.element(*idx))
                    .filter(|e| !e.text.is_empty())
                    .map(|e| e.text.clone());
                match label {
                    Some(text) => format!("click [{text}]"),
                    None => format!("click [{idx}]"),
                }
            }
            ClickTarget::Point(_) => "click []".to_string(),
        },
        Action::Scroll { direction } => format!("scroll {}", direction.as_str()),
        Action::Type { .. } => "type".to_string(),
        Action::Navigate { dest: crate::model::NavDest::Home } => "navigate_home".to_string(),
        Action::Navigate { dest: crate::model::NavDest::Back } => "navigate_back".to_string(),
        Action::PressEnter => "press_enter".to_string(),
        Action::StatusComplete => "status_complete".to_string(),
    }
}

/// Parse an action back out of a description line. The description grammar
/// is lossy for point clicks (they render as `click []`), so those come
/// back as a screen-center point click. Text click targets resolve against
/// the screen by exact element text.
pub fn parse_description(text: &str, screen: Option<&Screen>) -> Result<Action, ParseError> {
    let t = text.trim();
    match t {
        "status_complete" => return Ok(Action::StatusComplete),
        "press_enter" => return Ok(Action::PressEnter),
        "navigate_home" => return Ok(Action::Navigate { dest: crate::model::NavDest::Home }),
        "navigate_back" => return Ok(Action::Navigate { dest: crate::model::NavDest::Back }),
        "type" => return Ok(Action::Type { text: String::new() }),
        _ => {}
    }
    if let Some(rest) = t.strip_prefix("scroll ") {
        return ScrollDirection::parse(rest.trim())
            .map(|direction| Action::Scroll { direction })
            .ok_or_else(|| ParseError::UnknownDescription { text: t.to_string() });
    }
    if t.starts_with("click") {
        let open = t.find('[');
        let close = t.rfind(']');
        if let (Some(open), Some(close)) = (open, close) {
            if open < close {
                let inner = &t[open + 1..close];
                if inner.is_empty() {
                    return Ok(Action::Click { target: ClickTarget::Point(Point::new(0.5, 0.5)) });
                }
                if let Ok(idx) = inner.parse::<usize>() {
                    return Ok(Action::Click { target: ClickTarget::Element(idx) });
                }
                if let Some(s) = screen {
                    if let Some(el) = s
                        .elements
                        .iter()
                        .find(|e| matches!(e.kind, ElementKind::Text) && e.text == inner)
                    {
                        return Ok(Action::Click { target: ClickTarget::Element(el.idx) });
                    }
                }
                return Err(ParseError::UnresolvedDescription { target: inner.to_string() });
            }
        }
        return Err(ParseError::UnknownDescription { text: t.to_string() });
    }
    Err(ParseError::UnknownDescription { text: t.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BBox, NavDest, UiElement};

    #[test]
    fn completion_clause_parses_with_typo_preserved() {
        let text = "{'plan': '1. Mark the task as complete', 'step': 'Mark the task as complet'}";
        let (plan, step, diag) = parse_plan_step(text).unwrap();
        assert_eq!(plan.steps, vec!["Mark the task as complete".to_string()]);
        assert_eq!(step.text, "Mark the task as complet");
        assert!(diag.recovery_applied.contains(&RecoveryKind::SingleQuotesNormalized));
    }

    #[test]
    fn fenced_double_quoted_output() {
        let text = "```json\n{\"plan\": \"1. A 2. B\", \"step\": \"A\"}\n```";
        let (plan, step, diag) = parse_plan_step(text).unwrap();
        assert_eq!(plan.steps, vec!["A".to_string(), "B".to_string()]);
        assert_eq!(step.text, "A");
        assert_eq!(diag.recovery_applied, vec![RecoveryKind::CodeFenceStripped]);
    }

    #[test]
    fn surrounding_prose_is_dropped() {
        let text = "Sure! {'plan': '1. X', 'step': 'X'} hope this helps";
        let (_, step, diag) = parse_plan_step(text).unwrap();
        assert_eq!(step.text, "X");
        assert!(diag.recovery_applied.contains(&RecoveryKind::TrailingProseDropped));
    }

    #[test]
    fn missing_keys_are_named() {
        assert_eq!(
            parse_plan_step("{'plan': '1. X'}").unwrap_err(),
            ParseError::MissingKey { key: "step" }
        );
        assert_eq!(
            parse_plan_step("{'step': 'X'}").unwrap_err(),
            ParseError::MissingKey { key: "plan" }
        );
        assert_eq!(parse_plan_step("nothing here").unwrap_err(), ParseError::NoObject);
    }

    #[test]
    fn empty_step_rejected() {
        assert_eq!(
            parse_plan_step("{'plan': '1. X', 'step': ''}").unwrap_err(),
            ParseError::EmptyStep
        );
    }

    #[test]
    fn step_prefixed_numbering() {
        let steps = split_plan_steps("Step 1. Open settings Step 2. Tap About");
        assert_eq!(steps, vec!["Open settings".to_string(), "Tap About".to_string()]);
    }

    #[test]
    fn unnumbered_plan_is_one_step() {
        assert_eq!(split_plan_steps("Just do the thing"), vec!["Just do the thing".to_string()]);
    }

    #[test]
    fn multiline_numbering() {
        let steps = split_plan_steps("1. Open the app\n2. Search for it\n3. Done");
        assert_eq!(steps.len(), 3);
        assert_eq!(steps[2], "Done");
    }

    #[test]
    fn click_action_parses() {
        assert_eq!(
            parse_action("{'action_type': 'click', 'idx': 15}").unwrap(),
            Action::Click { target: ClickTarget::Element(15) }
        );
    }

    #[test]
    fn status_complete_parses() {
        assert_eq!(
            parse_action("{\"action_type\": \"status_complete\"}").unwrap(),
            Action::StatusComplete
        );
    }

    #[test]
    fn unknown_action_type_is_typed_error() {
        assert_eq!(
            parse_action("{'action_type': 'swipe'}").unwrap_err(),
            ParseError::UnknownAction { action_type: "swipe".into() }
        );
    }

    #[test]
    fn missing_payload_keys() {
        assert_eq!(
            parse_action("{'action_type': 'click'}").unwrap_err(),
            ParseError::MissingPayload { action_type: "click", key: "idx" }
        );
        assert_eq!(
            parse_action("{'action_type': 'scroll'}").unwrap_err(),
            ParseError::MissingPayload { action_type: "scroll", key: "direction" }
        );
        assert_eq!(
            parse_action("{'action_type': 'type'}").unwrap_err(),
            ParseError::MissingPayload { action_type: "type", key: "text" }
        );
    }

    fn screen_with(texts: &[&str]) -> Screen {
        Screen {
            elements: texts
                .iter()
                .enumerate()
                .map(|(i, t)| UiElement {
                    idx: i,
                    kind: if t.is_empty() {
                        ElementKind::Icon { class: "ICON_MIC".into() }
                    } else {
                        ElementKind::Text
                    },
                    text: t.to_string(),
                    bbox: BBox::new(Point::new(0.0, 0.0), Point::new(0.1, 0.1)),
                })
                .collect(),
            caption: None,
            image_ref: None,
        }
    }

    #[test]
    fn describe_click_uses_text_else_idx() {
        let s = screen_with(&["", "", "", "", "", "Shopping"]);
        let icon_click = Action::Click { target: ClickTarget::Element(1) };
        assert_eq!(describe_action(&icon_click, Some(&s)), "click [1]");
        let text_click = Action::Click { target: ClickTarget::Element(5) };
        assert_eq!(describe_action(&text_click, Some(&s)), "click [Shopping]");
        let idx9 = Action::Click { target: ClickTarget::Element(9) };
        assert_eq!(describe_action(&idx9, Some(&s)), "click [9]");
    }

    #[test]
    fn describe_covers_every_variant() {
        assert_eq!(describe_action(&Action::Type { text: "hello".into() }, None), "type");
        assert_eq!(
            describe_action(&Action::Scroll { direction: ScrollDirection::Up }, None),
            "scroll up"
        );
        assert_eq!(describe_action(&Action::Navigate { dest: NavDest::Home }, None), "navigate_home");
        assert_eq!(describe_action(&Action::Navigate { dest: NavDest::Back }, None), "navigate_back");
        assert_eq!(describe_action(&Action::PressEnter, None), "press_enter");
        assert_eq!(describe_action(&Action::StatusComplete, None), "status_complete");
        let p = Action::Click { target: ClickTarget::Point(Point::new(0.2, 0.3)) };
        assert_eq!(describe_action(&p, None), "click []");
    }

    #[test]
    fn descriptions_reparse_to_same_variant() {
        let s = screen_with(&["Open", "Shopping", ""]);
        let actions = [
            Action::Click { target: ClickTarget::Element(1) },
            Action::Click { target: ClickTarget::Element(2) },
            Action::Click { target: ClickTarget::Point(Point::new(0.4, 0.4)) },
            Action::Scroll { direction: ScrollDirection::Left },
            Action::Type { text: "abc".into() },
            Action::Navigate { dest: NavDest::Home },
            Action::Navigate { dest: NavDest::Back },
            Action::PressEnter,
            Action::StatusComplete,
        ];
        for a in actions {
            let desc = describe_action(&a, Some(&s));
            let back = parse_description(&desc, Some(&s)).unwrap();
            assert_eq!(back.kind(), a.kind(), "description {desc:?}");
        }
    }

    #[test]
    fn unresolvable_description_targets_error() {
        let s = screen_with(&["Open"]);
        assert!(matches!(
            parse_description("click [Missing]", Some(&s)),
            Err(ParseError::UnresolvedDescription { .. })
        ));
        assert!(matches!(
            parse_description("hold [3]", Some(&s)),
            Err(ParseError::UnknownDescription { .. })
        ));
    }
}
