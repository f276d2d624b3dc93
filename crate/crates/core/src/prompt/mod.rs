//! Prompt construction for every strategy: dynamic planning (plain and
//! with-reference), action grounding, and the no-planning / static-plan /
//! plan-only / ReAct baselines.
//!
//! The fixed template texts live under `src/prompt/templates/` and are
//! embedded verbatim, so the exact bytes sent to a model are auditable in
//! the repository. All builders are pure functions of their arguments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::estimate_tokens;
use crate::screen::ScreenMarkup;

pub const PLANNING_PREAMBLE: &str = include_str!("templates/planning_preamble.txt");
pub const PLANNING_GUIDE: &str = include_str!("templates/planning_guide.txt");
pub const ROBOT_FRAMING: &str = include_str!("templates/robot_framing.txt");
pub const ACTION_SPACE: &str = include_str!("templates/action_space.txt");
pub const REFERENCE_INTRO: &str = include_str!("templates/reference_intro.txt");
pub const REACT_FRAMING: &str = include_str!("templates/react_framing.txt");

pub const HISTORY_HEADING: &str = "Here are previous actions: (format: action \u{2192} action description)";
pub const SCREEN_HEADING: &str = "The current on-screen input is:";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub role: Role,
    pub text: String,
    /// Opaque screenshot handle, attached when the screen has one; only
    /// multimodal backends send it.
    pub image_ref: Option<String>,
}

impl Message {
    pub fn user(text: String) -> Self {
        Self { role: Role::User, text, image_ref: None }
    }

    pub fn assistant(text: String) -> Self {
        Self { role: Role::Assistant, text, image_ref: None }
    }
}

/// How many past rounds a ReAct transcript retains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HistoryLen {
    Bounded(usize),
    Unbounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyKind {
    Np,
    Sp,
    Dp,
    DPoT,
    DPoTWithReference,
    React { history_len: HistoryLen },
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Np => "np",
            StrategyKind::Sp => "sp",
            StrategyKind::Dp => "dp",
            StrategyKind::DPoT => "dpot",
            StrategyKind::DPoTWithReference => "dpot-ref",
            StrategyKind::React { .. } => "react",
        }
    }

    /// Whether the strategy runs a planning call (and so can take injected
    /// plans).
    pub fn plans(&self) -> bool {
        matches!(
            self,
            StrategyKind::Sp | StrategyKind::Dp | StrategyKind::DPoT | StrategyKind::DPoTWithReference
        )
    }
}

/// One complete model request: ordered messages plus the strategy and turn
/// that produced it. The first message always carries the task framing.
#[derive(Clone, Debug, PartialEq)]
pub struct PromptBundle {
    pub messages: Vec<Message>,
    pub strategy: StrategyKind,
    pub turn: usize,
}

impl PromptBundle {
    /// All message text joined with role markers, used for digests and
    /// token estimates.
    pub fn full_text(&self) -> String {
        let mut out = String::new();
        for m in &self.messages {
            out.push_str(m.role.as_str());
            out.push_str(":\n");
            out.push_str(&m.text);
            out.push('\n');
        }
        out
    }

    pub fn estimated_tokens(&self) -> u64 {
        self.messages.iter().map(|m| estimate_tokens(&m.text)).sum()
    }
}

/// One reference episode rendered into the with-reference planning prompt.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceEntry {
    pub goal: String,
    /// Caption of the episode's initial screen; empty when none was
    /// recorded (rendered as "(no caption)").
    pub initial_caption: String,
    pub action_descriptions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceBlock {
    pub entries: Vec<ReferenceEntry>,
}

/// One completed ReAct round: what the agent saw and its verbatim response
/// (thought plus action).
#[derive(Clone, Debug, PartialEq)]
pub struct ReactRound {
    pub observation: String,
    pub response: String,
}

/// Per-call knobs shared by all builders.
#[derive(Clone, Debug, Default)]
pub struct PromptOptions {
    pub turn: usize,
    pub image_ref: Option<String>,
    /// Optional token cap; oldest history lines (or ReAct rounds) are
    /// dropped first, the goal and current screen always survive.
    pub budget_tokens: Option<u64>,
}

/// Context a baseline builder needs beyond the screen and goal.
#[derive(Clone, Copy, Debug)]
pub enum BaselineContext<'a> {
    Np,
    Sp { frozen_plan: &'a str },
    Dp,
    React { rounds: &'a [ReactRound] },
}

impl BaselineContext<'_> {
    fn name(&self) -> &'static str {
        match self {
            BaselineContext::Np => "np",
            BaselineContext::Sp { .. } => "sp",
            BaselineContext::Dp => "dp",
            BaselineContext::React { .. } => "react",
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("reference planning needs at least one reference entry")]
    EmptyReferences,
    #[error("baseline context `{got}` does not match strategy `{expected}`")]
    ContextMismatch { expected: &'static str, got: &'static str },
}

fn goal_line(goal: &str) -> String {
    format!("**Your ultimate goal is: {goal}.**")
}

fn screen_section(markup: &ScreenMarkup) -> String {
    format!("{SCREEN_HEADING}\n{}\n", markup.to_text())
}

fn history_section(lines: &[String]) -> String {
    let body = if lines.is_empty() { "None".to_string() } else { lines.join("\n") };
    format!("{HISTORY_HEADING}\nPrevious Actions:\n{body}\n")
}

fn steps_section(steps: &[String]) -> String {
    let body = if steps.is_empty() {
        "None".to_string()
    } else {
        steps
            .iter()
            .enumerate()
            .map(|(i, s)| format!("Step {}. {s}", i + 1))
            .collect::<Vec<_>>()
            .join("\n")
    };
    format!("And the previous steps:\nPrevious Steps:\n{body}\n")
}

fn number_word(n: usize) -> String {
    match n {
        1 => "one".into(),
        2 => "two".into(),
        3 => "three".into(),
        4 => "four".into(),
        5 => "five".into(),
        other => other.to_string(),
    }
}

fn reference_section(refs: &ReferenceBlock) -> String {
    let mut out = String::new();
    if refs.entries.len() == 2 {
        out.push_str(REFERENCE_INTRO.trim_end());
    } else if refs.entries.len() == 1 {
        out.push_str("I also give you a similar example as a reference, here are its goal, the initial caption of mobile screen, and all the execution actions to complete goal:");
    } else {
        out.push_str(&format!(
            "I also give you {} similar examples as a reference, here are their goal, the initial caption of mobile screen, and all the execution actions to complete goal:",
            number_word(refs.entries.len())
        ));
    }
    out.push('\n');
    for entry in &refs.entries {
        out.push_str(&format!("Goal: {}\n", entry.goal));
        let caption = if entry.initial_caption.is_empty() { "(no caption)" } else { &entry.initial_caption };
        out.push_str(&format!("Caption: {caption}\n"));
        out.push_str("Execution history: ");
        out.push_str(&entry.action_descriptions.join("\n"));
        out.push('\n');
    }
    out
}

fn single_user_bundle(text: String, strategy: StrategyKind, opts: &PromptOptions) -> PromptBundle {
    PromptBundle {
        messages: vec![Message { role: Role::User, text, image_ref: opts.image_ref.clone() }],
        strategy,
        turn: opts.turn,
    }
}

fn assemble_planning(
    goal: &str,
    markup: &ScreenMarkup,
    history_lines: &[String],
    prev_steps: &[String],
    refs: Option<&ReferenceBlock>,
    injected_plan: Option<&str>,
) -> String {
    let mut body = String::new();
    body.push_str(PLANNING_PREAMBLE.trim_end());
    body.push_str("\n\n");
    body.push_str(&goal_line(goal));
    body.push('\n');
    if let Some(refs) = refs {
        body.push_str(&reference_section(refs));
    }
    body.push_str(&screen_section(markup));
    body.push_str(&history_section(history_lines));
    body.push_str(&steps_section(prev_steps));
    body.push('\n');
    match injected_plan {
        None => body.push_str(PLANNING_GUIDE.trim_end()),
        Some(plan) => {
            body.push_str(&format!("Here is the plan to follow:\nPlan:\n{plan}\n"));
            body.push_str("Based on the current screen and Previous Steps, provide the **immediate** step from the Plan that needs to be taken now.\n");
            body.push_str("**Output Format:** A JSON dictionary strictly following the format: {'plan': '...<The Plan>', 'step': '...<Your Step Here>'}\n");
            body.push_str("**Please do not output any content other than the JSON format.**");
        }
    }
    body
}

/// Apply the history budget: drop oldest history lines until the assembled
/// planning body fits. The goal and current screen are never dropped.
fn budgeted_history<'a>(
    budget: Option<u64>,
    goal: &str,
    markup: &ScreenMarkup,
    history_lines: &'a [String],
    prev_steps: &[String],
    refs: Option<&ReferenceBlock>,
    injected_plan: Option<&str>,
) -> &'a [String] {
    let Some(budget) = budget else { return history_lines };
    let mut keep = history_lines;
    loop {
        let body = assemble_planning(goal, markup, keep, prev_steps, refs, injected_plan);
        if estimate_tokens(&body) <= budget || keep.is_empty() {
            return keep;
        }
        keep = &keep[1..];
    }
}

/// Build the per-turn planning prompt: role framing, goal wrapper, screen
/// block, previous actions, previous steps, and the plan/step output
/// contract. Empty history and steps render as the literal "None".
pub fn build_planning_prompt(
    goal: &str,
    markup: &ScreenMarkup,
    history_lines: &[String],
    prev_steps: &[String],
    opts: &PromptOptions,
) -> PromptBundle {
    debug_assert!(!goal.is_empty(), "planning prompts need a non-empty goal");
    let kept = budgeted_history(opts.budget_tokens, goal, markup, history_lines, prev_steps, None, None);
    let body = assemble_planning(goal, markup, kept, prev_steps, None, None);
    single_user_bundle(body, StrategyKind::DPoT, opts)
}

/// Planning prompt with a reference section (similar episodes' goals,
/// initial captions, and full action histories) ahead of the current
/// screen block.
pub fn build_planning_prompt_with_reference(
    goal: &str,
    markup: &ScreenMarkup,
    history_lines: &[String],
    prev_steps: &[String],
    refs: &ReferenceBlock,
    opts: &PromptOptions,
) -> Result<PromptBundle, PromptError> {
    if refs.entries.is_empty() {
        return Err(PromptError::EmptyReferences);
    }
    let kept = budgeted_history(opts.budget_tokens, goal, markup, history_lines, prev_steps, Some(refs), None);
    let body = assemble_planning(goal, markup, kept, prev_steps, Some(refs), None);
    Ok(single_user_bundle(body, StrategyKind::DPoTWithReference, opts))
}

/// Planning-shaped prompt that injects an externally supplied plan and asks
/// only for the immediate step. Used when human-annotated plans replace
/// model planning.
pub fn build_step_selection_prompt(
    goal: &str,
    markup: &ScreenMarkup,
    history_lines: &[String],
    prev_steps: &[String],
    plan: &str,
    opts: &PromptOptions,
) -> PromptBundle {
    let kept = budgeted_history(opts.budget_tokens, goal, markup, history_lines, prev_steps, None, Some(plan));
    let body = assemble_planning(goal, markup, kept, prev_steps, None, Some(plan));
    single_user_bundle(body, StrategyKind::DPoT, opts)
}

/// Ask the model to turn a chosen step into exactly one action object from
/// the closed action set, with the screen block so element indices ground.
pub fn build_grounding_prompt(
    step: &str,
    markup: &ScreenMarkup,
    goal: &str,
    opts: &PromptOptions,
) -> PromptBundle {
    debug_assert!(!step.is_empty(), "grounding prompts need a non-empty step");
    let mut body = String::new();
    body.push_str(ROBOT_FRAMING.trim_end());
    body.push('\n');
    body.push_str(&goal_line(goal));
    body.push('\n');
    body.push_str(&screen_section(markup));
    body.push_str(&format!("The step to be performed now is: {step}\n"));
    body.push_str("Express this step as exactly one action, a JSON dictionary with the key \"action_type\".\n");
    body.push_str(ACTION_SPACE.trim_end());
    body.push('\n');
    body.push_str("**Please do not output any content other than the JSON format.**");
    single_user_bundle(body, StrategyKind::DPoT, opts)
}

fn action_request(goal: &str, markup: &ScreenMarkup, plan_section: Option<&str>) -> String {
    let mut body = String::new();
    body.push_str(ROBOT_FRAMING.trim_end());
    body.push('\n');
    body.push_str(&goal_line(goal));
    body.push('\n');
    body.push_str(&screen_section(markup));
    if let Some(plan) = plan_section {
        body.push_str(&format!("Here is the plan for this episode:\nPlan:\n{plan}\n"));
    }
    body.push_str("Predict the next action to perform on the current screen as a JSON dictionary with the key \"action_type\".\n");
    body.push_str(ACTION_SPACE.trim_end());
    body.push('\n');
    body.push_str("**Please do not output any content other than the JSON format.**");
    body
}

/// Build a baseline prompt. NP asks for the action directly; SP embeds the
/// turn-1 plan verbatim every turn; DP is the planning prompt without the
/// previous-actions and previous-steps sections; ReAct is a multi-message
/// transcript of the retained rounds plus the current observation.
pub fn build_baseline_prompt(
    kind: &StrategyKind,
    goal: &str,
    markup: &ScreenMarkup,
    ctx: &BaselineContext<'_>,
    opts: &PromptOptions,
) -> Result<PromptBundle, PromptError> {
    match (kind, ctx) {
        (StrategyKind::Np, BaselineContext::Np) => {
            Ok(single_user_bundle(action_request(goal, markup, None), StrategyKind::Np, opts))
        }
        (StrategyKind::Sp, BaselineContext::Sp { frozen_plan }) => Ok(single_user_bundle(
            action_request(goal, markup, Some(frozen_plan)),
            StrategyKind::Sp,
            opts,
        )),
        (StrategyKind::Dp, BaselineContext::Dp) => {
            let mut body = String::new();
            body.push_str(PLANNING_PREAMBLE.trim_end());
            body.push_str("\n\n");
            body.push_str(&goal_line(goal));
            body.push('\n');
            body.push_str(&screen_section(markup));
            body.push('\n');
            body.push_str(PLANNING_GUIDE.trim_end());
            Ok(single_user_bundle(body, StrategyKind::Dp, opts))
        }
        (StrategyKind::React { history_len }, BaselineContext::React { rounds }) => {
            let mut retained: &[ReactRound] = match history_len {
                HistoryLen::Unbounded => rounds,
                HistoryLen::Bounded(n) => &rounds[rounds.len().saturating_sub(*n)..],
            };
            loop {
                let bundle = react_bundle(goal, markup, retained, opts, *kind);
                match opts.budget_tokens {
                    Some(budget) if bundle.estimated_tokens() > budget && !retained.is_empty() => {
                        retained = &retained[1..];
                    }
                    _ => return Ok(bundle),
                }
            }
        }
        (kind, ctx) => Err(PromptError::ContextMismatch { expected: kind.name(), got: ctx.name() }),
    }
}

fn react_bundle(
    goal: &str,
    markup: &ScreenMarkup,
    retained: &[ReactRound],
    opts: &PromptOptions,
    strategy: StrategyKind,
) -> PromptBundle {
    let mut framing = String::new();
    framing.push_str(ROBOT_FRAMING.trim_end());
    framing.push('\n');
    framing.push_str(REACT_FRAMING.trim_end());
    framing.push('\n');
    framing.push_str(ACTION_SPACE.trim_end());
    framing.push('\n');
    framing.push_str(&goal_line(goal));

    let mut messages = vec![Message::user(framing)];
    for round in retained {
        messages.push(Message::user(format!("{SCREEN_HEADING}\n{}", round.observation)));
        messages.push(Message::assistant(round.response.clone()));
    }
    messages.push(Message {
        role: Role::User,
        text: format!("{SCREEN_HEADING}\n{}", markup.to_text()),
        image_ref: opts.image_ref.clone(),
    });
    PromptBundle {
        messages,
        strategy,
        turn: opts.turn,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BBox, ElementKind, Point, Screen, UiElement};
    use crate::screen::serialize_screen;

    fn markup(n: usize) -> ScreenMarkup {
        let screen = Screen {
            elements: (0..n)
                .map(|i| UiElement {
                    idx: i,
                    kind: ElementKind::Text,
                    text: format!("Item {i}"),
                    bbox: BBox::new(Point::new(0.0, 0.0), Point::new(0.2, 0.1)),
                })
                .collect(),
            caption: None,
            image_ref: None,
        };
        serialize_screen(&screen)
    }

    fn count(haystack: &str, needle: &str) -> usize {
        haystack.matches(needle).count()
    }

    #[test]
    fn planning_prompt_carries_all_sections_in_order() {
        let history = vec![
            "{\"step_idx\": 0, \"action_description\": \"scroll up\"}".to_string(),
            "{\"step_idx\": 1, \"action_description\": \"click []\"}".to_string(),
            "{\"step_idx\": 2, \"action_description\": \"scroll up\"}".to_string(),
        ];
        let steps = vec![
            "Swipe up from the bottom of the screen to access the app drawer.".to_string(),
            "Tap on the 'Settings' icon to open the settings menu.".to_string(),
            "Scroll up to reveal more settings options.".to_string(),
        ];
        let b = build_planning_prompt(
            "check out phone information",
            &markup(3),
            &history,
            &steps,
            &PromptOptions::default(),
        );
        let text = &b.messages[0].text;
        for line in &history {
            assert!(text.contains(line.as_str()));
        }
        assert!(text.contains("Step 3. Scroll up to reveal more settings options."));
        let goal_pos = text.find("**Your ultimate goal is: check out phone information.**").unwrap();
        let screen_pos = text.find(SCREEN_HEADING).unwrap();
        let hist_pos = text.find("Previous Actions:").unwrap();
        let steps_pos = text.find("Previous Steps:").unwrap();
        let guide_pos = text.find("A JSON dictionary strictly following the format").unwrap();
        assert!(goal_pos < screen_pos && screen_pos < hist_pos && hist_pos < steps_pos && steps_pos < guide_pos);
    }

    #[test]
    fn turn_one_renders_none_placeholders() {
        let b = build_planning_prompt("g1", &markup(2), &[], &[], &PromptOptions::default());
        let text = &b.messages[0].text;
        assert!(text.contains("Previous Actions:\nNone"));
        assert!(text.contains("Previous Steps:\nNone"));
    }

    #[test]
    fn goal_wrapper_appears_exactly_once() {
        for hist_len in [0usize, 1, 5] {
            let history: Vec<String> = (0..hist_len)
                .map(|i| format!("{{\"step_idx\": {i}, \"action_description\": \"scroll up\"}}"))
                .collect();
            let b = build_planning_prompt("open the files app", &markup(4), &history, &[], &PromptOptions::default());
            assert_eq!(count(&b.messages[0].text, "Your ultimate goal is:"), 1);
            assert_eq!(count(&b.messages[0].text, "open the files app"), 1);
        }
    }

    #[test]
    fn reference_prompt_lists_every_reference_before_the_screen() {
        let refs = ReferenceBlock {
            entries: vec![
                ReferenceEntry {
                    goal: "What's the price of the snow blower?".into(),
                    initial_caption: "A store listing screen.".into(),
                    action_descriptions: (0..8)
                        .map(|i| format!("{{\"step_idx\": {i}, \"action_description\": \"click [{i}]\"}}"))
                        .chain(std::iter::once(
                            "{\"step_idx\": 8, \"action_description\": \"status_complete\"}".to_string(),
                        ))
                        .collect(),
                },
                ReferenceEntry {
                    goal: "What's the price of the new phone?".into(),
                    initial_caption: String::new(),
                    action_descriptions: (0..9)
                        .map(|i| format!("{{\"step_idx\": {i}, \"action_description\": \"scroll up\"}}"))
                        .chain(std::iter::once(
                            "{\"step_idx\": 9, \"action_description\": \"status_complete\"}".to_string(),
                        ))
                        .collect(),
                },
            ],
        };
        let b = build_planning_prompt_with_reference(
            "What is the price of a ladder?",
            &markup(2),
            &[],
            &[],
            &refs,
            &PromptOptions::default(),
        )
        .unwrap();
        let text = &b.messages[0].text;
        assert!(text.contains("What's the price of the snow blower?"));
        assert!(text.contains("What's the price of the new phone?"));
        assert_eq!(count(text, "status_complete"), 2);
        assert!(text.contains("(no caption)"));
        // 9 + 10 action-description lines between the two references.
        assert_eq!(count(text, "action_description"), 19);
        let ref_pos = text.find("Goal: What's the price of the snow blower?").unwrap();
        let screen_pos = text.find(SCREEN_HEADING).unwrap();
        assert!(ref_pos < screen_pos);
    }

    #[test]
    fn single_reference_has_no_placeholder() {
        let refs = ReferenceBlock {
            entries: vec![ReferenceEntry {
                goal: "only one".into(),
                initial_caption: "cap".into(),
                action_descriptions: vec!["{\"step_idx\": 0, \"action_description\": \"status_complete\"}".into()],
            }],
        };
        let b = build_planning_prompt_with_reference("g", &markup(1), &[], &[], &refs, &PromptOptions::default())
            .unwrap();
        assert_eq!(count(&b.messages[0].text, "Goal: "), 1);
        let empty = ReferenceBlock { entries: vec![] };
        assert_eq!(
            build_planning_prompt_with_reference("g", &markup(1), &[], &[], &empty, &PromptOptions::default()),
            Err(PromptError::EmptyReferences)
        );
    }

    #[test]
    fn grounding_prompt_enumerates_the_action_set() {
        let b = build_grounding_prompt("Tap on the 'Settings' icon", &markup(5), "open settings", &PromptOptions::default());
        let text = &b.messages[0].text;
        assert!(text.contains("action_type"));
        for t in ["click", "scroll", "type", "navigate_home", "navigate_back", "press_enter", "status_complete"] {
            assert!(text.contains(t), "missing {t}");
        }
    }

    #[test]
    fn grounding_is_smaller_than_planning_for_the_same_screen() {
        let m = markup(12);
        let planning = build_planning_prompt("a goal", &m, &[], &[], &PromptOptions::default());
        let grounding = build_grounding_prompt("tap the item", &m, "a goal", &PromptOptions::default());
        assert!(grounding.estimated_tokens() < planning.estimated_tokens());
    }

    #[test]
    fn np_has_no_plan_section() {
        let b = build_baseline_prompt(&StrategyKind::Np, "g", &markup(2), &BaselineContext::Np, &PromptOptions::default())
            .unwrap();
        let text = &b.messages[0].text;
        assert!(!text.contains("Plan:"));
        assert!(text.contains("Predict the next action"));
    }

    #[test]
    fn sp_plan_section_bytes_are_frozen() {
        let plan = "1. Open settings 2. Tap About phone";
        let t2 = build_baseline_prompt(
            &StrategyKind::Sp,
            "g",
            &markup(2),
            &BaselineContext::Sp { frozen_plan: plan },
            &PromptOptions { turn: 1, ..Default::default() },
        )
        .unwrap();
        let t3 = build_baseline_prompt(
            &StrategyKind::Sp,
            "g",
            &markup(2),
            &BaselineContext::Sp { frozen_plan: plan },
            &PromptOptions { turn: 2, ..Default::default() },
        )
        .unwrap();
        let section = format!("Here is the plan for this episode:\nPlan:\n{plan}\n");
        assert!(t2.messages[0].text.contains(&section));
        assert_eq!(
            t2.messages[0].text.find(&section),
            t3.messages[0].text.find(&section)
        );
        assert_eq!(t2.messages[0].text, t3.messages[0].text);
    }

    #[test]
    fn dp_prompt_has_no_history_sections() {
        let b = build_baseline_prompt(&StrategyKind::Dp, "g", &markup(2), &BaselineContext::Dp, &PromptOptions::default())
            .unwrap();
        let text = &b.messages[0].text;
        assert!(!text.contains("Previous Actions:"));
        assert!(!text.contains("Previous Steps:"));
        assert!(text.contains("A JSON dictionary strictly following the format"));
    }

    fn rounds(n: usize) -> Vec<ReactRound> {
        (0..n)
            .map(|i| ReactRound {
                observation: format!("Screen:\n<p id=0 class=\"text\" alt=\"R{i}\">R{i}</p>"),
                response: format!("Thought: round {i}.\n{{'action_type': 'scroll', 'direction': 'up'}}"),
            })
            .collect()
    }

    #[test]
    fn react_window_keeps_last_rounds_only() {
        let all = rounds(5);
        let b = build_baseline_prompt(
            &StrategyKind::React { history_len: HistoryLen::Bounded(2) },
            "g",
            &markup(1),
            &BaselineContext::React { rounds: &all },
            &PromptOptions { turn: 5, ..Default::default() },
        )
        .unwrap();
        let text = b.full_text();
        assert!(!text.contains("R0") && !text.contains("R1") && !text.contains("R2"));
        assert!(text.contains("R3") && text.contains("R4"));
        // framing + 2 rounds x 2 messages + current observation
        assert_eq!(b.messages.len(), 6);
    }

    #[test]
    fn react_unbounded_keeps_everything() {
        let all = rounds(5);
        let b = build_baseline_prompt(
            &StrategyKind::React { history_len: HistoryLen::Unbounded },
            "g",
            &markup(1),
            &BaselineContext::React { rounds: &all },
            &PromptOptions { turn: 5, ..Default::default() },
        )
        .unwrap();
        let text = b.full_text();
        for i in 0..5 {
            assert!(text.contains(&format!("R{i}")));
        }
        assert_eq!(b.messages.len(), 12);
    }

    #[test]
    fn react_tokens_grow_with_rounds() {
        let all = rounds(6);
        let mut last = 0;
        for n in 0..=6 {
            let b = build_baseline_prompt(
                &StrategyKind::React { history_len: HistoryLen::Unbounded },
                "g",
                &markup(3),
                &BaselineContext::React { rounds: &all[..n] },
                &PromptOptions::default(),
            )
            .unwrap();
            let est = b.estimated_tokens();
            assert!(est >= last);
            last = est;
        }
    }

    #[test]
    fn mismatched_context_is_rejected() {
        let err = build_baseline_prompt(
            &StrategyKind::Np,
            "g",
            &markup(1),
            &BaselineContext::Dp,
            &PromptOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, PromptError::ContextMismatch { expected: "np", got: "dp" });
    }

    #[test]
    fn budget_drops_oldest_history_first() {
        let history: Vec<String> = (0..30)
            .map(|i| format!("{{\"step_idx\": {i}, \"action_description\": \"scroll up\"}}"))
            .collect();
        let unbudgeted = build_planning_prompt("g", &markup(2), &history, &[], &PromptOptions::default());
        let budget = unbudgeted.estimated_tokens() - 60;
        let b = build_planning_prompt(
            "g",
            &markup(2),
            &history,
            &[],
            &PromptOptions { budget_tokens: Some(budget), ..Default::default() },
        );
        let text = &b.messages[0].text;
        assert!(b.estimated_tokens() <= budget);
        assert!(!text.contains("\"step_idx\": 0,"));
        assert!(text.contains("\"step_idx\": 29,"));
        assert!(text.contains("Your ultimate goal is"));
        assert!(text.contains(SCREEN_HEADING));
    }

    #[test]
    fn history_section_grows_one_line_per_turn() {
        let mut history: Vec<String> = vec![];
        let mut last_lines = None;
        for i in 0..5 {
            let b = build_planning_prompt("g", &markup(2), &history, &[], &PromptOptions::default());
            let text = &b.messages[0].text;
            let lines = count(text, "action_description");
            if let Some(prev) = last_lines {
                assert_eq!(lines, prev + 1);
            }
            last_lines = Some(lines);
            history.push(format!("{{\"step_idx\": {i}, \"action_description\": \"scroll up\"}}"));
        }
    }
}
