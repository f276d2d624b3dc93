//! Episode orchestration: build prompts for the configured strategy,
//! invoke the gateway, parse plan/step, ground the action, update the
//! execution history, and terminate.
//!
//! Runs use replay semantics: at turn `i` the agent observes gold screen
//! `i` regardless of what it predicted, and the evaluator later compares
//! predictions to the gold actions. One episode run is strictly sequential
//! across turns; distinct episodes run concurrently, each owning its
//! history, trace buffer, and scripted queue.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gateway::{DecodingConfig, Gateway, GatewayError, UsageStats};
use crate::model::{Action, ClickTarget, Episode, Point, Screen, ScrollDirection};
use crate::parser::{
    describe_action, parse_action, parse_description, parse_plan_step, split_plan_steps,
    ParseDiagnostics, Plan,
};
use crate::prompt::{
    build_baseline_prompt, build_grounding_prompt, build_planning_prompt,
    build_planning_prompt_with_reference, build_step_selection_prompt, BaselineContext,
    PromptBundle, PromptOptions, ReactRound, ReferenceBlock, StrategyKind,
};
use crate::retrieval::{ReferenceRetriever, RetrievalError};
use crate::screen::serialize_screen;

/// One line of the execution history: the turn index and the one-line
/// description of the action executed there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step_idx: usize,
    pub action_description: String,
}

/// Render one history entry exactly as it appears in prompts.
pub fn render_history_entry(entry: &HistoryEntry) -> String {
    format!(
        "{{\"step_idx\": {}, \"action_description\": {}}}",
        entry.step_idx,
        serde_json::to_string(&entry.action_description).expect("string serializes")
    )
}

/// The growing execution history: one entry per completed turn, plus the
/// chosen-step texts for strategies that select steps. Pure accumulation;
/// prior entries are never rewritten.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExecutionHistory {
    entries: Vec<HistoryEntry>,
    steps_taken: Vec<String>,
}

impl ExecutionHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn steps_taken(&self) -> &[String] {
        &self.steps_taken
    }

    pub fn rendered_lines(&self) -> Vec<String> {
        self.entries.iter().map(render_history_entry).collect()
    }
}

/// Append one turn to the history. `turn` must equal the number of entries
/// already present; anything else is an orchestrator bug and panics.
pub fn update_history(
    history: &mut ExecutionHistory,
    turn: usize,
    action: &Action,
    step: Option<&str>,
    screen: &Screen,
) {
    update_history_with_description(history, turn, describe_action(action, Some(screen)), step);
}

/// Like [`update_history`] but with a precomputed description, used when a
/// turn produced no parseable action.
pub fn update_history_with_description(
    history: &mut ExecutionHistory,
    turn: usize,
    action_description: String,
    step: Option<&str>,
) {
    assert_eq!(
        turn,
        history.entries.len(),
        "history update for turn {turn} but {} entries recorded",
        history.entries.len()
    );
    history.entries.push(HistoryEntry { step_idx: turn, action_description });
    if let Some(step) = step {
        history.steps_taken.push(step.to_string());
    }
}

/// Turn budget for a run. The default follows the replay: the episode
/// length bounds the loop and exhaustion reads as `EpisodeEnd`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MaxTurns {
    #[default]
    EpisodeLength,
    Fixed(usize),
}

/// An externally supplied plan for one (episode, turn).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExternalPlanEntry {
    pub episode_id: String,
    pub turn: usize,
    pub plan: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<String>,
}

/// Plans injected in place of model planning, keyed by (episode id, turn).
/// Turns without an entry fall back to model planning.
#[derive(Clone, Debug, Default)]
pub struct ExternalPlans {
    entries: HashMap<(String, usize), ExternalPlanEntry>,
}

impl ExternalPlans {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let content = fs::read_to_string(path).map_err(|e| RunError::PlanFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut entries = HashMap::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ExternalPlanEntry =
                serde_json::from_str(line).map_err(|e| RunError::PlanFile {
                    path: path.display().to_string(),
                    message: format!("line {}: {e}", i + 1),
                })?;
            entries.insert((entry.episode_id.clone(), entry.turn), entry);
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, entry: ExternalPlanEntry) {
        self.entries.insert((entry.episode_id.clone(), entry.turn), entry);
    }

    pub fn get(&self, episode_id: &str, turn: usize) -> Option<&ExternalPlanEntry> {
        self.entries.get(&(episode_id.to_string(), turn))
    }
}

#[derive(Clone, Debug, Default)]
pub enum PlanSource {
    #[default]
    Model,
    External(ExternalPlans),
}

/// How a chosen step becomes an action: a second model call, or the
/// deterministic description grammar (scripted tests only; it cannot
/// ground free-form steps).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GroundingMode {
    #[default]
    ModelCall,
    DescriptionGrammar,
}

impl GroundingMode {
    pub fn name(&self) -> &'static str {
        match self {
            GroundingMode::ModelCall => "model",
            GroundingMode::DescriptionGrammar => "grammar",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub strategy: StrategyKind,
    pub max_turns: MaxTurns,
    pub decoding: DecodingConfig,
    pub plan_source: PlanSource,
    pub grounding: GroundingMode,
    pub store_prompts: bool,
    pub prompt_budget: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            strategy: StrategyKind::DPoT,
            max_turns: MaxTurns::EpisodeLength,
            decoding: DecodingConfig::default(),
            plan_source: PlanSource::Model,
            grounding: GroundingMode::ModelCall,
            store_prompts: false,
            prompt_budget: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        if matches!(self.plan_source, PlanSource::External(_)) && !self.strategy.plans() {
            return Err(RunError::InvalidConfig {
                message: format!(
                    "external plans only apply to planning strategies, not `{}`",
                    self.strategy.name()
                ),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationKind {
    StatusComplete,
    MaxTurns,
    EpisodeEnd,
}

/// Termination verdict after a turn. A predicted status-complete ends the
/// run immediately; an explicit turn cap reads as `MaxTurns`; running out
/// of recorded screens reads as `EpisodeEnd`.
pub fn is_terminal(
    action: Option<&Action>,
    turn: usize,
    episode: &Episode,
    cfg: &RunConfig,
) -> Option<TerminationKind> {
    if matches!(action, Some(Action::StatusComplete)) {
        return Some(TerminationKind::StatusComplete);
    }
    if let MaxTurns::Fixed(k) = cfg.max_turns {
        if turn + 1 >= k {
            return Some(TerminationKind::MaxTurns);
        }
    }
    if turn + 1 >= episode.steps.len() {
        return Some(TerminationKind::EpisodeEnd);
    }
    None
}

/// The grounded result of a turn: an action, or the reason none parsed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "WirePrediction", try_from = "WirePrediction")]
pub enum ActionOutcome {
    Action(Action),
    Unparseable { reason: String },
}

impl ActionOutcome {
    pub fn action(&self) -> Option<&Action> {
        match self {
            ActionOutcome::Action(a) => Some(a),
            ActionOutcome::Unparseable { .. } => None,
        }
    }
}

#[derive(Clone, Serialize, Deserialize)]
struct WirePrediction {
    action_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    idx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    point: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    direction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

impl From<ActionOutcome> for WirePrediction {
    fn from(outcome: ActionOutcome) -> Self {
        let mut wire = WirePrediction {
            action_type: String::new(),
            idx: None,
            point: None,
            direction: None,
            text: None,
            reason: None,
        };
        match outcome {
            ActionOutcome::Unparseable { reason } => {
                wire.action_type = "unparseable".to_string();
                wire.reason = Some(reason);
            }
            ActionOutcome::Action(a) => {
                wire.action_type = a.kind().as_str().to_string();
                match a {
                    Action::Click { target: ClickTarget::Element(idx) } => wire.idx = Some(idx),
                    Action::Click { target: ClickTarget::Point(p) } => wire.point = Some([p.x, p.y]),
                    Action::Scroll { direction } => wire.direction = Some(direction.as_str().to_string()),
                    Action::Type { text } => wire.text = Some(text),
                    _ => {}
                }
            }
        }
        wire
    }
}

impl TryFrom<WirePrediction> for ActionOutcome {
    type Error = String;

    fn try_from(wire: WirePrediction) -> Result<Self, String> {
        let action = match wire.action_type.as_str() {
            "unparseable" => {
                return Ok(ActionOutcome::Unparseable { reason: wire.reason.unwrap_or_default() })
            }
            "click" => match (wire.idx, wire.point) {
                (Some(idx), _) => Action::Click { target: ClickTarget::Element(idx) },
                (None, Some([x, y])) => Action::Click { target: ClickTarget::Point(Point::new(x, y)) },
                (None, None) => return Err("click prediction with neither idx nor point".into()),
            },
            "scroll" => {
                let dir = wire.direction.as_deref().ok_or("scroll prediction without direction")?;
                Action::Scroll {
                    direction: ScrollDirection::parse(dir).ok_or_else(|| format!("bad direction `{dir}`"))?,
                }
            }
            "type" => Action::Type { text: wire.text.unwrap_or_default() },
            "navigate_home" => Action::Navigate { dest: crate::model::NavDest::Home },
            "navigate_back" => Action::Navigate { dest: crate::model::NavDest::Back },
            "press_enter" => Action::PressEnter,
            "status_complete" => Action::StatusComplete,
            other => return Err(format!("unknown predicted action_type `{other}`")),
        };
        Ok(ActionOutcome::Action(action))
    }
}

/// Everything recorded about one turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: usize,
    pub prompt_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_plan_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Plan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<String>,
    pub action: ActionOutcome,
    pub usage: UsageStats,
    pub latency_s: f64,
    pub gateway_calls: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<ParseDiagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompts: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub episode_id: String,
    pub subset: String,
    pub strategy: String,
    pub turns: Vec<TurnRecord>,
    /// `None` exactly when the run aborted mid-episode.
    pub terminated_by: Option<TerminationKind>,
    pub abort_error: Option<String>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run configuration: {message}")]
    InvalidConfig { message: String },
    #[error("strategy `{strategy}` and retriever mismatch (retriever present: {present})")]
    RetrieverMismatch { strategy: &'static str, present: bool },
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("cannot load plan file {path}: {message}")]
    PlanFile { path: String, message: String },
}

fn digest_bundles(bundles: &[PromptBundle]) -> String {
    let mut hasher = Sha256::new();
    for b in bundles {
        hasher.update(b.full_text().as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Scratch for one turn's gateway traffic.
struct TurnCalls<'a> {
    gateway: &'a Gateway,
    decoding: &'a DecodingConfig,
    bundles: Vec<PromptBundle>,
    usage: UsageStats,
    latency_s: f64,
    calls: u32,
}

impl<'a> TurnCalls<'a> {
    fn new(gateway: &'a Gateway, decoding: &'a DecodingConfig) -> Self {
        Self {
            gateway,
            decoding,
            bundles: Vec::new(),
            usage: UsageStats::default(),
            latency_s: 0.0,
            calls: 0,
        }
    }

    async fn complete(&mut self, bundle: PromptBundle) -> Result<String, GatewayError> {
        let result = self.gateway.complete(&bundle, self.decoding).await?;
        self.usage.absorb(&result.usage);
        self.latency_s += result.latency_s;
        self.calls += 1;
        self.bundles.push(bundle);
        Ok(result.text)
    }
}

struct TurnExecution {
    raw_plan_text: Option<String>,
    plan: Option<Plan>,
    step: Option<String>,
    outcome: ActionOutcome,
    diagnostics: Option<ParseDiagnostics>,
}

/// Run one episode under the configured strategy and return its trace.
/// Gateway failures abort the episode: the partial trace comes back with
/// `abort_error` set rather than as an `Err`.
pub async fn run_episode(
    episode: &Episode,
    cfg: &RunConfig,
    gateway: &Gateway,
    retriever: Option<&ReferenceRetriever>,
) -> Result<EpisodeTrace, RunError> {
    cfg.validate()?;
    let wants_retriever = matches!(cfg.strategy, StrategyKind::DPoTWithReference);
    if wants_retriever != retriever.is_some() {
        return Err(RunError::RetrieverMismatch {
            strategy: cfg.strategy.name(),
            present: retriever.is_some(),
        });
    }
    let refs: Option<ReferenceBlock> = match retriever {
        Some(r) => Some(r.references_for(episode)?),
        None => None,
    };

    let mut trace = EpisodeTrace {
        episode_id: episode.id.clone(),
        subset: episode.subset.clone(),
        strategy: cfg.strategy.name().to_string(),
        turns: Vec::new(),
        terminated_by: None,
        abort_error: None,
    };
    let mut history = ExecutionHistory::new();
    let mut frozen_plan: Option<String> = None;
    let mut react_rounds: Vec<ReactRound> = Vec::new();

    for turn in 0..episode.steps.len() {
        let screen = &episode.steps[turn].screen;
        let markup = serialize_screen(screen);
        let opts = PromptOptions {
            turn,
            image_ref: screen.image_ref.clone(),
            budget_tokens: cfg.prompt_budget,
        };
        let mut calls = TurnCalls::new(gateway, &cfg.decoding);

        let executed = match &cfg.strategy {
            StrategyKind::Np => np_turn(&mut calls, episode, &markup, &opts).await,
            StrategyKind::Sp => sp_turn(&mut calls, episode, &markup, &opts, turn, cfg, &mut frozen_plan).await,
            StrategyKind::Dp => planned_turn(&mut calls, episode, &markup, &opts, turn, cfg, None, &history, screen, true).await,
            StrategyKind::DPoT => {
                planned_turn(&mut calls, episode, &markup, &opts, turn, cfg, None, &history, screen, false).await
            }
            StrategyKind::DPoTWithReference => {
                planned_turn(&mut calls, episode, &markup, &opts, turn, cfg, refs.as_ref(), &history, screen, false)
                    .await
            }
            StrategyKind::React { .. } => react_turn(&mut calls, episode, &markup, &opts, cfg, &mut react_rounds).await,
        };

        let executed = match executed {
            Ok(e) => e,
            Err(err) => {
                trace.abort_error = Some(err.to_string());
                break;
            }
        };

        let record = TurnRecord {
            turn,
            prompt_digest: digest_bundles(&calls.bundles),
            raw_plan_text: executed.raw_plan_text,
            plan: executed.plan,
            step: executed.step.clone(),
            action: executed.outcome.clone(),
            usage: calls.usage,
            latency_s: calls.latency_s,
            gateway_calls: calls.calls,
            diagnostics: executed.diagnostics,
            prompts: cfg.store_prompts.then(|| calls.bundles.iter().map(|b| b.full_text()).collect()),
        };
        trace.turns.push(record);

        match &executed.outcome {
            ActionOutcome::Action(a) => {
                update_history(&mut history, turn, a, executed.step.as_deref(), screen)
            }
            ActionOutcome::Unparseable { .. } => update_history_with_description(
                &mut history,
                turn,
                "unknown".to_string(),
                executed.step.as_deref(),
            ),
        }
        debug_assert_eq!(history.entries().len(), turn + 1);

        if let Some(kind) = is_terminal(executed.outcome.action(), turn, episode, cfg) {
            trace.terminated_by = Some(kind);
            break;
        }
    }
    Ok(trace)
}

fn outcome_from_parse(parsed: Result<Action, crate::parser::ParseError>) -> ActionOutcome {
    match parsed {
        Ok(a) => ActionOutcome::Action(a),
        Err(e) => ActionOutcome::Unparseable { reason: e.to_string() },
    }
}

async fn np_turn(
    calls: &mut TurnCalls<'_>,
    episode: &Episode,
    markup: &crate::screen::ScreenMarkup,
    opts: &PromptOptions,
) -> Result<TurnExecution, GatewayError> {
    let bundle = build_baseline_prompt(&StrategyKind::Np, &episode.goal, markup, &BaselineContext::Np, opts)
        .expect("np context matches");
    let text = calls.complete(bundle).await?;
    Ok(TurnExecution {
        raw_plan_text: None,
        plan: None,
        step: None,
        outcome: outcome_from_parse(parse_action(&text)),
        diagnostics: None,
    })
}

async fn sp_turn(
    calls: &mut TurnCalls<'_>,
    episode: &Episode,
    markup: &crate::screen::ScreenMarkup,
    opts: &PromptOptions,
    turn: usize,
    cfg: &RunConfig,
    frozen_plan: &mut Option<String>,
) -> Result<TurnExecution, GatewayError> {
    let mut raw_plan_text = None;
    let mut plan = None;
    let mut diagnostics = None;
    if turn == 0 {
        if let PlanSource::External(plans) = &cfg.plan_source {
            if let Some(entry) = plans.get(&episode.id, 0) {
                *frozen_plan = Some(entry.plan.clone());
            }
        }
        if frozen_plan.is_none() {
            let bundle =
                build_baseline_prompt(&StrategyKind::Dp, &episode.goal, markup, &BaselineContext::Dp, opts)
                    .expect("dp context matches");
            let text = calls.complete(bundle).await?;
            match parse_plan_step(&text) {
                Ok((parsed, _, diag)) => {
                    *frozen_plan = Some(parsed.raw.clone());
                    plan = Some(parsed);
                    diagnostics = Some(diag);
                }
                Err(e) => {
                    diagnostics = Some(ParseDiagnostics {
                        recovery_applied: vec![],
                        ok: false,
                        notes: vec![format!("turn-1 plan parse failed: {e}")],
                    });
                }
            }
            raw_plan_text = Some(text);
        }
    }
    let plan_text = frozen_plan.as_deref().unwrap_or("None");
    let bundle = build_baseline_prompt(
        &StrategyKind::Sp,
        &episode.goal,
        markup,
        &BaselineContext::Sp { frozen_plan: plan_text },
        opts,
    )
    .expect("sp context matches");
    let text = calls.complete(bundle).await?;
    Ok(TurnExecution {
        raw_plan_text,
        plan,
        step: None,
        outcome: outcome_from_parse(parse_action(&text)),
        diagnostics,
    })
}

/// Shared turn body for the planning strategies. `skip_history` drops the
/// previous-actions/previous-steps sections (the plan-only baseline).
#[allow(clippy::too_many_arguments)]
async fn planned_turn(
    calls: &mut TurnCalls<'_>,
    episode: &Episode,
    markup: &crate::screen::ScreenMarkup,
    opts: &PromptOptions,
    turn: usize,
    cfg: &RunConfig,
    refs: Option<&ReferenceBlock>,
    history: &ExecutionHistory,
    screen: &Screen,
    skip_history: bool,
) -> Result<TurnExecution, GatewayError> {
    let history_lines = if skip_history { vec![] } else { history.rendered_lines() };
    let prev_steps: Vec<String> = if skip_history { vec![] } else { history.steps_taken().to_vec() };

    // 1) Obtain plan and step: injected, or one planning call.
    let mut raw_plan_text = None;
    let mut diagnostics: Option<ParseDiagnostics> = None;
    let injected = match &cfg.plan_source {
        PlanSource::External(plans) => plans.get(&episode.id, turn).cloned(),
        PlanSource::Model => None,
    };
    let (plan, step) = if let Some(entry) = injected {
        let plan = Plan {
            steps: split_plan_steps(&entry.plan),
            raw: entry.plan.clone(),
        };
        match entry.step {
            Some(step) => (Some(plan), Some(step)),
            None => {
                let bundle = build_step_selection_prompt(
                    &episode.goal,
                    markup,
                    &history_lines,
                    &prev_steps,
                    &entry.plan,
                    opts,
                );
                let text = calls.complete(bundle).await?;
                let step = match parse_plan_step(&text) {
                    Ok((_, chosen, diag)) => {
                        diagnostics = Some(diag);
                        Some(chosen.text)
                    }
                    Err(e) => {
                        diagnostics = Some(ParseDiagnostics {
                            recovery_applied: vec![],
                            ok: false,
                            notes: vec![format!("step selection parse failed: {e}")],
                        });
                        None
                    }
                };
                raw_plan_text = Some(text);
                (Some(plan), step)
            }
        }
    } else {
        let bundle = match refs {
            Some(refs) => build_planning_prompt_with_reference(
                &episode.goal,
                markup,
                &history_lines,
                &prev_steps,
                refs,
                opts,
            )
            .expect("non-empty references checked at retrieval"),
            None if skip_history => {
                build_baseline_prompt(&StrategyKind::Dp, &episode.goal, markup, &BaselineContext::Dp, opts)
                    .expect("dp context matches")
            }
            None => build_planning_prompt(&episode.goal, markup, &history_lines, &prev_steps, opts),
        };
        let text = calls.complete(bundle).await?;
        let parsed = parse_plan_step(&text);
        raw_plan_text = Some(text);
        match parsed {
            Ok((plan, chosen, diag)) => {
                diagnostics = Some(diag);
                (Some(plan), Some(chosen.text))
            }
            Err(e) => {
                diagnostics = Some(ParseDiagnostics {
                    recovery_applied: vec![],
                    ok: false,
                    notes: vec![format!("plan parse failed: {e}")],
                });
                (None, None)
            }
        }
    };

    // 2) Ground the step; a failed plan parse downgrades to a direct
    //    action request instead of forfeiting the turn.
    let outcome = match &step {
        None => {
            let bundle =
                build_baseline_prompt(&StrategyKind::Np, &episode.goal, markup, &BaselineContext::Np, opts)
                    .expect("np context matches");
            let text = calls.complete(bundle).await?;
            outcome_from_parse(parse_action(&text))
        }
        Some(step_text) => match cfg.grounding {
            GroundingMode::ModelCall => {
                let bundle = build_grounding_prompt(step_text, markup, &episode.goal, opts);
                let text = calls.complete(bundle).await?;
                outcome_from_parse(parse_action(&text))
            }
            GroundingMode::DescriptionGrammar => {
                outcome_from_parse(parse_description(step_text, Some(screen)))
            }
        },
    };

    Ok(TurnExecution { raw_plan_text, plan, step, outcome, diagnostics })
}

async fn react_turn(
    calls: &mut TurnCalls<'_>,
    episode: &Episode,
    markup: &crate::screen::ScreenMarkup,
    opts: &PromptOptions,
    cfg: &RunConfig,
    rounds: &mut Vec<ReactRound>,
) -> Result<TurnExecution, GatewayError> {
    let bundle = build_baseline_prompt(
        &cfg.strategy,
        &episode.goal,
        markup,
        &BaselineContext::React { rounds },
        opts,
    )
    .expect("react context matches");
    let text = calls.complete(bundle).await?;
    rounds.push(ReactRound {
        observation: markup.to_text(),
        response: text.clone(),
    });
    Ok(TurnExecution {
        raw_plan_text: None,
        plan: None,
        step: None,
        outcome: outcome_from_parse(parse_action(&text)),
        diagnostics: None,
    })
}
