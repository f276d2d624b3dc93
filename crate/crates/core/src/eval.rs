//! Screen-wise action matching, per-episode and per-subset scoring, and the
//! per-action-type breakdown.
//!
//! A predicted click matches gold when the closest of its element's five
//! sample points is within the distance threshold of the gold touch point,
//! when the gold touch point falls inside the predicted element's box, or
//! when both land inside one common detected element box. Scrolls match on
//! direction; every other pair matches exactly when the action types match.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{ActionOutcome, EpisodeTrace, TerminationKind};
use crate::model::{Action, ActionKind, ClickTarget, Episode, GoldStep, Point, Screen};
use crate::screen::resolve_click_target;

/// Normalized screen distance within which a predicted click counts as
/// on-target.
pub const CLICK_DISTANCE_THRESHOLD: f64 = 0.14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig {
    pub click_threshold: f64,
    /// Compare typed text as well as the action type. Off by default:
    /// type-vs-type matches regardless of text.
    pub strict_type_text: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            click_threshold: CLICK_DISTANCE_THRESHOLD,
            strict_type_text: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchRule {
    TypeMatch,
    ClickDistance,
    ClickSameBox,
    ScrollDirection,
    TypeOnlyTypes,
    Unresolved,
    TypeMismatch,
}

/// Verdict for one predicted-vs-gold comparison. `distance` is present
/// exactly when the verdict came from the distance rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchResult {
    pub verdict: bool,
    pub rule: MatchRule,
    pub distance: Option<f64>,
}

impl MatchResult {
    fn of(verdict: bool, rule: MatchRule) -> Self {
        Self { verdict, rule, distance: None }
    }
}

/// The gold-side point a predicted click is compared against: the recorded
/// touch, falling back to the gold click's own target geometry.
fn gold_click_point(gold: &GoldStep, screen: &Screen) -> Option<Point> {
    if let Some(g) = &gold.gesture {
        return Some(g.touch);
    }
    match &gold.action {
        Action::Click { target: ClickTarget::Point(p) } => Some(*p),
        Action::Click { target: ClickTarget::Element(idx) } => {
            screen.element(*idx).map(|e| e.bbox.center())
        }
        _ => None,
    }
}

/// Compare one predicted action against a gold step on its screen.
pub fn match_action(pred: &Action, gold: &GoldStep, screen: &Screen, cfg: &EvalConfig) -> MatchResult {
    if pred.kind() != gold.action.kind() {
        return MatchResult::of(false, MatchRule::TypeMismatch);
    }
    match pred {
        Action::Click { target } => {
            let (pred_bbox, pred_points) = match target {
                ClickTarget::Element(idx) => match resolve_click_target(screen, *idx) {
                    Ok(resolved) => resolved,
                    Err(_) => return MatchResult::of(false, MatchRule::Unresolved),
                },
                ClickTarget::Point(p) => {
                    (crate::model::BBox::new(*p, *p), [*p, *p, *p, *p, *p])
                }
            };
            let Some(gold_point) = gold_click_point(gold, screen) else {
                return MatchResult::of(false, MatchRule::Unresolved);
            };
            let dmin = pred_points
                .iter()
                .map(|p| p.distance(&gold_point))
                .fold(f64::INFINITY, f64::min);
            if dmin <= cfg.click_threshold {
                return MatchResult { verdict: true, rule: MatchRule::ClickDistance, distance: Some(dmin) };
            }
            if pred_bbox.contains(&gold_point) {
                return MatchResult::of(true, MatchRule::ClickSameBox);
            }
            let shared_box = screen.elements.iter().any(|el| {
                el.bbox.contains(&gold_point) && pred_points.iter().any(|p| el.bbox.contains(p))
            });
            if shared_box {
                return MatchResult::of(true, MatchRule::ClickSameBox);
            }
            MatchResult { verdict: false, rule: MatchRule::ClickDistance, distance: Some(dmin) }
        }
        Action::Scroll { direction } => {
            let Action::Scroll { direction: gold_dir } = &gold.action else { unreachable!() };
            MatchResult::of(direction == gold_dir, MatchRule::ScrollDirection)
        }
        Action::Type { text } => {
            let Action::Type { text: gold_text } = &gold.action else { unreachable!() };
            let verdict = !cfg.strict_type_text || text == gold_text;
            MatchResult::of(verdict, MatchRule::TypeOnlyTypes)
        }
        _ => MatchResult::of(true, MatchRule::TypeMatch),
    }
}

/// Per-episode score: correct turns over the full episode length, as a
/// percentage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeScore {
    pub episode_id: String,
    pub subset: String,
    pub correct: usize,
    pub total: usize,
    pub score: f64,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("trace for episode `{trace}` scored against episode `{episode}`")]
    Mismatch { trace: String, episode: String },
    #[error("no scores to aggregate")]
    Empty,
    #[error("trace references unknown episode `{id}`")]
    UnknownEpisode { id: String },
}

/// Score one trace against its episode. The denominator is the full
/// episode length. Turns past the end of the trace count as incorrect,
/// except that after a predicted status-complete the positions whose gold
/// action is also status-complete count as correct.
pub fn score_episode(trace: &EpisodeTrace, episode: &Episode, cfg: &EvalConfig) -> Result<EpisodeScore, EvalError> {
    if trace.episode_id != episode.id {
        return Err(EvalError::Mismatch {
            trace: trace.episode_id.clone(),
            episode: episode.id.clone(),
        });
    }
    let total = episode.steps.len();
    let mut correct = 0;
    for (i, gold) in episode.steps.iter().enumerate() {
        let ok = match trace.turns.get(i) {
            Some(turn) => match turn.action.action() {
                Some(pred) => match_action(pred, gold, &gold.screen, cfg).verdict,
                None => false,
            },
            None => {
                trace.terminated_by == Some(TerminationKind::StatusComplete)
                    && matches!(gold.action, Action::StatusComplete)
            }
        };
        if ok {
            correct += 1;
        }
    }
    Ok(EpisodeScore {
        episode_id: episode.id.clone(),
        subset: episode.subset.clone(),
        correct,
        total,
        score: if total == 0 { 0.0 } else { 100.0 * correct as f64 / total as f64 },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub mean: f64,
    pub episodes: usize,
}

/// Per-subset means plus the overall score. `overall` is the unweighted
/// mean of subset means unless `weighted` was requested, in which case it
/// is the episode-weighted mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub subsets: BTreeMap<String, SubsetScore>,
    pub overall: f64,
    pub weighted: bool,
}

pub fn aggregate(scores: &[EpisodeScore], weighted: bool) -> Result<SubsetReport, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut by_subset: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in scores {
        by_subset.entry(s.subset.clone()).or_default().push(s.score);
    }
    let subsets: BTreeMap<String, SubsetScore> = by_subset
        .into_iter()
        .map(|(name, scores)| {
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            (name, SubsetScore { mean, episodes: scores.len() })
        })
        .collect();
    let overall = if weighted {
        let total: usize = subsets.values().map(|s| s.episodes).sum();
        subsets.values().map(|s| s.mean * s.episodes as f64).sum::<f64>() / total as f64
    } else {
        subsets.values().map(|s| s.mean).sum::<f64>() / subsets.len() as f64
    };
    Ok(SubsetReport { subsets, overall, weighted })
}

/// One row of the per-action-type breakdown. Ratios are percentages of all
/// evaluated turns; unparseable predictions are tallied separately, so the
/// predicted ratios sum to at most 100.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionBreakdownRow {
    pub action_type: String,
    pub predicted_ratio: f64,
    pub accuracy_ratio: f64,
    pub predicted_count: usize,
    pub correct_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionBreakdown {
    pub rows: Vec<ActionBreakdownRow>,
    pub evaluated_turns: usize,
    pub unparseable_count: usize,
    pub unparseable_ratio: f64,
}

/// Tally predicted-type and correct-type ratios across all traces, rows in
/// the fixed order Click, Scroll, Type, Home, Back, Press, Complete.
pub fn action_breakdown(
    traces: &[EpisodeTrace],
    episodes: &BTreeMap<String, &Episode>,
    cfg: &EvalConfig,
) -> Result<ActionBreakdown, EvalError> {
    let mut predicted: BTreeMap<ActionKind, usize> = BTreeMap::new();
    let mut correct: BTreeMap<ActionKind, usize> = BTreeMap::new();
    let mut evaluated = 0usize;
    let mut unparseable = 0usize;
    for trace in traces {
        let episode = episodes
            .get(&trace.episode_id)
            .ok_or_else(|| EvalError::UnknownEpisode { id: trace.episode_id.clone() })?;
        for (turn, gold) in trace.turns.iter().zip(&episode.steps) {
            evaluated += 1;
            match &turn.action {
                ActionOutcome::Unparseable { .. } => unparseable += 1,
                ActionOutcome::Action(pred) => {
                    let kind = pred.kind();
                    *predicted.entry(kind).or_insert(0) += 1;
                    if match_action(pred, gold, &gold.screen, cfg).verdict {
                        *correct.entry(kind).or_insert(0) += 1;
                    }
                }
            }
        }
    }
    let pct = |n: usize| if evaluated == 0 { 0.0 } else { 100.0 * n as f64 / evaluated as f64 };
    let rows = ActionKind::ALL
        .iter()
        .map(|kind| {
            let p = predicted.get(kind).copied().unwrap_or(0);
            let c = correct.get(kind).copied().unwrap_or(0);
            ActionBreakdownRow {
                action_type: kind.as_str().to_string(),
                predicted_ratio: pct(p),
                accuracy_ratio: pct(c),
                predicted_count: p,
                correct_count: c,
            }
        })
        .collect();
    Ok(ActionBreakdown {
        rows,
        evaluated_turns: evaluated,
        unparseable_count: unparseable,
        unparseable_ratio: pct(unparseable),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::TurnRecord;
    use crate::gateway::UsageStats;
    use crate::model::{BBox, ElementKind, GoldGesture, ScrollDirection, UiElement};

    fn element(idx: usize, min: Point, max: Point) -> UiElement {
        UiElement {
            idx,
            kind: ElementKind::Text,
            text: format!("el{idx}"),
            bbox: BBox::new(min, max),
        }
    }

    fn screen(elements: Vec<UiElement>) -> Screen {
        Screen { elements, caption: None, image_ref: None }
    }

    fn gold_click_at(p: Point, screen: &Screen) -> GoldStep {
        GoldStep {
            screen: screen.clone(),
            action: Action::Click { target: ClickTarget::Point(p) },
            gesture: Some(GoldGesture { touch: p, lift: p }),
        }
    }

    #[test]
    fn status_matches_status() {
        let s = screen(vec![]);
        let gold = GoldStep { screen: s.clone(), action: Action::StatusComplete, gesture: None };
        let r = match_action(&Action::StatusComplete, &gold, &s, &EvalConfig::default());
        assert!(r.verdict);
        assert_eq!(r.rule, MatchRule::TypeMatch);
    }

    #[test]
    fn click_within_threshold_matches() {
        // Predicted element is a degenerate box at (0.5, 0.5); gold touch
        // (0.55, 0.58) puts the nearest sample point sqrt(0.0025 + 0.0064)
        // ~ 0.0943 away, inside the 0.14 threshold.
        let p = Point::new(0.5, 0.5);
        let s = screen(vec![element(0, p, p)]);
        let gold = gold_click_at(Point::new(0.55, 0.58), &s);
        let pred = Action::Click { target: ClickTarget::Element(0) };
        let r = match_action(&pred, &gold, &s, &EvalConfig::default());
        assert!(r.verdict);
        assert_eq!(r.rule, MatchRule::ClickDistance);
        assert!((r.distance.unwrap() - 0.0943398).abs() < 1e-6);
    }

    #[test]
    fn click_outside_threshold_misses() {
        // Distance sqrt(0.01 + 0.01) ~ 0.14142 just exceeds the threshold.
        let p = Point::new(0.5, 0.5);
        let s = screen(vec![element(0, p, p)]);
        let gold = gold_click_at(Point::new(0.6, 0.6), &s);
        let pred = Action::Click { target: ClickTarget::Element(0) };
        let r = match_action(&pred, &gold, &s, &EvalConfig::default());
        assert!(!r.verdict);
        assert!((r.distance.unwrap() - 0.1414213).abs() < 1e-6);
    }

    #[test]
    fn containment_rescues_a_far_click() {
        // A large predicted box whose nearest corner is beyond the
        // threshold but which contains the gold touch point.
        let s = screen(vec![element(0, Point::new(0.0, 0.0), Point::new(1.0, 0.8))]);
        let gold = gold_click_at(Point::new(0.5, 0.25), &s);
        let pred = Action::Click { target: ClickTarget::Element(0) };
        let r = match_action(&pred, &gold, &s, &EvalConfig::default());
        assert!(r.verdict);
        assert_eq!(r.rule, MatchRule::ClickSameBox);
    }

    #[test]
    fn shared_detected_box_rescues_a_far_click() {
        // Elements 0 and 1 are small and far apart, but element 2's box
        // covers both the predicted corner and the gold point.
        let s = screen(vec![
            element(0, Point::new(0.05, 0.05), Point::new(0.1, 0.1)),
            element(1, Point::new(0.8, 0.8), Point::new(0.9, 0.9)),
            element(2, Point::new(0.0, 0.0), Point::new(1.0, 1.0)),
        ]);
        let gold = gold_click_at(Point::new(0.85, 0.85), &s);
        let pred = Action::Click { target: ClickTarget::Element(0) };
        let r = match_action(&pred, &gold, &s, &EvalConfig::default());
        assert!(r.verdict);
        assert_eq!(r.rule, MatchRule::ClickSameBox);
    }

    #[test]
    fn unresolved_click_target_is_a_miss() {
        let s = screen(vec![element(0, Point::new(0.0, 0.0), Point::new(0.1, 0.1))]);
        let gold = gold_click_at(Point::new(0.05, 0.05), &s);
        let pred = Action::Click { target: ClickTarget::Element(7) };
        let r = match_action(&pred, &gold, &s, &EvalConfig::default());
        assert!(!r.verdict);
        assert_eq!(r.rule, MatchRule::Unresolved);
    }

    #[test]
    fn scroll_direction_comparison() {
        let s = screen(vec![]);
        let gold = GoldStep {
            screen: s.clone(),
            action: Action::Scroll { direction: ScrollDirection::Up },
            gesture: Some(GoldGesture {
                touch: Point::new(0.5, 0.8),
                lift: Point::new(0.5, 0.3),
            }),
        };
        let cfg = EvalConfig::default();
        let up = match_action(&Action::Scroll { direction: ScrollDirection::Up }, &gold, &s, &cfg);
        assert!(up.verdict);
        assert_eq!(up.rule, MatchRule::ScrollDirection);
        let down = match_action(&Action::Scroll { direction: ScrollDirection::Down }, &gold, &s, &cfg);
        assert!(!down.verdict);
    }

    #[test]
    fn type_matches_regardless_of_text_unless_strict() {
        let s = screen(vec![]);
        let gold = GoldStep {
            screen: s.clone(),
            action: Action::Type { text: "hello world".into() },
            gesture: None,
        };
        let pred = Action::Type { text: "different".into() };
        assert!(match_action(&pred, &gold, &s, &EvalConfig::default()).verdict);
        let strict = EvalConfig { strict_type_text: true, ..EvalConfig::default() };
        assert!(!match_action(&pred, &gold, &s, &strict).verdict);
        assert!(match_action(&gold.action.clone(), &gold, &s, &strict).verdict);
    }

    #[test]
    fn cross_type_pairs_mismatch() {
        let s = screen(vec![]);
        let gold = GoldStep {
            screen: s.clone(),
            action: Action::Navigate { dest: crate::model::NavDest::Home },
            gesture: None,
        };
        let pred = Action::Navigate { dest: crate::model::NavDest::Back };
        let r = match_action(&pred, &gold, &s, &EvalConfig::default());
        assert!(!r.verdict);
        assert_eq!(r.rule, MatchRule::TypeMismatch);
    }

    fn turn(action: ActionOutcome) -> TurnRecord {
        TurnRecord {
            turn: 0,
            prompt_digest: String::new(),
            raw_plan_text: None,
            plan: None,
            step: None,
            action,
            usage: UsageStats::default(),
            latency_s: 0.0,
            gateway_calls: 1,
            diagnostics: None,
            prompts: None,
        }
    }

    fn four_step_episode() -> Episode {
        let s = screen(vec![]);
        let press = GoldStep { screen: s.clone(), action: Action::PressEnter, gesture: None };
        Episode {
            id: "e".into(),
            subset: "General".into(),
            goal: "g".into(),
            steps: vec![press.clone(), press.clone(), press.clone(), GoldStep {
                screen: s,
                action: Action::StatusComplete,
                gesture: None,
            }],
        }
    }

    fn trace_for(episode: &Episode, actions: Vec<ActionOutcome>, terminated_by: Option<TerminationKind>) -> EpisodeTrace {
        EpisodeTrace {
            episode_id: episode.id.clone(),
            subset: episode.subset.clone(),
            strategy: "np".into(),
            turns: actions.into_iter().map(turn).collect(),
            terminated_by,
            abort_error: None,
        }
    }

    #[test]
    fn three_of_four_scores_75() {
        let e = four_step_episode();
        let t = trace_for(
            &e,
            vec![
                ActionOutcome::Action(Action::PressEnter),
                ActionOutcome::Action(Action::PressEnter),
                ActionOutcome::Action(Action::Navigate { dest: crate::model::NavDest::Home }),
                ActionOutcome::Action(Action::StatusComplete),
            ],
            Some(TerminationKind::StatusComplete),
        );
        let s = score_episode(&t, &e, &EvalConfig::default()).unwrap();
        assert_eq!(s.correct, 3);
        assert_eq!(s.total, 4);
        assert!((s.score - 75.0).abs() < 1e-9);
    }

    #[test]
    fn empty_trace_scores_zero() {
        let e = four_step_episode();
        let t = trace_for(&e, vec![], None);
        let s = score_episode(&t, &e, &EvalConfig::default()).unwrap();
        assert_eq!(s.score, 0.0);
    }

    #[test]
    fn early_complete_gets_credit_only_for_gold_complete_positions() {
        let e = four_step_episode();
        let t = trace_for(
            &e,
            vec![
                ActionOutcome::Action(Action::PressEnter),
                ActionOutcome::Action(Action::StatusComplete),
            ],
            Some(TerminationKind::StatusComplete),
        );
        let s = score_episode(&t, &e, &EvalConfig::default()).unwrap();
        // turn 0 correct; turn 1 predicted complete vs gold press: miss;
        // turn 2 beyond trace, gold press: miss; turn 3 beyond trace, gold
        // complete: credited.
        assert_eq!(s.correct, 2);
        assert_eq!(s.total, 4);
    }

    #[test]
    fn mismatched_trace_is_an_error() {
        let e = four_step_episode();
        let mut t = trace_for(&e, vec![], None);
        t.episode_id = "other".into();
        assert!(matches!(
            score_episode(&t, &e, &EvalConfig::default()),
            Err(EvalError::Mismatch { .. })
        ));
    }

    fn score(subset: &str, value: f64) -> EpisodeScore {
        EpisodeScore {
            episode_id: format!("{subset}-{value}"),
            subset: subset.into(),
            correct: 0,
            total: 1,
            score: value,
        }
    }

    #[test]
    fn overall_is_unweighted_mean_of_subset_means() {
        let scores = vec![
            score("General", 29.69),
            score("GoogleApps", 35.75),
            score("Install", 43.50),
            score("Single", 32.95),
            score("WebShopping", 31.42),
        ];
        let report = aggregate(&scores, false).unwrap();
        assert!((report.overall - 34.66).abs() <= 0.01);
    }

    #[test]
    fn unweighted_ignores_subset_sizes() {
        let mut scores = vec![score("A", 40.0)];
        for i in 0..99 {
            scores.push(EpisodeScore {
                episode_id: format!("b{i}"),
                subset: "B".into(),
                correct: 0,
                total: 1,
                score: 60.0,
            });
        }
        let report = aggregate(&scores, false).unwrap();
        assert!((report.overall - 50.0).abs() < 1e-9);
        let weighted = aggregate(&scores, true).unwrap();
        assert!((weighted.overall - 59.8).abs() < 1e-9);
    }

    #[test]
    fn single_episode_subset() {
        let report = aggregate(&[score("Only", 100.0)], false).unwrap();
        assert_eq!(report.overall, 100.0);
        assert!(aggregate(&[], false).is_err());
    }

    #[test]
    fn aggregate_is_permutation_invariant() {
        let mut scores = vec![
            score("A", 10.0),
            score("B", 20.0),
            score("A", 30.0),
            score("B", 40.0),
        ];
        let forward = aggregate(&scores, false).unwrap();
        scores.reverse();
        let backward = aggregate(&scores, false).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn breakdown_hand_tally() {
        // 10 turns: 7 clicks (5 correct), 3 scrolls (1 correct).
        let p = Point::new(0.5, 0.5);
        let s = screen(vec![element(0, p, p)]);
        let near = Point::new(0.5, 0.5);
        let far = Point::new(0.95, 0.95);
        let mut steps = Vec::new();
        for i in 0..7 {
            steps.push(gold_click_at(if i < 5 { near } else { far }, &s));
        }
        for i in 0..3 {
            let dir = if i < 1 { ScrollDirection::Up } else { ScrollDirection::Down };
            steps.push(GoldStep {
                screen: s.clone(),
                action: Action::Scroll { direction: dir },
                gesture: Some(GoldGesture {
                    touch: Point::new(0.5, if dir == ScrollDirection::Up { 0.8 } else { 0.2 }),
                    lift: Point::new(0.5, if dir == ScrollDirection::Up { 0.3 } else { 0.7 }),
                }),
            });
        }
        let e = Episode { id: "e".into(), subset: "General".into(), goal: "g".into(), steps };
        let actions: Vec<ActionOutcome> = (0..10)
            .map(|i| {
                if i < 7 {
                    ActionOutcome::Action(Action::Click { target: ClickTarget::Element(0) })
                } else {
                    ActionOutcome::Action(Action::Scroll { direction: ScrollDirection::Up })
                }
            })
            .collect();
        let t = trace_for(&e, actions, Some(TerminationKind::EpisodeEnd));
        let episodes: BTreeMap<String, &Episode> = [("e".to_string(), &e)].into_iter().collect();
        let b = action_breakdown(&[t], &episodes, &EvalConfig::default()).unwrap();
        let click = &b.rows[0];
        assert_eq!(click.action_type, "click");
        assert!((click.predicted_ratio - 70.0).abs() < 1e-9);
        assert!((click.accuracy_ratio - 50.0).abs() < 1e-9);
        let scroll = &b.rows[1];
        assert!((scroll.predicted_ratio - 30.0).abs() < 1e-9);
        assert!((scroll.accuracy_ratio - 10.0).abs() < 1e-9);
    }

    #[test]
    fn one_unparseable_among_ten_sums_to_ninety() {
        let e = four_step_episode();
        let extended = Episode {
            steps: vec![e.steps[0].clone(); 10],
            ..e.clone()
        };
        let mut all: Vec<ActionOutcome> = (0..10).map(|_| ActionOutcome::Action(Action::PressEnter)).collect();
        all[4] = ActionOutcome::Unparseable { reason: "noise".into() };
        let t = trace_for(&extended, all, Some(TerminationKind::EpisodeEnd));
        let episodes: BTreeMap<String, &Episode> = [("e".to_string(), &extended)].into_iter().collect();
        let b = action_breakdown(&[t], &episodes, &EvalConfig::default()).unwrap();
        assert_eq!(b.evaluated_turns, 10);
        assert_eq!(b.unparseable_count, 1);
        let ratio_sum: f64 = b.rows.iter().map(|r| r.predicted_ratio).sum();
        assert!((ratio_sum - 90.0).abs() < 1e-9);
        assert!((b.unparseable_ratio - 10.0).abs() < 1e-9);
    }

    #[test]
    fn accuracy_never_exceeds_predicted() {
        let e = four_step_episode();
        let t = trace_for(
            &e,
            vec![
                ActionOutcome::Action(Action::PressEnter),
                ActionOutcome::Action(Action::StatusComplete),
            ],
            Some(TerminationKind::StatusComplete),
        );
        let episodes: BTreeMap<String, &Episode> = [("e".to_string(), &e)].into_iter().collect();
        let b = action_breakdown(&[t], &episodes, &EvalConfig::default()).unwrap();
        for row in &b.rows {
            assert!(row.accuracy_ratio <= row.predicted_ratio + 1e-12);
        }
    }
}
