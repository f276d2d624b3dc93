//! On-disk episode format: one JSON object per line, schema documented in
//! the README. Loading validates every episode; a dataset never leaves this
//! module in a state that fails [`validate_episode`].

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::validate::{validate_episode, Violation};
use super::{
    Action, BBox, ClickTarget, Dataset, ElementKind, Episode, GoldGesture, GoldStep, Point,
    Screen, ScrollDirection, UiElement,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: malformed episode record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: field `{field}`: {message}")]
    Record {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: duplicate episode id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("episode `{id}` fails validation: {}", summarize(.violations))]
    InvalidEpisode { id: String, violations: Vec<Violation> },
    #[error("degenerate generation parameters: {message}")]
    DegenerateParams { message: String },
}

fn summarize(violations: &[Violation]) -> String {
    let shown: Vec<String> = violations.iter().take(3).map(|v| v.to_string()).collect();
    let mut s = shown.join("; ");
    if violations.len() > 3 {
        s.push_str(&format!(" (+{} more)", violations.len() - 3));
    }
    s
}

#[derive(Serialize, Deserialize)]
struct EpisodeRecord {
    id: String,
    subset: String,
    goal: String,
    steps: Vec<StepRecord>,
}

#[derive(Serialize, Deserialize)]
struct StepRecord {
    elements: Vec<ElementRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_ref: Option<String>,
    gold: GoldRecord,
}

#[derive(Serialize, Deserialize)]
struct ElementRecord {
    idx: usize,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<String>,
    text: String,
    bbox: [f64; 4],
}

#[derive(Serialize, Deserialize, Default)]
struct GoldRecord {
    action_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    idx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    direction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    touch: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lift: Option<[f64; 2]>,
}

struct FieldError {
    field: String,
    message: String,
}

fn field_err(field: &str, message: impl Into<String>) -> FieldError {
    FieldError {
        field: field.to_string(),
        message: message.into(),
    }
}

fn element_from_record(step: usize, j: usize, r: ElementRecord) -> Result<UiElement, FieldError> {
    let kind = match r.kind.as_str() {
        "text" => ElementKind::Text,
        "icon" => ElementKind::Icon {
            class: r.class.unwrap_or_default(),
        },
        other => {
            return Err(field_err(
                &format!("steps[{step}].elements[{j}].kind"),
                format!("unknown kind `{other}` (expected `text` or `icon`)"),
            ))
        }
    };
    let [x0, y0, x1, y1] = r.bbox;
    Ok(UiElement {
        idx: r.idx,
        kind,
        text: r.text,
        bbox: BBox::new(Point::new(x0, y0), Point::new(x1, y1)),
    })
}

fn gold_from_record(step: usize, r: GoldRecord) -> Result<(Action, Option<GoldGesture>), FieldError> {
    let at_field = format!("steps[{step}].gold.action_type");
    let gesture = match (r.touch, r.lift) {
        (Some(t), Some(l)) => Some(GoldGesture {
            touch: Point::new(t[0], t[1]),
            lift: Point::new(l[0], l[1]),
        }),
        (None, None) => None,
        (Some(_), None) => {
            return Err(field_err(&format!("steps[{step}].gold.lift"), "touch present without lift"))
        }
        (None, Some(_)) => {
            return Err(field_err(&format!("steps[{step}].gold.touch"), "lift present without touch"))
        }
    };
    let action = match r.action_type.as_str() {
        "click" => {
            let target = if let Some(idx) = r.idx {
                ClickTarget::Element(idx)
            } else if let Some(g) = &gesture {
                ClickTarget::Point(g.touch)
            } else {
                return Err(field_err(
                    &format!("steps[{step}].gold.idx"),
                    "click gold needs an element idx or a touch point",
                ));
            };
            Action::Click { target }
        }
        "scroll" => {
            let dir = r.direction.as_deref().ok_or_else(|| {
                field_err(&format!("steps[{step}].gold.direction"), "scroll gold needs a direction")
            })?;
            let direction = ScrollDirection::parse(dir).ok_or_else(|| {
                field_err(
                    &format!("steps[{step}].gold.direction"),
                    format!("unknown direction `{dir}`"),
                )
            })?;
            Action::Scroll { direction }
        }
        "type" => {
            let text = r.text.ok_or_else(|| {
                field_err(&format!("steps[{step}].gold.text"), "type gold needs a text")
            })?;
            Action::Type { text }
        }
        "navigate_home" => Action::Navigate { dest: super::NavDest::Home },
        "navigate_back" => Action::Navigate { dest: super::NavDest::Back },
        "press_enter" => Action::PressEnter,
        "status_complete" => Action::StatusComplete,
        other => return Err(field_err(&at_field, format!("unknown action_type `{other}`"))),
    };
    Ok((action, gesture))
}

fn episode_from_record(r: EpisodeRecord) -> Result<Episode, FieldError> {
    let mut steps = Vec::with_capacity(r.steps.len());
    for (i, s) in r.steps.into_iter().enumerate() {
        let mut elements = Vec::with_capacity(s.elements.len());
        for (j, el) in s.elements.into_iter().enumerate() {
            elements.push(element_from_record(i, j, el)?);
        }
        let (action, gesture) = gold_from_record(i, s.gold)?;
        steps.push(GoldStep {
            screen: Screen {
                elements,
                caption: s.caption,
                image_ref: s.image_ref,
            },
            action,
            gesture,
        });
    }
    Ok(Episode {
        id: r.id,
        subset: r.subset,
        goal: r.goal,
        steps,
    })
}

fn episode_to_record(e: &Episode) -> EpisodeRecord {
    EpisodeRecord {
        id: e.id.clone(),
        subset: e.subset.clone(),
        goal: e.goal.clone(),
        steps: e
            .steps
            .iter()
            .map(|s| StepRecord {
                elements: s
                    .screen
                    .elements
                    .iter()
                    .map(|el| {
                        let (kind, class) = match &el.kind {
                            ElementKind::Text => ("text", None),
                            ElementKind::Icon { class } => ("icon", Some(class.clone())),
                        };
                        ElementRecord {
                            idx: el.idx,
                            kind: kind.to_string(),
                            class,
                            text: el.text.clone(),
                            bbox: [el.bbox.min.x, el.bbox.min.y, el.bbox.max.x, el.bbox.max.y],
                        }
                    })
                    .collect(),
                caption: s.screen.caption.clone(),
                image_ref: s.screen.image_ref.clone(),
                gold: gold_to_record(s),
            })
            .collect(),
    }
}

fn gold_to_record(s: &GoldStep) -> GoldRecord {
    let mut r = GoldRecord {
        action_type: s.action.kind().as_str().to_string(),
        ..GoldRecord::default()
    };
    match &s.action {
        Action::Click { target } => match target {
            ClickTarget::Element(idx) => r.idx = Some(*idx),
            ClickTarget::Point(p) => {
                if s.gesture.is_none() {
                    r.touch = Some([p.x, p.y]);
                    r.lift = Some([p.x, p.y]);
                }
            }
        },
        Action::Scroll { direction } => r.direction = Some(direction.as_str().to_string()),
        Action::Type { text } => r.text = Some(text.clone()),
        _ => {}
    }
    if let Some(g) = &s.gesture {
        r.touch = Some([g.touch.x, g.touch.y]);
        r.lift = Some([g.lift.x, g.lift.y]);
    }
    r
}

/// Load a line-delimited dataset, optionally keeping only the given subsets.
/// Every returned episode passes [`validate_episode`].
pub fn load_dataset(
    path: &Path,
    subset_filter: Option<&BTreeSet<String>>,
) -> Result<Dataset, DatasetError> {
    let content = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let episodes = parse_jsonl(&content, subset_filter)?;
    Ok(Dataset::new(episodes, path.display().to_string()))
}

/// Load without rejecting invariant violations, so callers can report them.
/// Schema errors and duplicate ids still fail.
pub fn load_dataset_lenient(
    path: &Path,
    subset_filter: Option<&BTreeSet<String>>,
) -> Result<Dataset, DatasetError> {
    let content = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let episodes = parse_records(&content, subset_filter, false)?;
    Ok(Dataset::new(episodes, path.display().to_string()))
}

/// Parse already-read JSONL content. Exposed for in-memory round trips.
pub(crate) fn parse_jsonl(
    content: &str,
    subset_filter: Option<&BTreeSet<String>>,
) -> Result<Vec<Episode>, DatasetError> {
    parse_records(content, subset_filter, true)
}

fn parse_records(
    content: &str,
    subset_filter: Option<&BTreeSet<String>>,
    validate: bool,
) -> Result<Vec<Episode>, DatasetError> {
    let mut episodes = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in content.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: EpisodeRecord =
            serde_json::from_str(line).map_err(|e| DatasetError::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
        let episode = episode_from_record(record).map_err(|e| DatasetError::Record {
            line: lineno,
            field: e.field,
            message: e.message,
        })?;
        if !seen.insert(episode.id.clone()) {
            return Err(DatasetError::DuplicateId {
                line: lineno,
                id: episode.id,
            });
        }
        if validate {
            let violations = validate_episode(&episode);
            if !violations.is_empty() {
                return Err(DatasetError::InvalidEpisode {
                    id: episode.id,
                    violations,
                });
            }
        }
        if let Some(filter) = subset_filter {
            if !filter.contains(&episode.subset) {
                continue;
            }
        }
        episodes.push(episode);
    }
    Ok(episodes)
}

/// Serialize episodes to the line-delimited format, one record per line.
pub fn dataset_to_jsonl(episodes: &[Episode]) -> String {
    let mut out = String::new();
    for e in episodes {
        let record = episode_to_record(e);
        out.push_str(&serde_json::to_string(&record).expect("episode record serializes"));
        out.push('\n');
    }
    out
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<(), DatasetError> {
    fs::write(path, dataset_to_jsonl(&dataset.episodes)).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })
}
