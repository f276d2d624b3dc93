//! Structural validation of episodes. Violations are data, not failures:
//! the report is deterministic and ordered by step index.

use std::fmt;

use super::{Action, ClickTarget, ElementKind, Episode, GoldStep, Point};

/// One invariant violation, pointing at the step and field that broke it.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// Step index, or `None` for episode-level problems.
    pub step: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(i) => write!(f, "step {i}, {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

fn push(out: &mut Vec<Violation>, step: Option<usize>, field: impl Into<String>, message: impl Into<String>) {
    out.push(Violation {
        step,
        field: field.into(),
        message: message.into(),
    });
}

fn check_point(out: &mut Vec<Violation>, step: usize, field: &str, p: &Point) {
    if !p.in_unit_square() {
        push(out, Some(step), field, format!("point ({}, {}) outside the unit square", p.x, p.y));
    }
}

/// Check every episode invariant. An empty report means the episode is valid.
pub fn validate_episode(e: &Episode) -> Vec<Violation> {
    let mut out = Vec::new();
    if e.id.is_empty() {
        push(&mut out, None, "id", "episode id is empty");
    }
    if e.steps.is_empty() {
        push(&mut out, None, "steps", "episode has no steps");
    }
    for (i, step) in e.steps.iter().enumerate() {
        check_step(&mut out, i, step);
    }
    out
}

fn check_step(out: &mut Vec<Violation>, i: usize, step: &GoldStep) {
    for (j, el) in step.screen.elements.iter().enumerate() {
        let base = format!("elements[{j}]");
        if el.idx != j {
            push(out, Some(i), format!("{base}.idx"), format!("idx {} at position {j}; indices must be 0..n-1 with no gaps", el.idx));
        }
        if matches!(el.kind, ElementKind::Text) && el.text.is_empty() {
            push(out, Some(i), format!("{base}.text"), "text element with empty text");
        }
        let b = &el.bbox;
        if b.min.x > b.max.x || b.min.y > b.max.y {
            push(out, Some(i), format!("{base}.bbox"), "bbox min exceeds max");
        }
        check_point(out, i, &format!("{base}.bbox.min"), &b.min);
        check_point(out, i, &format!("{base}.bbox.max"), &b.max);
    }

    match &step.action {
        Action::Click { target } => {
            if let ClickTarget::Element(idx) = target {
                if step.screen.element(*idx).is_none() {
                    push(out, Some(i), "gold.idx", format!("click target {idx} not on a screen with {} elements", step.screen.elements.len()));
                }
            }
            if step.gesture.is_none() {
                push(out, Some(i), "gold.touch", "click gold step has no gesture");
            }
        }
        Action::Scroll { direction } => match &step.gesture {
            None => push(out, Some(i), "gold.touch", "scroll gold step has no gesture"),
            Some(g) => match g.dominant_direction() {
                None => push(out, Some(i), "gold.lift", "scroll gesture has zero displacement"),
                Some(d) if d != *direction => push(
                    out,
                    Some(i),
                    "gold.direction",
                    format!("recorded direction {} but gesture dominant axis is {}", direction.as_str(), d.as_str()),
                ),
                Some(_) => {}
            },
        },
        _ => {
            if step.gesture.is_some() {
                push(out, Some(i), "gold.touch", format!("{} gold step carries a gesture", step.action.kind().as_str()));
            }
        }
    }

    if let Some(g) = &step.gesture {
        check_point(out, i, "gold.touch", &g.touch);
        // Taps have touch == lift; one citation covers both.
        if g.lift != g.touch {
            check_point(out, i, "gold.lift", &g.lift);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BBox, GoldGesture, Screen, ScrollDirection, UiElement};

    fn element(idx: usize, text: &str) -> UiElement {
        UiElement {
            idx,
            kind: ElementKind::Text,
            text: text.into(),
            bbox: BBox::new(Point::new(0.1, 0.1), Point::new(0.3, 0.2)),
        }
    }

    fn screen() -> Screen {
        Screen {
            elements: vec![element(0, "Settings"), element(1, "About")],
            caption: None,
            image_ref: None,
        }
    }

    fn tap(p: Point) -> Option<GoldGesture> {
        Some(GoldGesture { touch: p, lift: p })
    }

    fn well_formed() -> Episode {
        Episode {
            id: "ep".into(),
            subset: "General".into(),
            goal: "open about".into(),
            steps: vec![
                GoldStep {
                    screen: screen(),
                    action: Action::Click { target: ClickTarget::Element(1) },
                    gesture: tap(Point::new(0.2, 0.15)),
                },
                GoldStep {
                    screen: screen(),
                    action: Action::StatusComplete,
                    gesture: None,
                },
            ],
        }
    }

    #[test]
    fn well_formed_episode_has_empty_report() {
        assert!(validate_episode(&well_formed()).is_empty());
    }

    #[test]
    fn out_of_range_point_is_cited() {
        let mut e = well_formed();
        e.steps[0].gesture = tap(Point::new(0.2, 1.2));
        let report = validate_episode(&e);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].step, Some(0));
        assert!(report[0].message.contains("1.2"));
    }

    #[test]
    fn scroll_direction_must_match_dominant_axis() {
        // touch (0.5, 0.8) -> lift (0.5, 0.2): dominant axis is Up, so a
        // recorded Down is one violation.
        let mut e = well_formed();
        e.steps[0].action = Action::Scroll { direction: ScrollDirection::Down };
        e.steps[0].gesture = Some(GoldGesture {
            touch: Point::new(0.5, 0.8),
            lift: Point::new(0.5, 0.2),
        });
        let report = validate_episode(&e);
        assert_eq!(report.len(), 1);
        assert!(report[0].message.contains("up"), "{}", report[0].message);
    }

    #[test]
    fn click_target_must_exist() {
        let mut e = well_formed();
        e.steps[0].action = Action::Click { target: ClickTarget::Element(9) };
        let report = validate_episode(&e);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].field, "gold.idx");
    }

    #[test]
    fn violations_ordered_by_step_index() {
        let mut e = well_formed();
        e.steps[1].gesture = tap(Point::new(0.5, 0.5));
        e.steps[0].gesture = tap(Point::new(-0.1, 0.5));
        let report = validate_episode(&e);
        assert_eq!(report.len(), 2);
        assert!(report[0].step <= report[1].step);
    }
}
