//! Screen serialization into the pseudo-HTML markup injected into prompts,
//! plus the geometry used to resolve predicted click targets.
//!
//! Two canonical line forms are emitted, one per element kind:
//!
//! ```text
//! <p id=0 class="text" alt="Mon, Oct 10">Mon, Oct 10</p>
//! <img id=1 class=ICON_CLOUD alt=""></p>
//! ```
//!
//! The `</p>` closing an `<img>` is intentional: it mirrors the markup the
//! agent stack was built around, so prompts stay bit-stable.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::model::{BBox, ElementKind, Point, Screen, UiElement};

/// A serialized screen: the `Screen:` header plus one markup line per
/// element, in index order.
#[derive(Clone, Debug, PartialEq)]
pub struct ScreenMarkup {
    pub lines: Vec<String>,
}

impl ScreenMarkup {
    pub const HEADER: &'static str = "Screen:";

    /// Header and lines joined with newlines; no trailing newline.
    pub fn to_text(&self) -> String {
        if self.lines.is_empty() {
            Self::HEADER.to_string()
        } else {
            format!("{}\n{}", Self::HEADER, self.lines.join("\n"))
        }
    }
}

/// Replace characters that would corrupt the line grammar with spaces.
pub fn sanitize_text(text: &str) -> String {
    text.chars()
        .map(|c| if c == '<' || c == '>' || c == '"' { ' ' } else { c })
        .collect()
}

pub fn serialize_element(e: &UiElement) -> String {
    match &e.kind {
        ElementKind::Text => {
            let t = sanitize_text(&e.text);
            format!("<p id={} class=\"text\" alt=\"{t}\">{t}</p>", e.idx)
        }
        ElementKind::Icon { class } => {
            format!("<img id={} class={} alt=\"\"></p>", e.idx, sanitize_text(class).replace(' ', "_"))
        }
    }
}

/// Render a screen into its markup block. Pure: equal screens serialize to
/// equal markup.
pub fn serialize_screen(s: &Screen) -> ScreenMarkup {
    ScreenMarkup {
        lines: s.elements.iter().map(serialize_element).collect(),
    }
}

/// The five geometric sample points of a box, in the fixed order
/// top-left, top-right, bottom-left, bottom-right, center.
pub fn bbox_points(b: &BBox) -> [Point; 5] {
    [
        Point::new(b.min.x, b.min.y),
        Point::new(b.max.x, b.min.y),
        Point::new(b.min.x, b.max.y),
        Point::new(b.max.x, b.max.y),
        b.center(),
    ]
}

pub fn element_points(e: &UiElement) -> [Point; 5] {
    bbox_points(&e.bbox)
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("click target {idx} is not on a screen with {element_count} elements")]
pub struct UnresolvedTarget {
    pub idx: usize,
    pub element_count: usize,
}

/// Geometry of a predicted click: the target element's box and its sample
/// points. An index that is not on the screen is an unresolved target,
/// which the evaluator counts as a mismatch.
pub fn resolve_click_target(s: &Screen, idx: usize) -> Result<(BBox, [Point; 5]), UnresolvedTarget> {
    match s.element(idx) {
        Some(e) => Ok((e.bbox, element_points(e))),
        None => Err(UnresolvedTarget {
            idx,
            element_count: s.elements.len(),
        }),
    }
}

/// Fields recovered from one markup line.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedLine {
    pub idx: usize,
    pub kind: ElementKind,
    pub text: String,
}

static TEXT_LINE: OnceLock<Regex> = OnceLock::new();
static ICON_LINE: OnceLock<Regex> = OnceLock::new();

/// Parse one markup line back to `(idx, kind, text)`. Returns `None` for
/// lines outside the two canonical forms.
pub fn parse_markup_line(line: &str) -> Option<ParsedLine> {
    let text_re = TEXT_LINE.get_or_init(|| {
        Regex::new(r#"^<p id=(\d+) class="text" alt="([^"]*)">[^"]*</p>$"#).unwrap()
    });
    let icon_re = ICON_LINE.get_or_init(|| {
        Regex::new(r#"^<img id=(\d+) class=(\S*) alt=""></p>$"#).unwrap()
    });
    if let Some(c) = text_re.captures(line) {
        return Some(ParsedLine {
            idx: c[1].parse().ok()?,
            kind: ElementKind::Text,
            text: c[2].to_string(),
        });
    }
    if let Some(c) = icon_re.captures(line) {
        return Some(ParsedLine {
            idx: c[1].parse().ok()?,
            kind: ElementKind::Icon { class: c[2].to_string() },
            text: String::new(),
        });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Screen;

    fn text_el(idx: usize, text: &str) -> UiElement {
        UiElement {
            idx,
            kind: ElementKind::Text,
            text: text.into(),
            bbox: BBox::new(Point::new(0.1, 0.2), Point::new(0.5, 0.3)),
        }
    }

    fn icon_el(idx: usize, class: &str) -> UiElement {
        UiElement {
            idx,
            kind: ElementKind::Icon { class: class.into() },
            text: String::new(),
            bbox: BBox::new(Point::new(0.6, 0.2), Point::new(0.9, 0.3)),
        }
    }

    #[test]
    fn text_line_matches_reference_form() {
        let el = text_el(0, "Mon, Oct 10");
        assert_eq!(
            serialize_element(&el),
            "<p id=0 class=\"text\" alt=\"Mon, Oct 10\">Mon, Oct 10</p>"
        );
    }

    #[test]
    fn icon_line_matches_reference_form() {
        let el = icon_el(1, "ICON_CLOUD");
        assert_eq!(serialize_element(&el), "<img id=1 class=ICON_CLOUD alt=\"\"></p>");
    }

    #[test]
    fn empty_screen_is_header_only() {
        let s = Screen { elements: vec![], caption: None, image_ref: None };
        let m = serialize_screen(&s);
        assert_eq!(m.lines.len(), 0);
        assert_eq!(m.to_text(), "Screen:");
    }

    #[test]
    fn markup_text_is_sanitized() {
        let el = text_el(0, "a<b>\"c\"");
        let line = serialize_element(&el);
        assert_eq!(line, "<p id=0 class=\"text\" alt=\"a b  c \">a b  c </p>");
        assert!(parse_markup_line(&line).is_some());
    }

    #[test]
    fn unit_box_sample_points() {
        let b = BBox::new(Point::new(0.0, 0.0), Point::new(1.0, 1.0));
        let pts = bbox_points(&b);
        assert_eq!(pts[0], Point::new(0.0, 0.0));
        assert_eq!(pts[1], Point::new(1.0, 0.0));
        assert_eq!(pts[2], Point::new(0.0, 1.0));
        assert_eq!(pts[3], Point::new(1.0, 1.0));
        assert_eq!(pts[4], Point::new(0.5, 0.5));
    }

    #[test]
    fn degenerate_box_gives_five_identical_points() {
        let p = Point::new(0.5, 0.5);
        let pts = bbox_points(&BBox::new(p, p));
        assert!(pts.iter().all(|q| *q == p));
    }

    #[test]
    fn center_of_offset_box() {
        let b = BBox::new(Point::new(0.2, 0.2), Point::new(0.4, 0.6));
        let c = bbox_points(&b)[4];
        assert!((c.x - 0.3).abs() < 1e-12 && (c.y - 0.4).abs() < 1e-12);
    }

    #[test]
    fn resolve_in_and_out_of_range() {
        let s = Screen {
            elements: vec![text_el(0, "a"), text_el(1, "b"), icon_el(2, "ICON_MIC")],
            caption: None,
            image_ref: None,
        };
        let (bbox, _) = resolve_click_target(&s, 2).unwrap();
        assert_eq!(bbox, s.elements[2].bbox);
        let err = resolve_click_target(&s, 9).unwrap_err();
        assert_eq!(err, UnresolvedTarget { idx: 9, element_count: 3 });
    }

    #[test]
    fn lines_round_trip_to_fields() {
        for el in [text_el(3, "Do Not Disturb"), icon_el(7, "ICON_V_BACKWARD")] {
            let parsed = parse_markup_line(&serialize_element(&el)).unwrap();
            assert_eq!(parsed.idx, el.idx);
            assert_eq!(parsed.kind, el.kind);
            assert_eq!(parsed.text, el.text);
        }
    }
}
