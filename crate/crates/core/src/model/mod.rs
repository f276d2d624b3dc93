//! Episode, screen, and action data model, plus dataset loading, validation,
//! and synthetic generation.
//!
//! A [`Dataset`] is the replay unit collection: each [`Episode`] pairs a goal
//! with an ordered list of gold steps (screen observed + action taken by the
//! human demonstrator). Datasets and episodes are immutable after load and
//! safe to share read-only across concurrent episode runs.

mod record;
mod synthetic;
mod validate;

pub use record::{dataset_to_jsonl, load_dataset, load_dataset_lenient, save_dataset, DatasetError};
pub use synthetic::{generate_synthetic, SyntheticParams};
pub use validate::{validate_episode, Violation};

use std::collections::BTreeMap;

/// A point in normalized screen coordinates: `x` is a fraction of screen
/// width, `y` a fraction of screen height, both in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn in_unit_square(&self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }
}

/// Axis-aligned bounding box in normalized coordinates, `min` componentwise
/// less than or equal to `max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    pub fn center(&self) -> Point {
        Point::new((self.min.x + self.max.x) / 2.0, (self.min.y + self.max.y) / 2.0)
    }

    /// Containment is inclusive of the edges.
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// What a detected UI element is: OCR text or a classified icon.
#[derive(Clone, Debug, PartialEq)]
pub enum ElementKind {
    Text,
    Icon { class: String },
}

/// One detected element on a screen. Indices are dense per screen: element
/// `i` sits at position `i` of [`Screen::elements`].
#[derive(Clone, Debug, PartialEq)]
pub struct UiElement {
    pub idx: usize,
    pub kind: ElementKind,
    /// OCR text; empty for icons.
    pub text: String,
    pub bbox: BBox,
}

/// One observed screen: the detected elements, an optional scene caption
/// (consumed by reference blocks), and an optional opaque screenshot handle
/// for multimodal backends.
#[derive(Clone, Debug, PartialEq)]
pub struct Screen {
    pub elements: Vec<UiElement>,
    pub caption: Option<String>,
    pub image_ref: Option<String>,
}

impl Screen {
    pub fn element(&self, idx: usize) -> Option<&UiElement> {
        self.elements.get(idx).filter(|e| e.idx == idx)
    }
}

/// The recorded human touch/lift points for gesture actions. Equal points
/// encode taps; distinct points encode scrolls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoldGesture {
    pub touch: Point,
    pub lift: Point,
}

impl GoldGesture {
    /// Direction named by the dominant axis of `lift - touch`, with the
    /// content-movement convention: the finger moving toward the top of the
    /// screen is `Up`. Ties between axes resolve vertical. A zero
    /// displacement names no direction.
    pub fn dominant_direction(&self) -> Option<ScrollDirection> {
        let dx = self.lift.x - self.touch.x;
        let dy = self.lift.y - self.touch.y;
        if dx == 0.0 && dy == 0.0 {
            return None;
        }
        if dy.abs() >= dx.abs() {
            Some(if dy < 0.0 { ScrollDirection::Up } else { ScrollDirection::Down })
        } else {
            Some(if dx < 0.0 { ScrollDirection::Left } else { ScrollDirection::Right })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScrollDirection {
    Up,
    Down,
    Left,
    Right,
}

impl ScrollDirection {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScrollDirection::Up => "up",
            ScrollDirection::Down => "down",
            ScrollDirection::Left => "left",
            ScrollDirection::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "up" => Some(ScrollDirection::Up),
            "down" => Some(ScrollDirection::Down),
            "left" => Some(ScrollDirection::Left),
            "right" => Some(ScrollDirection::Right),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NavDest {
    Home,
    Back,
}

/// Where a click lands: a detected element by index, or a raw point when no
/// element is associated with the gesture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClickTarget {
    Element(usize),
    Point(Point),
}

/// The closed action set. Element existence for `Click` targets is checked
/// at resolution time against the screen the action runs on, not here.
#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Click { target: ClickTarget },
    Scroll { direction: ScrollDirection },
    Type { text: String },
    Navigate { dest: NavDest },
    PressEnter,
    StatusComplete,
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Click { .. } => ActionKind::Click,
            Action::Scroll { .. } => ActionKind::Scroll,
            Action::Type { .. } => ActionKind::Type,
            Action::Navigate { dest: NavDest::Home } => ActionKind::NavigateHome,
            Action::Navigate { dest: NavDest::Back } => ActionKind::NavigateBack,
            Action::PressEnter => ActionKind::PressEnter,
            Action::StatusComplete => ActionKind::StatusComplete,
        }
    }
}

/// Wire-level action discriminant. `Navigate` splits into its two
/// destinations because they are distinct `action_type` strings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    Click,
    Scroll,
    Type,
    NavigateHome,
    NavigateBack,
    PressEnter,
    StatusComplete,
}

impl ActionKind {
    /// Report row order: Click, Scroll, Type, Home, Back, Press, Complete.
    pub const ALL: [ActionKind; 7] = [
        ActionKind::Click,
        ActionKind::Scroll,
        ActionKind::Type,
        ActionKind::NavigateHome,
        ActionKind::NavigateBack,
        ActionKind::PressEnter,
        ActionKind::StatusComplete,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ActionKind::Click => "click",
            ActionKind::Scroll => "scroll",
            ActionKind::Type => "type",
            ActionKind::NavigateHome => "navigate_home",
            ActionKind::NavigateBack => "navigate_back",
            ActionKind::PressEnter => "press_enter",
            ActionKind::StatusComplete => "status_complete",
        }
    }
}

/// One gold step of an episode: the screen the demonstrator saw, the action
/// they took, and the recorded gesture for click/scroll actions.
#[derive(Clone, Debug, PartialEq)]
pub struct GoldStep {
    pub screen: Screen,
    pub action: Action,
    pub gesture: Option<GoldGesture>,
}

/// One recorded task: a goal plus the ordered gold steps that accomplish it.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub id: String,
    pub subset: String,
    pub goal: String,
    pub steps: Vec<GoldStep>,
}

/// Provenance for a loaded or generated dataset.
#[derive(Clone, Debug)]
pub struct DatasetManifest {
    pub source: String,
    pub loaded_at: String,
    pub counts: BTreeMap<String, usize>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub episodes: Vec<Episode>,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn new(episodes: Vec<Episode>, source: String) -> Self {
        let mut counts = BTreeMap::new();
        for e in &episodes {
            *counts.entry(e.subset.clone()).or_insert(0) += 1;
        }
        let manifest = DatasetManifest {
            source,
            loaded_at: chrono::Utc::now().to_rfc3339(),
            counts,
        };
        Self { episodes, manifest }
    }

    pub fn episode(&self, id: &str) -> Option<&Episode> {
        self.episodes.iter().find(|e| e.id == id)
    }
}
