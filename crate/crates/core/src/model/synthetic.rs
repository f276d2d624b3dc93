//! Desk-scale synthetic dataset generation. Generation is a pure function
//! of `(seed, n_episodes, params)`: two calls with the same inputs produce
//! byte-identical serialized datasets.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    Action, BBox, ClickTarget, Dataset, DatasetError, ElementKind, Episode, GoldGesture,
    GoldStep, NavDest, Point, Screen, ScrollDirection, UiElement,
};

const SUBSETS: [&str; 5] = ["General", "GoogleApps", "Install", "Single", "WebShopping"];

const APPS: [&str; 12] = [
    "Settings", "Chrome", "Gmail", "Calendar", "Maps", "Photos", "Clock", "Camera",
    "Play Store", "Drive", "YouTube", "Contacts",
];

const TOPICS: [&str; 10] = [
    "battery level", "storage usage", "wifi password", "screen brightness",
    "notification sound", "privacy controls", "location accuracy", "font size",
    "app permissions", "data usage",
];

const VERBS: [&str; 6] = ["check", "open", "find", "show", "adjust", "review"];

const LABELS: [&str; 30] = [
    "Search", "Install", "Update", "Open", "Share", "Settings", "Network", "Display",
    "Sound", "Storage", "Privacy", "Location", "Security", "Accounts", "System", "About",
    "Battery", "Apps", "Notifications", "Wallpaper", "Bluetooth", "Wi-Fi", "Airplane",
    "Hotspot", "Backup", "Reset", "Language", "Keyboard", "Date", "Time",
];

const ICON_CLASSES: [&str; 12] = [
    "ICON_HOME", "ICON_SEARCH", "ICON_ARROW_BACKWARD", "ICON_MIC", "ICON_PLUS",
    "ICON_SETTINGS", "ICON_CHAT", "ICON_CALL", "ICON_CLOUD", "ICON_PLAY",
    "ICON_GOOGLE", "ICON_LOCATION",
];

/// Size ranges for generated episodes. `steps` includes the final
/// status-complete step, so it must allow at least two steps.
#[derive(Clone, Debug)]
pub struct SyntheticParams {
    pub steps: RangeInclusive<usize>,
    pub elements: RangeInclusive<usize>,
    pub subsets: Vec<String>,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            steps: 4..=9,
            elements: 10..=28,
            subsets: SUBSETS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl SyntheticParams {
    fn check(&self, n_episodes: usize) -> Result<(), DatasetError> {
        let bad = |message: &str| DatasetError::DegenerateParams { message: message.to_string() };
        if n_episodes == 0 {
            return Err(bad("n_episodes must be at least 1"));
        }
        if self.steps.is_empty() {
            return Err(bad("empty steps range"));
        }
        if *self.steps.start() < 2 {
            return Err(bad("episodes need at least 2 steps (one click plus the final status)"));
        }
        if self.elements.is_empty() {
            return Err(bad("empty elements range"));
        }
        if *self.elements.start() < 1 {
            return Err(bad("screens need at least 1 element"));
        }
        if self.subsets.is_empty() {
            return Err(bad("no subset tags"));
        }
        Ok(())
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &'a [&'a str]) -> &'a str {
    items[rng.random_range(0..items.len())]
}

fn range_sample(rng: &mut ChaCha8Rng, r: &RangeInclusive<usize>) -> usize {
    rng.random_range(*r.start()..=*r.end())
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

fn make_goal(rng: &mut ChaCha8Rng, used: &mut BTreeSet<String>) -> String {
    loop {
        let goal = format!(
            "{} the {} in {}",
            pick(rng, &VERBS),
            pick(rng, &TOPICS),
            pick(rng, &APPS)
        );
        if used.insert(goal.clone()) {
            return goal;
        }
    }
}

fn make_screen(rng: &mut ChaCha8Rng, n_elements: usize, caption: Option<String>) -> Screen {
    let cols = 3usize;
    let rows = n_elements.div_ceil(cols).max(1);
    let row_h = (1.0 / rows as f64).min(0.15);
    let mut used_texts = BTreeSet::new();
    let mut elements = Vec::with_capacity(n_elements);
    for idx in 0..n_elements {
        let col = idx % cols;
        let row = idx / cols;
        let cell_x0 = col as f64 / cols as f64;
        let cell_y0 = row as f64 * row_h;
        let pad_x = rng.random_range(0.01..0.05);
        let pad_y = rng.random_range(0.005..0.02);
        let w = rng.random_range(0.12..(1.0 / cols as f64 - 2.0 * pad_x));
        let h = rng.random_range(0.02..(row_h - 2.0 * pad_y).max(0.021));
        let min = Point::new(cell_x0 + pad_x, (cell_y0 + pad_y).min(1.0 - h));
        let max = Point::new((min.x + w).min(1.0), (min.y + h).min(1.0));
        let bbox = BBox::new(min, max);
        if rng.random_bool(0.25) {
            elements.push(UiElement {
                idx,
                kind: ElementKind::Icon { class: pick(rng, &ICON_CLASSES).to_string() },
                text: String::new(),
                bbox,
            });
        } else {
            let mut text = pick(rng, &LABELS).to_string();
            if !used_texts.insert(text.clone()) {
                text = format!("{text} {idx}");
                used_texts.insert(text.clone());
            }
            elements.push(UiElement { idx, kind: ElementKind::Text, text, bbox });
        }
    }
    Screen { elements, caption, image_ref: None }
}

fn click_step(rng: &mut ChaCha8Rng, screen: Screen) -> GoldStep {
    let idx = rng.random_range(0..screen.elements.len());
    let b = screen.elements[idx].bbox;
    let p = Point::new(
        lerp(b.min.x, b.max.x, rng.random_range(0.2..0.8)),
        lerp(b.min.y, b.max.y, rng.random_range(0.2..0.8)),
    );
    GoldStep {
        screen,
        action: Action::Click { target: ClickTarget::Element(idx) },
        gesture: Some(GoldGesture { touch: p, lift: p }),
    }
}

fn scroll_step(rng: &mut ChaCha8Rng, screen: Screen) -> GoldStep {
    let direction = match rng.random_range(0..4) {
        0 => ScrollDirection::Up,
        1 => ScrollDirection::Down,
        2 => ScrollDirection::Left,
        _ => ScrollDirection::Right,
    };
    let d = rng.random_range(0.12..0.3);
    let along = rng.random_range(0.35..0.65);
    let across = rng.random_range(0.2..0.8);
    // Direction names the content-movement command: an Up scroll moves the
    // finger toward the top of the screen (lift above touch).
    let (touch, lift) = match direction {
        ScrollDirection::Up => (Point::new(across, along + d / 2.0), Point::new(across, along - d / 2.0)),
        ScrollDirection::Down => (Point::new(across, along - d / 2.0), Point::new(across, along + d / 2.0)),
        ScrollDirection::Left => (Point::new(along + d / 2.0, across), Point::new(along - d / 2.0, across)),
        ScrollDirection::Right => (Point::new(along - d / 2.0, across), Point::new(along + d / 2.0, across)),
    };
    GoldStep {
        screen,
        action: Action::Scroll { direction },
        gesture: Some(GoldGesture { touch, lift }),
    }
}

fn middle_step(rng: &mut ChaCha8Rng, screen: Screen) -> GoldStep {
    match rng.random_range(0..100) {
        0..=49 => click_step(rng, screen),
        50..=69 => scroll_step(rng, screen),
        70..=81 => {
            let text = format!("{} {}", pick(rng, &LABELS).to_lowercase(), pick(rng, &TOPICS));
            GoldStep { screen, action: Action::Type { text }, gesture: None }
        }
        82..=87 => GoldStep { screen, action: Action::Navigate { dest: NavDest::Home }, gesture: None },
        88..=92 => GoldStep { screen, action: Action::Navigate { dest: NavDest::Back }, gesture: None },
        _ => GoldStep { screen, action: Action::PressEnter, gesture: None },
    }
}

/// Generate a deterministic dataset. Every episode carries at least one
/// click, ends with a status-complete gold action, and passes
/// [`super::validate_episode`].
pub fn generate_synthetic(
    seed: u64,
    n_episodes: usize,
    params: &SyntheticParams,
) -> Result<Dataset, DatasetError> {
    params.check(n_episodes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used_goals = BTreeSet::new();
    let mut episodes = Vec::with_capacity(n_episodes);
    for i in 0..n_episodes {
        let subset = params.subsets[rng.random_range(0..params.subsets.len())].clone();
        let goal = make_goal(&mut rng, &mut used_goals);
        let app = pick(&mut rng, &APPS);
        let n_steps = range_sample(&mut rng, &params.steps);
        let mut steps = Vec::with_capacity(n_steps);
        for j in 0..n_steps {
            let caption = if j == 0 {
                Some(format!("The screen shows the {app} app home view with a list of options."))
            } else if rng.random_bool(0.2) {
                Some(format!("A {app} screen with more options."))
            } else {
                None
            };
            let n_elements = range_sample(&mut rng, &params.elements);
            let screen = make_screen(&mut rng, n_elements, caption);
            if j == n_steps - 1 {
                steps.push(GoldStep { screen, action: Action::StatusComplete, gesture: None });
            } else if j == 0 {
                steps.push(click_step(&mut rng, screen));
            } else {
                steps.push(middle_step(&mut rng, screen));
            }
        }
        episodes.push(Episode {
            id: format!("syn-{seed}-{i:04}"),
            subset,
            goal,
            steps,
        });
    }
    Ok(Dataset::new(episodes, format!("synthetic(seed={seed}, n={n_episodes})")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{dataset_to_jsonl, validate_episode};

    #[test]
    fn same_seed_is_byte_identical() {
        let p = SyntheticParams::default();
        let a = generate_synthetic(7, 3, &p).unwrap();
        let b = generate_synthetic(7, 3, &p).unwrap();
        assert_eq!(dataset_to_jsonl(&a.episodes), dataset_to_jsonl(&b.episodes));
    }

    #[test]
    fn different_seeds_differ() {
        let p = SyntheticParams::default();
        let a = generate_synthetic(7, 3, &p).unwrap();
        let b = generate_synthetic(8, 3, &p).unwrap();
        assert_ne!(dataset_to_jsonl(&a.episodes), dataset_to_jsonl(&b.episodes));
    }

    #[test]
    fn episodes_end_complete_and_contain_a_click() {
        let ds = generate_synthetic(7, 3, &SyntheticParams::default()).unwrap();
        for e in &ds.episodes {
            assert_eq!(e.steps.last().unwrap().action, Action::StatusComplete);
            assert!(e.steps.iter().any(|s| matches!(s.action, Action::Click { .. })));
        }
    }

    #[test]
    fn generated_episodes_pass_validation() {
        let ds = generate_synthetic(7, 3, &SyntheticParams::default()).unwrap();
        for e in &ds.episodes {
            let report = validate_episode(e);
            assert!(report.is_empty(), "episode {} has violations: {report:?}", e.id);
        }
    }

    #[test]
    fn click_gestures_land_inside_their_target() {
        let ds = generate_synthetic(11, 5, &SyntheticParams::default()).unwrap();
        for e in &ds.episodes {
            for s in &e.steps {
                if let Action::Click { target: ClickTarget::Element(idx) } = &s.action {
                    let g = s.gesture.expect("click has gesture");
                    assert_eq!(g.touch, g.lift);
                    assert!(s.screen.elements[*idx].bbox.contains(&g.touch));
                }
            }
        }
    }

    #[test]
    fn degenerate_params_are_rejected() {
        let p = SyntheticParams { steps: 5..=4, ..SyntheticParams::default() };
        assert!(generate_synthetic(1, 1, &p).is_err());
        assert!(generate_synthetic(1, 0, &SyntheticParams::default()).is_err());
    }
}
