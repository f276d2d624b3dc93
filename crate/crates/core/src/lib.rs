//! Orchestration runtime and offline evaluation harness for dynamic-planning
//! GUI agents: per-turn plan generation, step selection, action grounding,
//! execution-history updating, and replay-based scoring against gold action
//! traces.
//!
//! The crate is organized around the run pipeline:
//!
//! - [`model`] — episodes, screens, actions; dataset load/validate/generate
//! - [`screen`] — pseudo-HTML screen markup and click-target geometry
//! - [`prompt`] — prompt builders for every strategy
//! - [`gateway`] — chat-completion backends (HTTP and scripted) with usage
//!   accounting
//! - [`parser`] — plan/step and action extraction from raw model output
//! - [`retrieval`] — goal-similarity references for with-reference planning
//! - [`agent`] — the per-episode orchestration loop
//! - [`eval`] — screen-wise action matching and score aggregation
//! - [`report`] — trace persistence, cost summaries, and report rendering

pub mod agent;
pub mod eval;
pub mod gateway;
pub mod model;
pub mod parser;
pub mod prompt;
pub mod report;
pub mod retrieval;
pub mod screen;

pub use agent::{run_episode, EpisodeTrace, RunConfig, TurnRecord};
pub use eval::{aggregate, match_action, score_episode, EvalConfig};
pub use gateway::{DecodingConfig, Gateway};
pub use model::{generate_synthetic, load_dataset, validate_episode, Dataset, Episode};
