//! Trace persistence, cost summaries, and report rendering.
//!
//! A run directory holds `manifest.json` plus an append-only
//! `traces.jsonl`: one line per turn and one footer line per episode,
//! flushed per episode so a crash leaves a parseable prefix. Concurrent
//! episode runs funnel their records through one serialized writer.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{EpisodeTrace, TerminationKind, TurnRecord};
use crate::eval::{ActionBreakdown, SubsetReport};

pub const TRACE_FILE: &str = "traces.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub strategy: String,
    pub backend: String,
    pub dataset_source: String,
    pub dataset_counts: BTreeMap<String, usize>,
    pub started_at: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    pub config: serde_json::Value,
}

impl RunManifest {
    /// A manifest stamped with the current time as its start.
    pub fn new(
        run_id: String,
        strategy: String,
        backend: String,
        dataset: &crate::model::DatasetManifest,
        config: serde_json::Value,
    ) -> Self {
        Self {
            run_id,
            strategy,
            backend,
            dataset_source: dataset.source.clone(),
            dataset_counts: dataset.counts.clone(),
            started_at: chrono::Utc::now().to_rfc3339(),
            finished_at: None,
            config,
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("run `{run_id}` already initialized in {dir}")]
    DuplicateRun { run_id: String, dir: String },
    #[error("trace line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("no traces")]
    Empty,
    #[error("serialization: {0}")]
    Serialize(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.display().to_string(), source }
}

#[derive(Serialize, Deserialize)]
struct TurnLine {
    episode_id: String,
    strategy: String,
    #[serde(flatten)]
    record: TurnRecord,
}

#[derive(Serialize, Deserialize)]
struct FooterLine {
    episode_id: String,
    strategy: String,
    subset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    terminated_by: Option<TerminationKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aborted: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TraceLine {
    Turn(TurnLine),
    Footer(FooterLine),
}

/// Append-only trace writer for one run directory. `init` fails on a
/// directory that already holds a manifest.
pub struct TraceWriter {
    dir: PathBuf,
    file: Mutex<BufWriter<File>>,
    manifest: Mutex<RunManifest>,
}

impl TraceWriter {
    pub fn init(dir: &Path, manifest: RunManifest) -> Result<Self, ReportError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        if manifest_path.exists() {
            return Err(ReportError::DuplicateRun {
                run_id: manifest.run_id,
                dir: dir.display().to_string(),
            });
        }
        fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?).map_err(io_err(&manifest_path))?;
        let trace_path = dir.join(TRACE_FILE);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&trace_path)
            .map_err(io_err(&trace_path))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            file: Mutex::new(BufWriter::new(file)),
            manifest: Mutex::new(manifest),
        })
    }

    /// Append a whole episode (its turn lines then a footer) and flush.
    pub fn append_episode(&self, trace: &EpisodeTrace) -> Result<(), ReportError> {
        let mut lines = String::new();
        for record in &trace.turns {
            let line = TurnLine {
                episode_id: trace.episode_id.clone(),
                strategy: trace.strategy.clone(),
                record: record.clone(),
            };
            lines.push_str(&serde_json::to_string(&line)?);
            lines.push('\n');
        }
        let footer = FooterLine {
            episode_id: trace.episode_id.clone(),
            strategy: trace.strategy.clone(),
            subset: trace.subset.clone(),
            terminated_by: trace.terminated_by,
            aborted: trace.abort_error.clone(),
        };
        lines.push_str(&serde_json::to_string(&footer)?);
        lines.push('\n');
        let mut file = self.file.lock().expect("trace writer poisoned");
        file.write_all(lines.as_bytes()).map_err(io_err(&self.dir.join(TRACE_FILE)))?;
        file.flush().map_err(io_err(&self.dir.join(TRACE_FILE)))?;
        Ok(())
    }

    /// Stamp the finish time and rewrite the manifest.
    pub fn finalize(&self) -> Result<(), ReportError> {
        let mut manifest = self.manifest.lock().expect("manifest poisoned");
        manifest.finished_at = Some(chrono::Utc::now().to_rfc3339());
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_string_pretty(&*manifest)?).map_err(io_err(&path))?;
        Ok(())
    }
}

/// Read a run's traces back into episode order of first appearance. A
/// truncated final line (crash tail) is tolerated; an episode without a
/// footer comes back flagged aborted.
pub fn read_traces(dir: &Path) -> Result<Vec<EpisodeTrace>, ReportError> {
    let path = dir.join(TRACE_FILE);
    let content = fs::read_to_string(&path).map_err(io_err(&path))?;
    parse_trace_content(&content)
}

fn parse_trace_content(content: &str) -> Result<Vec<EpisodeTrace>, ReportError> {
    let lines: Vec<&str> = content.lines().collect();
    let mut order: Vec<String> = Vec::new();
    let mut open: BTreeMap<String, EpisodeTrace> = BTreeMap::new();
    let mut done: BTreeMap<String, EpisodeTrace> = BTreeMap::new();
    for (i, raw) in lines.iter().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: Result<TraceLine, _> = serde_json::from_str(raw);
        let line = match parsed {
            Ok(line) => line,
            Err(e) => {
                if i + 1 == lines.len() {
                    break; // truncated tail from a crash
                }
                return Err(ReportError::Malformed { line: i + 1, message: e.to_string() });
            }
        };
        match line {
            TraceLine::Turn(turn) => {
                let trace = open.entry(turn.episode_id.clone()).or_insert_with(|| {
                    order.push(turn.episode_id.clone());
                    EpisodeTrace {
                        episode_id: turn.episode_id.clone(),
                        subset: String::new(),
                        strategy: turn.strategy.clone(),
                        turns: Vec::new(),
                        terminated_by: None,
                        abort_error: None,
                    }
                });
                trace.turns.push(turn.record);
            }
            TraceLine::Footer(footer) => {
                let mut trace = open.remove(&footer.episode_id).unwrap_or_else(|| {
                    order.push(footer.episode_id.clone());
                    EpisodeTrace {
                        episode_id: footer.episode_id.clone(),
                        subset: String::new(),
                        strategy: footer.strategy.clone(),
                        turns: Vec::new(),
                        terminated_by: None,
                        abort_error: None,
                    }
                });
                trace.subset = footer.subset;
                trace.terminated_by = footer.terminated_by;
                trace.abort_error = footer.aborted;
                done.insert(trace.episode_id.clone(), trace);
            }
        }
    }
    for (id, mut trace) in open {
        trace.abort_error = Some("trace truncated before episode footer".to_string());
        done.insert(id, trace);
    }
    Ok(order.into_iter().filter_map(|id| done.remove(&id)).collect())
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, ReportError> {
    let path = dir.join(MANIFEST_FILE);
    let content = fs::read_to_string(&path).map_err(io_err(&path))?;
    Ok(serde_json::from_str(&content)?)
}

/// Inference-cost summary over a run's traces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub tokens_per_episode: f64,
    pub seconds_per_episode: f64,
    /// Share of turn usages whose token counts were estimated rather than
    /// reported by the backend.
    pub estimated_fraction: f64,
    pub episodes: usize,
}

pub fn cost_summary(traces: &[EpisodeTrace]) -> Result<CostSummary, ReportError> {
    if traces.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut total_tokens = 0u64;
    let mut total_seconds = 0.0;
    let mut turns = 0usize;
    let mut estimated = 0usize;
    for trace in traces {
        for turn in &trace.turns {
            total_tokens += turn.usage.total();
            total_seconds += turn.latency_s;
            turns += 1;
            if turn.usage.estimated {
                estimated += 1;
            }
        }
    }
    let n = traces.len() as f64;
    Ok(CostSummary {
        tokens_per_episode: total_tokens as f64 / n,
        seconds_per_episode: total_seconds / n,
        estimated_fraction: if turns == 0 { 0.0 } else { estimated as f64 / turns as f64 },
        episodes: traces.len(),
    })
}

/// The full scoring document: matching scores, action breakdown, and cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub scores: SubsetReport,
    pub breakdown: ActionBreakdown,
    pub cost: CostSummary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    StructuredDoc,
    DelimitedTable,
    PlainText,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "json" => Some(ReportFormat::StructuredDoc),
            "csv" => Some(ReportFormat::DelimitedTable),
            "plain" => Some(ReportFormat::PlainText),
            _ => None,
        }
    }
}

/// Render a report deterministically: subsets alphabetical, action types
/// in the fixed breakdown order. Equal inputs render byte-identically.
pub fn render_report(doc: &ReportDoc, format: ReportFormat) -> String {
    match format {
        ReportFormat::StructuredDoc => {
            let mut s = serde_json::to_string_pretty(doc).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::DelimitedTable => {
            let mut out = String::new();
            out.push_str("section,name,value\n");
            for (name, s) in &doc.scores.subsets {
                out.push_str(&format!("subset_mean,{name},{:.2}\n", s.mean));
            }
            out.push_str(&format!("overall,overall,{:.2}\n", doc.scores.overall));
            for row in &doc.breakdown.rows {
                out.push_str(&format!(
                    "predicted_ratio,{},{:.2}\naccuracy_ratio,{},{:.2}\n",
                    row.action_type, row.predicted_ratio, row.action_type, row.accuracy_ratio
                ));
            }
            out.push_str(&format!("cost,tokens_per_episode,{:.1}\n", doc.cost.tokens_per_episode));
            out.push_str(&format!("cost,seconds_per_episode,{:.3}\n", doc.cost.seconds_per_episode));
            out
        }
        ReportFormat::PlainText => {
            let mut out = String::new();
            out.push_str("Matching score (%)\n");
            let mut header = String::from("  ");
            let mut values = String::from("  ");
            for (name, s) in &doc.scores.subsets {
                header.push_str(&format!("{name:>14}"));
                values.push_str(&format!("{:>14.2}", s.mean));
            }
            header.push_str(&format!("{:>14}", "Overall"));
            values.push_str(&format!("{:>14.2}", doc.scores.overall));
            out.push_str(&header);
            out.push('\n');
            out.push_str(&values);
            out.push('\n');
            out.push_str("\nAction breakdown (predicted / correct, % of evaluated turns)\n");
            for row in &doc.breakdown.rows {
                out.push_str(&format!(
                    "  {:<16}{:>7.2} / {:.2}\n",
                    row.action_type, row.predicted_ratio, row.accuracy_ratio
                ));
            }
            if doc.breakdown.unparseable_count > 0 {
                out.push_str(&format!(
                    "  {:<16}{:>7.2}\n",
                    "unparseable", doc.breakdown.unparseable_ratio
                ));
            }
            out.push_str(&format!(
                "\nCost: {:.1} tokens/episode, {:.3} s/episode over {} episodes ({}% estimated)\n",
                doc.cost.tokens_per_episode,
                doc.cost.seconds_per_episode,
                doc.cost.episodes,
                (doc.cost.estimated_fraction * 100.0).round()
            ));
            out
        }
    }
}

pub fn write_report(doc: &ReportDoc, format: ReportFormat, path: &Path) -> Result<(), ReportError> {
    fs::write(path, render_report(doc, format)).map_err(io_err(path))
}

/// Rewrite trace-file content with wall-clock fields zeroed, for
/// determinism comparisons. Lines re-serialize with sorted keys.
pub fn canonicalize_trace_content(content: &str) -> Result<String, ReportError> {
    let mut out = String::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| ReportError::Malformed { line: i + 1, message: e.to_string() })?;
        if let Some(obj) = value.as_object_mut() {
            if obj.contains_key("latency_s") {
                obj.insert("latency_s".to_string(), serde_json::json!(0.0));
            }
        }
        out.push_str(&serde_json::to_string(&value)?);
        out.push('\n');
    }
    Ok(out)
}

/// Manifest content with timestamps blanked, for determinism comparisons.
pub fn canonicalize_manifest_content(content: &str) -> Result<String, ReportError> {
    let mut value: serde_json::Value = serde_json::from_str(content)?;
    if let Some(obj) = value.as_object_mut() {
        for key in ["started_at", "finished_at"] {
            if obj.contains_key(key) {
                obj.insert(key.to_string(), serde_json::json!(""));
            }
        }
    }
    Ok(serde_json::to_string(&value)?)
}
