//! The `score` and `report` subcommands. Scoring is pure: it needs only
//! the trace directory and the dataset, never a gateway.

use std::collections::BTreeMap;
use std::fs;

use anyhow::{bail, Context, Result};

use dpot_core::eval::{action_breakdown, aggregate, score_episode, EvalConfig};
use dpot_core::model::{load_dataset, Episode};
use dpot_core::report::{cost_summary, read_traces, render_report, ReportDoc, ReportFormat};

use crate::args::{ReportArgs, ScoreArgs};

pub fn score(args: &ScoreArgs) -> Result<()> {
    let dataset = load_dataset(&args.dataset, None)?;
    let traces = read_traces(&args.traces)?;
    if traces.is_empty() {
        bail!("no traces in {}", args.traces.display());
    }
    let episodes: BTreeMap<String, &Episode> =
        dataset.episodes.iter().map(|e| (e.id.clone(), e)).collect();
    let cfg = EvalConfig {
        strict_type_text: args.strict_type_text,
        ..EvalConfig::default()
    };

    let mut scores = Vec::with_capacity(traces.len());
    for trace in &traces {
        let episode = episodes
            .get(&trace.episode_id)
            .with_context(|| format!("trace references unknown episode `{}`", trace.episode_id))?;
        scores.push(score_episode(trace, episode, &cfg)?);
    }
    let doc = ReportDoc {
        scores: aggregate(&scores, args.weighted)?,
        breakdown: action_breakdown(&traces, &episodes, &cfg)?,
        cost: cost_summary(&traces)?,
    };
    let rendered = render_report(&doc, ReportFormat::StructuredDoc);
    match &args.out {
        Some(path) => fs::write(path, rendered)
            .with_context(|| format!("cannot write report to {}", path.display()))?,
        None => print!("{rendered}"),
    }
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let format = ReportFormat::parse(&args.format)
        .with_context(|| format!("unknown format `{}` (expected plain, csv, json)", args.format))?;
    let raw = fs::read_to_string(&args.report)
        .with_context(|| format!("cannot read report {}", args.report.display()))?;
    let doc: ReportDoc = serde_json::from_str(&raw)
        .with_context(|| format!("{} is not a score report", args.report.display()))?;
    let rendered = render_report(&doc, format);
    match &args.out {
        Some(path) => fs::write(path, rendered)
            .with_context(|| format!("cannot write report to {}", path.display()))?,
        None => print!("{rendered}"),
    }
    Ok(())
}
