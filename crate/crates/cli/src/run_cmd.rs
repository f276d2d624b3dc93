//! The `run` subcommand: load the dataset, build the gateway and optional
//! retriever, run episodes (optionally in parallel), and stream traces to
//! the run directory.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use tracing::info;

use dpot_core::agent::{run_episode, ExternalPlans, PlanSource, RunConfig};
use dpot_core::gateway::{Gateway, HttpAuth, HttpConfig, RateLimiter};
use dpot_core::model::{load_dataset, Dataset};
use dpot_core::parser::describe_action;
use dpot_core::prompt::StrategyKind;
use dpot_core::report::{read_traces, RunManifest, TraceWriter};
use dpot_core::retrieval::{ReferenceActionSource, ReferenceRetriever, TrigramEmbedder};
use dpot_core::DecodingConfig;

use crate::config::{BackendChoice, RunSettings};

pub const API_KEY_ENV: &str = "DPOT_API_KEY";

#[derive(Deserialize)]
struct ScriptRecord {
    episode_id: String,
    responses: Vec<String>,
}

fn load_scripts(path: &Path) -> Result<HashMap<String, Vec<String>>> {
    let content =
        fs::read_to_string(path).with_context(|| format!("cannot read scripts file {}", path.display()))?;
    let mut scripts = HashMap::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: ScriptRecord = serde_json::from_str(line)
            .with_context(|| format!("bad script record at {}:{}", path.display(), i + 1))?;
        scripts.insert(record.episode_id, record.responses);
    }
    Ok(scripts)
}

/// Predicted action descriptions from a prior run, for reference blocks.
fn predicted_descriptions(traces_dir: &Path, dataset: &Dataset) -> Result<HashMap<String, Vec<String>>> {
    let traces = read_traces(traces_dir)?;
    let mut map = HashMap::new();
    for trace in traces {
        let Some(episode) = dataset.episode(&trace.episode_id) else {
            continue;
        };
        let lines: Vec<String> = trace
            .turns
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let desc = match t.action.action() {
                    Some(a) => describe_action(a, episode.steps.get(i).map(|s| &s.screen)),
                    None => "unknown".to_string(),
                };
                format!(
                    "{{\"step_idx\": {i}, \"action_description\": {}}}",
                    serde_json::to_string(&desc).expect("string")
                )
            })
            .collect();
        map.insert(trace.episode_id, lines);
    }
    Ok(map)
}

fn build_gateway(settings: &RunSettings) -> Result<Gateway> {
    match settings.backend {
        BackendChoice::Scripted => Ok(Gateway::scripted(vec![])),
        BackendChoice::Http => {
            let auth = match std::env::var(API_KEY_ENV) {
                Ok(key) if !key.is_empty() => HttpAuth::Bearer(key),
                _ => {
                    tracing::warn!("{API_KEY_ENV} not set; sending unauthenticated requests");
                    HttpAuth::None
                }
            };
            let mut gateway = Gateway::http(HttpConfig {
                base_url: settings.base_url.clone().expect("validated"),
                auth,
                multimodal: settings.multimodal,
            });
            if let Some(rpm) = settings.rate_limit {
                gateway = gateway.with_rate_limiter(Arc::new(RateLimiter::per_minute(rpm)));
            }
            Ok(gateway)
        }
    }
}

fn manifest_config(settings: &RunSettings) -> serde_json::Value {
    serde_json::json!({
        "strategy": settings.strategy.name(),
        "max_turns": match settings.max_turns {
            dpot_core::agent::MaxTurns::EpisodeLength => serde_json::Value::Null,
            dpot_core::agent::MaxTurns::Fixed(n) => serde_json::json!(n),
        },
        "grounding": settings.grounding.name(),
        "model": settings.model,
        "max_tokens": settings.max_tokens,
        "temperature": settings.temperature,
        "reference_k": settings.reference_k,
        "plan_file": settings.plan_file.as_ref().map(|p| p.display().to_string()),
        "parallel": settings.parallel,
        "store_prompts": settings.store_prompts,
        "seed": settings.seed,
        "prompt_budget": settings.prompt_budget,
        "rate_limit": settings.rate_limit,
        "multimodal": settings.multimodal,
    })
}

pub async fn run(settings: RunSettings) -> Result<()> {
    let dataset = Arc::new(load_dataset(&settings.dataset, settings.subset_filter.as_ref())?);
    if dataset.episodes.is_empty() {
        bail!("dataset has no episodes after filtering");
    }

    let scripts = match (&settings.backend, &settings.scripts) {
        (BackendChoice::Scripted, Some(path)) => {
            let scripts = load_scripts(path)?;
            for e in &dataset.episodes {
                if !scripts.contains_key(&e.id) {
                    bail!("scripts file has no entry for episode `{}`", e.id);
                }
            }
            Some(scripts)
        }
        _ => None,
    };

    let retriever = if settings.strategy == StrategyKind::DPoTWithReference {
        let source = match &settings.reference_traces {
            Some(dir) => ReferenceActionSource::Predicted(predicted_descriptions(dir, &dataset)?),
            None => ReferenceActionSource::Gold,
        };
        Some(Arc::new(ReferenceRetriever::new(
            &dataset,
            settings.reference_k,
            settings.reference_pool,
            source,
            Arc::new(TrigramEmbedder::default()),
        )))
    } else {
        None
    };

    let plan_source = match &settings.plan_file {
        Some(path) => PlanSource::External(ExternalPlans::load(path)?),
        None => PlanSource::Model,
    };

    let run_config = Arc::new(RunConfig {
        strategy: settings.strategy,
        max_turns: settings.max_turns,
        decoding: DecodingConfig {
            model_name: settings.model.clone(),
            max_tokens: settings.max_tokens,
            temperature: settings.temperature,
        },
        plan_source,
        grounding: settings.grounding,
        store_prompts: settings.store_prompts,
        prompt_budget: settings.prompt_budget,
    });
    run_config.validate()?;

    let base_gateway = build_gateway(&settings)?;
    let run_id = settings
        .out
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_else(|| "run".to_string());
    let writer = Arc::new(TraceWriter::init(
        &settings.out,
        RunManifest::new(
            run_id,
            settings.strategy.name().to_string(),
            base_gateway.backend_id(),
            &dataset.manifest,
            manifest_config(&settings),
        ),
    )?);

    let mut completed = 0usize;
    let mut aborted = 0usize;
    if settings.parallel <= 1 {
        for episode in &dataset.episodes {
            let gateway = base_gateway.for_episode(scripts.as_ref().map(|s| s[&episode.id].clone()));
            let trace = run_episode(episode, &run_config, &gateway, retriever.as_deref()).await?;
            if trace.abort_error.is_some() {
                aborted += 1;
            } else {
                completed += 1;
            }
            info!(
                episode = %episode.id,
                turns = trace.turns.len(),
                terminated = ?trace.terminated_by,
                "episode finished"
            );
            writer.append_episode(&trace)?;
        }
    } else {
        let semaphore = Arc::new(tokio::sync::Semaphore::new(settings.parallel));
        let mut tasks = tokio::task::JoinSet::new();
        for idx in 0..dataset.episodes.len() {
            let dataset = Arc::clone(&dataset);
            let run_config = Arc::clone(&run_config);
            let writer = Arc::clone(&writer);
            let retriever = retriever.clone();
            let semaphore = Arc::clone(&semaphore);
            let gateway =
                base_gateway.for_episode(scripts.as_ref().map(|s| s[&dataset.episodes[idx].id].clone()));
            tasks.spawn(async move {
                let _permit = semaphore.acquire().await.expect("semaphore open");
                let episode = &dataset.episodes[idx];
                let trace = run_episode(episode, &run_config, &gateway, retriever.as_deref()).await?;
                let aborted = trace.abort_error.is_some();
                writer.append_episode(&trace)?;
                anyhow::Ok(aborted)
            });
        }
        while let Some(result) = tasks.join_next().await {
            if result.context("episode task panicked")?? {
                aborted += 1;
            } else {
                completed += 1;
            }
        }
    }

    writer.finalize()?;
    println!(
        "ran {} episodes ({} aborted) with strategy {} -> {}",
        completed + aborted,
        aborted,
        settings.strategy.name(),
        settings.out.display()
    );
    if aborted > 0 {
        bail!("{aborted} episodes aborted");
    }
    Ok(())
}
