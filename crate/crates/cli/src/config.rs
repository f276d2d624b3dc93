//! Run configuration resolution: defaults, then the TOML config file, then
//! command-line flags, strongest last.

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use dpot_core::agent::{GroundingMode, MaxTurns};
use dpot_core::prompt::{HistoryLen, StrategyKind};
use dpot_core::retrieval::ReferencePool;

use crate::args::{BackendArg, GroundingArg, PoolArg, RunArgs, StrategyArg};

/// TOML mirror of the run flags; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset: Option<PathBuf>,
    pub subset: Option<Vec<String>>,
    pub strategy: Option<String>,
    pub history_len: Option<String>,
    pub max_turns: Option<usize>,
    pub backend: Option<String>,
    pub scripts: Option<PathBuf>,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub max_tokens: Option<u32>,
    pub temperature: Option<f64>,
    pub reference_k: Option<usize>,
    pub reference_pool: Option<String>,
    pub reference_traces: Option<PathBuf>,
    pub grounding: Option<String>,
    pub plan_file: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub parallel: Option<usize>,
    pub store_prompts: Option<bool>,
    pub seed: Option<u64>,
    pub prompt_budget: Option<u64>,
    pub rate_limit: Option<u32>,
    pub multimodal: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendChoice {
    Http,
    Scripted,
}

/// Fully resolved run settings.
pub struct RunSettings {
    pub dataset: PathBuf,
    pub subset_filter: Option<BTreeSet<String>>,
    pub strategy: StrategyKind,
    pub max_turns: MaxTurns,
    pub backend: BackendChoice,
    pub scripts: Option<PathBuf>,
    pub base_url: Option<String>,
    pub model: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub reference_k: usize,
    pub reference_pool: ReferencePool,
    pub reference_traces: Option<PathBuf>,
    pub grounding: GroundingMode,
    pub plan_file: Option<PathBuf>,
    pub out: PathBuf,
    pub parallel: usize,
    pub store_prompts: bool,
    pub seed: Option<u64>,
    pub prompt_budget: Option<u64>,
    pub rate_limit: Option<u32>,
    pub multimodal: bool,
}

fn parse_strategy_name(s: &str) -> Result<StrategyArg> {
    Ok(match s {
        "np" => StrategyArg::Np,
        "sp" => StrategyArg::Sp,
        "dp" => StrategyArg::Dp,
        "dpot" => StrategyArg::Dpot,
        "dpot-ref" => StrategyArg::DpotRef,
        "react" => StrategyArg::React,
        other => bail!("unknown strategy `{other}` (expected np, sp, dp, dpot, dpot-ref, react)"),
    })
}

fn parse_history_len(s: &str) -> Result<HistoryLen> {
    if s.eq_ignore_ascii_case("unbounded") || s == "inf" {
        return Ok(HistoryLen::Unbounded);
    }
    let n: usize = s
        .parse()
        .with_context(|| format!("history length must be an integer or `unbounded`, got `{s}`"))?;
    Ok(HistoryLen::Bounded(n))
}

pub fn resolve_run_settings(args: &RunArgs) -> Result<RunSettings> {
    let file: ConfigFile = match &args.config {
        Some(path) => {
            let raw = fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            toml::from_str(&raw).with_context(|| format!("bad config file {}", path.display()))?
        }
        None => ConfigFile::default(),
    };

    let strategy_arg = match args.strategy {
        Some(s) => s,
        None => match &file.strategy {
            Some(s) => parse_strategy_name(s)?,
            None => StrategyArg::Dpot,
        },
    };
    let history_raw = args.history_len.clone().or(file.history_len.clone());
    if history_raw.is_some() && strategy_arg != StrategyArg::React {
        bail!("--history-len only applies to the react strategy");
    }
    let strategy = match strategy_arg {
        StrategyArg::Np => StrategyKind::Np,
        StrategyArg::Sp => StrategyKind::Sp,
        StrategyArg::Dp => StrategyKind::Dp,
        StrategyArg::Dpot => StrategyKind::DPoT,
        StrategyArg::DpotRef => StrategyKind::DPoTWithReference,
        StrategyArg::React => StrategyKind::React {
            history_len: match history_raw {
                Some(raw) => parse_history_len(&raw)?,
                None => HistoryLen::Bounded(4),
            },
        },
    };

    if strategy != StrategyKind::DPoTWithReference {
        if args.reference_k.is_some() || file.reference_k.is_some() {
            bail!("--reference-k only applies to the dpot-ref strategy");
        }
        if args.reference_pool.is_some() || args.reference_traces.is_some() {
            bail!("reference options only apply to the dpot-ref strategy");
        }
    }
    if args.plan_file.is_some() || file.plan_file.is_some() {
        if matches!(strategy, StrategyKind::Np | StrategyKind::React { .. }) {
            bail!("--plan-file only applies to planning strategies (sp, dp, dpot, dpot-ref)");
        }
    }

    let backend = match args.backend {
        Some(BackendArg::Http) => BackendChoice::Http,
        Some(BackendArg::Scripted) => BackendChoice::Scripted,
        None => match file.backend.as_deref() {
            Some("http") => BackendChoice::Http,
            Some("scripted") | None => BackendChoice::Scripted,
            Some(other) => bail!("unknown backend `{other}` (expected http or scripted)"),
        },
    };

    let scripts = args.scripts.clone().or(file.scripts.clone());
    let base_url = args.base_url.clone().or(file.base_url.clone());
    match backend {
        BackendChoice::Scripted => {
            if scripts.is_none() {
                bail!("the scripted backend needs --scripts");
            }
            if base_url.is_some() {
                bail!("--base-url only applies to the http backend");
            }
        }
        BackendChoice::Http => {
            if base_url.is_none() {
                bail!("the http backend needs --base-url");
            }
            if scripts.is_some() {
                bail!("--scripts only applies to the scripted backend");
            }
        }
    }

    let grounding = match args.grounding {
        Some(GroundingArg::Model) => GroundingMode::ModelCall,
        Some(GroundingArg::Grammar) => GroundingMode::DescriptionGrammar,
        None => match file.grounding.as_deref() {
            Some("grammar") => GroundingMode::DescriptionGrammar,
            Some("model") | None => GroundingMode::ModelCall,
            Some(other) => bail!("unknown grounding mode `{other}` (expected model or grammar)"),
        },
    };

    let reference_pool = match args.reference_pool {
        Some(PoolArg::Subset) => ReferencePool::SameSubset,
        Some(PoolArg::All) => ReferencePool::All,
        None => match file.reference_pool.as_deref() {
            Some("all") => ReferencePool::All,
            Some("subset") | None => ReferencePool::SameSubset,
            Some(other) => bail!("unknown reference pool `{other}` (expected subset or all)"),
        },
    };

    let subsets: Vec<String> = if args.subset.is_empty() {
        file.subset.clone().unwrap_or_default()
    } else {
        args.subset.clone()
    };

    let dataset = args
        .dataset
        .clone()
        .or(file.dataset.clone())
        .context("--dataset is required")?;
    let out = args.out.clone().or(file.out.clone()).context("--out is required")?;

    let parallel = args.parallel.or(file.parallel).unwrap_or(1);
    if parallel == 0 {
        bail!("--parallel must be at least 1");
    }

    Ok(RunSettings {
        dataset,
        subset_filter: if subsets.is_empty() {
            None
        } else {
            Some(subsets.into_iter().collect())
        },
        strategy,
        max_turns: match args.max_turns.or(file.max_turns) {
            Some(n) if n == 0 => bail!("--max-turns must be at least 1"),
            Some(n) => MaxTurns::Fixed(n),
            None => MaxTurns::EpisodeLength,
        },
        backend,
        scripts,
        base_url,
        model: args
            .model
            .clone()
            .or(file.model.clone())
            .unwrap_or_else(|| "gpt-4-vision-preview".to_string()),
        max_tokens: args.max_tokens.or(file.max_tokens).unwrap_or(300),
        temperature: args.temperature.or(file.temperature).unwrap_or(0.0),
        reference_k: args.reference_k.or(file.reference_k).unwrap_or(2),
        reference_pool,
        reference_traces: args.reference_traces.clone().or(file.reference_traces.clone()),
        grounding,
        plan_file: args.plan_file.clone().or(file.plan_file.clone()),
        out,
        parallel,
        store_prompts: args.store_prompts || file.store_prompts.unwrap_or(false),
        seed: args.seed.or(file.seed),
        prompt_budget: args.prompt_budget.or(file.prompt_budget),
        rate_limit: args.rate_limit.or(file.rate_limit),
        multimodal: args.multimodal || file.multimodal.unwrap_or(false),
    })
}
