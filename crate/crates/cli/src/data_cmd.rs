//! The `gen-synthetic` and `validate` subcommands.

use std::collections::BTreeSet;

use anyhow::{bail, Result};

use dpot_core::model::{
    generate_synthetic, load_dataset_lenient, save_dataset, validate_episode, SyntheticParams,
};

use crate::args::{GenArgs, ValidateArgs};

pub fn gen_synthetic(args: &GenArgs) -> Result<()> {
    let params = SyntheticParams {
        steps: args.min_steps..=args.max_steps,
        elements: args.min_elements..=args.max_elements,
        ..SyntheticParams::default()
    };
    let dataset = generate_synthetic(args.seed, args.n, &params)?;
    save_dataset(&dataset, &args.out)?;
    let counts: Vec<String> = dataset
        .manifest
        .counts
        .iter()
        .map(|(subset, n)| format!("{subset}: {n}"))
        .collect();
    println!(
        "wrote {} episodes to {} ({})",
        dataset.episodes.len(),
        args.out.display(),
        counts.join(", ")
    );
    Ok(())
}

pub fn validate(args: &ValidateArgs) -> Result<()> {
    let filter: Option<BTreeSet<String>> = if args.subset.is_empty() {
        None
    } else {
        Some(args.subset.iter().cloned().collect())
    };
    let dataset = load_dataset_lenient(&args.dataset, filter.as_ref())?;
    let mut bad_episodes = 0usize;
    let mut total_violations = 0usize;
    for episode in &dataset.episodes {
        let report = validate_episode(episode);
        if !report.is_empty() {
            bad_episodes += 1;
            total_violations += report.len();
            for v in &report {
                println!("{}: {v}", episode.id);
            }
        }
    }
    if bad_episodes > 0 {
        bail!(
            "{bad_episodes} of {} episodes have {total_violations} violations",
            dataset.episodes.len()
        );
    }
    println!("{} episodes valid", dataset.episodes.len());
    Ok(())
}
