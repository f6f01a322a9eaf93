//! One module per subcommand.

pub mod classifier;
pub mod evaluate;
pub mod generate;
pub mod preprocess;
pub mod render;
pub mod train;

use std::path::Path;

use anyhow::{Context, Result};
use dance_core::synth::{write_toy_corpus, SynthOptions};
use dance_core::Checkpoint64;
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Serialize)]
struct CheckpointInfo<'a> {
    parameters: usize,
    model: &'a dance_core::model::TsmtConfig,
    train: Option<&'a dance_core::model::TrainConfig>,
    epochs: usize,
    log: &'a [dance_core::model::EpochLog],
}

/// Prints a checkpoint's header, as text or JSON.
pub fn inspect(path: &Path, json: bool) -> Result<()> {
    let ck = Checkpoint64::load(path).with_context(|| format!("loading {}", path.display()))?;
    if json {
        let info = CheckpointInfo {
            parameters: ck.model.parameter_count(),
            model: ck.model.config(),
            train: ck.train.as_ref().map(|(c, _)| c),
            epochs: ck.train.as_ref().map_or(0, |(_, s)| s.epoch),
            log: ck.train.as_ref().map_or(&[], |(_, s)| &s.log),
        };
        println!("{}", serde_json::to_string_pretty(&info)?);
    } else {
        print!("{}", ck.describe());
    }
    Ok(())
}

/// Writes the synthetic toy corpus.
pub fn synth(cfg: &RunConfig, out: &Path, opts: &SynthOptions) -> Result<()> {
    let sources = write_toy_corpus(out, opts, cfg.seed)?;
    println!("{} toy sources written to {}", sources.len(), out.display());
    Ok(())
}
