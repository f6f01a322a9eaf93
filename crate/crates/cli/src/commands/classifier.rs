use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{bail, Context, Result};
use dance_core::fsutil::write_atomic;
use dance_core::metrics::train_style_classifier;
use dance_core::motion::{PoseSequence, Split};
use dance_core::SeededRng;

use crate::config::RunConfig;
use crate::manifest::Corpus;
use crate::Warnings;

pub const LOG_NAME: &str = "classifier_log.csv";

fn labelled(
    corpus: &Corpus,
    split: Split,
    fps: f64,
    labels: &std::collections::BTreeMap<String, String>,
    names: &[String],
) -> Result<Vec<(PoseSequence, usize)>> {
    let mut out = Vec::new();
    for seg in corpus.load(split, fps)? {
        let Some(label) = labels.get(&seg.entry.source) else {
            bail!("labels.json has no style for source {}", seg.entry.source);
        };
        let y = names
            .iter()
            .position(|n| n == label)
            .expect("label list covers every label");
        out.push((seg.pose, y));
    }
    Ok(out)
}

/// Trains the style classifier used for the feature-based metrics.
pub fn run(cfg: &RunConfig, processed: &Path, out: &Path, warn: &mut Warnings) -> Result<()> {
    let corpus = Corpus::open(processed)?;
    let Some(labels) = corpus.labels()? else {
        bail!(
            "{} has no labels.json with style labels",
            processed.display()
        );
    };
    let names: Vec<String> = labels
        .values()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut config = cfg.classifier.clone();
    if names.len() != config.classes {
        warn.push(format!(
            "labels.json lists {} styles but classifier.classes is {}; using {}",
            names.len(),
            config.classes,
            names.len()
        ));
        config.classes = names.len();
    }
    let train = labelled(&corpus, Split::Train, cfg.preprocess.fps, &labels, &names)?;
    let validation = labelled(
        &corpus,
        Split::Validation,
        cfg.preprocess.fps,
        &labels,
        &names,
    )?;
    let seed = SeededRng::new(cfg.seed).split(2).seed();
    let (model, history) = train_style_classifier(&train, names, config, seed)?;

    let dir = match out.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    model.save(out)?;
    let mut log = String::from("epoch,loss\n");
    for (e, l) in history.losses.iter().enumerate() {
        log += &format!("{e},{l}\n");
    }
    write_atomic(&dir.join(LOG_NAME), log.as_bytes())?;
    cfg.echo(dir)?;
    println!(
        "training accuracy {:.4} on {} segments",
        history.accuracy,
        train.len()
    );
    if !validation.is_empty() {
        println!(
            "validation accuracy {:.4} on {} segments",
            model.accuracy(&validation)?,
            validation.len()
        );
    }
    println!("classifier written to {}", out.display());
    Ok(())
}
