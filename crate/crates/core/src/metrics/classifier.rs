//! Style classifier whose pooled hidden state serves as the motion feature
//! extractor for FID and the diversity scores.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::model::layers::{init_weight, stream_forward, BlockParams};
use crate::model::{positional_encoding, StreamConfig};
use crate::motion::{PoseSequence, POSE_DIMS};
use crate::numerics::{AdamConfig, AdamState, Array, Graph, ParamId, ParamStore, Var};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub stream: StreamConfig,
    pub ff_mult: usize,
    pub ln_eps: f64,
    pub classes: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            stream: StreamConfig {
                model_dim: 64,
                head_dim: 32,
                heads: 2,
                blocks: 2,
            },
            ff_mult: 4,
            ln_eps: 1e-5,
            classes: 5,
            epochs: 100,
            batch_size: 16,
            lr: 1e-3,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.stream;
        if s.model_dim == 0 || !s.model_dim.is_multiple_of(2) || s.head_dim == 0 || s.heads == 0 {
            return Err(Error::invalid(
                "classifier model_dim must be even and all dims positive",
            ));
        }
        if self.classes < 2 {
            return Err(Error::invalid("classifier needs at least two classes"));
        }
        if self.batch_size == 0 || !(self.lr > 0.0) {
            return Err(Error::invalid(
                "classifier batch_size and lr must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Ids {
    in_w: ParamId,
    in_b: ParamId,
    blocks: Vec<BlockParams>,
    head_w: ParamId,
    head_b: ParamId,
}

/// Non-causal transformer over continuous, root-relative poses with a
/// mean-pooled classification head.
#[derive(Debug, Clone)]
pub struct StyleClassifier {
    config: ClassifierConfig,
    labels: Vec<String>,
    input_mean: Vec<f64>,
    input_std: Vec<f64>,
    params: ParamStore<f64>,
    ids: Ids,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SavedArray {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Saved {
    format: String,
    config: ClassifierConfig,
    labels: Vec<String>,
    input_mean: Vec<f64>,
    input_std: Vec<f64>,
    params: Vec<SavedArray>,
}

const FORMAT: &str = "style-classifier/1";

/// Training history of [`train_style_classifier`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierTraining {
    pub losses: Vec<f64>,
    pub accuracy: f64,
}

impl StyleClassifier {
    pub fn new(config: ClassifierConfig, labels: Vec<String>, seed: u64) -> Result<Self> {
        config.validate()?;
        if labels.len() != config.classes {
            return Err(Error::invalid(format!(
                "{} labels for {} classes",
                labels.len(),
                config.classes
            )));
        }
        let mut rng = SeededRng::new(seed);
        let mut params = ParamStore::new();
        let d = config.stream.model_dim;
        let in_w = params.add("in_w", init_weight(&mut rng, POSE_DIMS, d));
        let in_b = params.add("in_b", Array::zeros(&[d]));
        let blocks = (0..config.stream.blocks)
            .map(|i| {
                BlockParams::init(
                    &mut params,
                    &format!("block{i}"),
                    &config.stream,
                    config.ff_mult,
                    &mut rng,
                )
            })
            .collect();
        let head_w = params.add("head_w", init_weight(&mut rng, d, config.classes));
        let head_b = params.add("head_b", Array::zeros(&[config.classes]));
        Ok(Self {
            config,
            labels,
            input_mean: vec![0.0; POSE_DIMS],
            input_std: vec![1.0; POSE_DIMS],
            params,
            ids: Ids {
                in_w,
                in_b,
                blocks,
                head_w,
                head_b,
            },
        })
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn feature_dim(&self) -> usize {
        self.config.stream.model_dim
    }

    fn fit_normalization(&mut self, seqs: &[&PoseSequence]) {
        let mut sum = vec![0.0; POSE_DIMS];
        let mut sq = vec![0.0; POSE_DIMS];
        let mut n = 0usize;
        for s in seqs {
            let rel = s.root_relative();
            for frame in rel.data().chunks(POSE_DIMS) {
                for (d, v) in frame.iter().enumerate() {
                    sum[d] += v;
                    sq[d] += v * v;
                }
                n += 1;
            }
        }
        let n = n.max(1) as f64;
        for d in 0..POSE_DIMS {
            let m = sum[d] / n;
            let var = (sq[d] / n - m * m).max(0.0);
            self.input_mean[d] = m;
            self.input_std[d] = if var.sqrt() < 1e-8 { 1.0 } else { var.sqrt() };
        }
    }

    fn input(&self, seq: &PoseSequence) -> Result<Array<f64>> {
        if seq.is_empty() {
            return Err(Error::invalid("cannot classify an empty sequence"));
        }
        let rel = seq.root_relative();
        let data = rel
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let d = i % POSE_DIMS;
                (v - self.input_mean[d]) / self.input_std[d]
            })
            .collect();
        Array::new(&[seq.len(), POSE_DIMS], data)
    }

    /// Pooled feature `[1, D]` and logits `[1, classes]`.
    fn forward(&self, g: &mut Graph<f64>, seq: &PoseSequence) -> Result<(Var, Var)> {
        let x = g.constant(self.input(seq)?);
        let w = g.param(&self.params, self.ids.in_w);
        let b = g.param(&self.params, self.ids.in_b);
        let h = g.matmul(x, w)?;
        let h = g.add_row(h, b)?;
        let pe = g.constant(positional_encoding(
            seq.len(),
            self.config.stream.model_dim,
        )?);
        let h = g.add(h, pe)?;
        let h = stream_forward(
            g,
            &self.params,
            &self.ids.blocks,
            &self.config.stream,
            h,
            false,
            self.config.ln_eps,
            None,
        )?;
        let feat = g.mean_rows(h)?;
        let hw = g.param(&self.params, self.ids.head_w);
        let hb = g.param(&self.params, self.ids.head_b);
        let logits = g.matmul(feat, hw)?;
        let logits = g.add_row(logits, hb)?;
        Ok((feat, logits))
    }

    /// Mean-pooled final-block output, `feature_dim` values.
    pub fn features(&self, seq: &PoseSequence) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let (f, _) = self.forward(&mut g, seq)?;
        Ok(g.value(f).data().to_vec())
    }

    pub fn features_batch(&self, seqs: &[PoseSequence]) -> Result<Vec<Vec<f64>>> {
        seqs.par_iter().map(|s| self.features(s)).collect()
    }

    pub fn logits(&self, seq: &PoseSequence) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let (_, l) = self.forward(&mut g, seq)?;
        Ok(g.value(l).data().to_vec())
    }

    pub fn predict(&self, seq: &PoseSequence) -> Result<usize> {
        Ok(crate::model::argmax(&self.logits(seq)?))
    }

    /// Fraction of correctly classified examples.
    pub fn accuracy(&self, data: &[(PoseSequence, usize)]) -> Result<f64> {
        let hits = data
            .par_iter()
            .map(|(s, y)| self.predict(s).map(|p| (p == *y) as usize))
            .collect::<Result<Vec<_>>>()?;
        Ok(hits.iter().sum::<usize>() as f64 / data.len().max(1) as f64)
    }

    /// `confusion[true][predicted]` counts.
    pub fn confusion(&self, data: &[(PoseSequence, usize)]) -> Result<Vec<Vec<usize>>> {
        let k = self.config.classes;
        let mut m = vec![vec![0; k]; k];
        for (s, y) in data {
            m[*y][self.predict(s)?] += 1;
        }
        Ok(m)
    }

    fn loss_and_grads(&self, batch: &[&(PoseSequence, usize)]) -> Result<(f64, Vec<Array<f64>>)> {
        let n = batch.len() as f64;
        let parts = batch
            .par_iter()
            .map(|(s, y)| {
                let mut g = Graph::new();
                let (_, logits) = self.forward(&mut g, s)?;
                let l = g.cross_entropy(logits, &[*y])?;
                let value = g.value(l).item();
                let scaled = g.scale(l, 1.0 / n);
                Ok((value, g.backward(scaled)?.param_grads(&self.params)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = 0.0;
        let mut acc: Option<Vec<Array<f64>>> = None;
        for (v, gr) in parts {
            total += v;
            match &mut acc {
                None => acc = Some(gr),
                Some(a) => {
                    for (x, y) in a.iter_mut().zip(&gr) {
                        x.add_assign(y)?;
                    }
                }
            }
        }
        Ok((total / n, acc.expect("non-empty batch")))
    }

    pub fn to_json(&self) -> Result<String> {
        let saved = Saved {
            format: FORMAT.into(),
            config: self.config.clone(),
            labels: self.labels.clone(),
            input_mean: self.input_mean.clone(),
            input_std: self.input_std.clone(),
            params: self
                .params
                .iter()
                .map(|(name, a)| SavedArray {
                    name: name.to_string(),
                    shape: a.shape().to_vec(),
                    data: a.data().to_vec(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&saved)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let saved: Saved = serde_json::from_str(text)?;
        if saved.format != FORMAT {
            return Err(Error::Checkpoint(format!(
                "unknown classifier format {:?}",
                saved.format
            )));
        }
        if saved.input_mean.len() != POSE_DIMS || saved.input_std.len() != POSE_DIMS {
            return Err(Error::Checkpoint(
                "classifier normalization has the wrong width".into(),
            ));
        }
        let mut c = Self::new(saved.config, saved.labels, 0)?;
        if saved.params.len() != c.params.len() {
            return Err(Error::Checkpoint(format!(
                "classifier has {} arrays, expected {}",
                saved.params.len(),
                c.params.len()
            )));
        }
        for p in saved.params {
            c.params.set(&p.name, Array::new(&p.shape, p.data)?)?;
        }
        c.input_mean = saved.input_mean;
        c.input_std = saved.input_std;
        if !c.params.all_finite() {
            return Err(Error::Checkpoint(
                "classifier contains non-finite weights".into(),
            ));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Trains a classifier with cross-entropy and Adam on `(sequence, label)`
/// pairs. Requires at least two distinct labels.
pub fn train_style_classifier(
    data: &[(PoseSequence, usize)],
    labels: Vec<String>,
    config: ClassifierConfig,
    seed: u64,
) -> Result<(StyleClassifier, ClassifierTraining)> {
    let present: BTreeSet<usize> = data.iter().map(|(_, y)| *y).collect();
    if present.len() < 2 {
        return Err(Error::invalid(format!(
            "style classifier needs at least two classes in the training data, found {}",
            present.len()
        )));
    }
    if let Some(&bad) = present.iter().find(|&&y| y >= config.classes) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {} classes",
            config.classes
        )));
    }
    let base = SeededRng::new(seed);
    let mut model = StyleClassifier::new(config.clone(), labels, base.split(0).seed())?;
    let seqs: Vec<&PoseSequence> = data.iter().map(|(s, _)| s).collect();
    model.fit_normalization(&seqs);
    let mut adam = AdamState::new(
        &model.params,
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
    );
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        base.split(1 + epoch as u64).shuffle(&mut order);
        let mut sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&(PoseSequence, usize)> = chunk.iter().map(|&i| &data[i]).collect();
            let (loss, grads) = model.loss_and_grads(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            adam.step(&mut model.params, &grads)?;
            sum += loss * batch.len() as f64;
        }
        losses.push(sum / data.len() as f64);
    }
    let accuracy = model.accuracy(data)?;
    Ok((model, ClassifierTraining { losses, accuracy }))
}
