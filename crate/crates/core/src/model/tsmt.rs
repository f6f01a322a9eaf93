use rayon::prelude::*;

use super::config::TsmtConfig;
use super::layers::{init_weight, stream_forward, BlockParams, Dropout};
use super::pe::positional_encoding;
use crate::error::{Error, Result};
use crate::numerics::{Array, Graph, ParamId, ParamStore, Var};
use crate::rng::SeededRng;
use crate::Scalar;

/// One teacher-forced sequence: `T × pose_dims` tokens, `T × audio_dims`
/// (standardized) audio features and `T` beat flags.
#[derive(Debug, Clone, Copy)]
pub struct SequenceInput<'a> {
    pub tokens: &'a [usize],
    pub audio: &'a [f64],
    pub beat: &'a [bool],
}

impl SequenceInput<'_> {
    pub fn len(&self) -> usize {
        self.beat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beat.is_empty()
    }
}

/// Parameter ids of the audio stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioParams {
    pub beat_embed: ParamId,
    pub conv_w: ParamId,
    pub conv_b: ParamId,
    pub blocks: Vec<BlockParams>,
    pub fuse_w: ParamId,
}

/// Parameter ids of the whole model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelParams {
    pub embed: ParamId,
    pub pose_in_w: ParamId,
    pub pose_in_b: ParamId,
    pub start: ParamId,
    pub pose_blocks: Vec<BlockParams>,
    pub audio: Option<AudioParams>,
    pub fuse_wx: ParamId,
    pub fuse_b: ParamId,
}

/// The two-stream motion transformer.
///
/// A pose stream embeds the per-coordinate tokens and runs causal
/// self-attention; an audio stream does the same over MFCC and beat features.
/// The prediction for frame `t` combines the pose state of frame `t - 1` (a
/// learned start vector for `t = 0`) with the audio state of frame `t`, and
/// factorizes into one categorical distribution per coordinate.
#[derive(Debug, Clone)]
pub struct Tsmt<S> {
    config: TsmtConfig,
    params: ParamStore<S>,
    ids: ModelParams,
}

impl<S: Scalar> Tsmt<S> {
    /// Fresh model. The fusion head starts at zero, so the untrained model
    /// predicts uniform distributions.
    pub fn new(config: TsmtConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SeededRng::new(seed);
        let mut store = ParamStore::new();
        let c = &config;
        let out = c.pose_dims * c.bins;
        let dm = c.pose.model_dim;
        let embed_data = (0..c.bins * c.embed_dim)
            .map(|_| S::of(rng.normal()))
            .collect();
        let embed = store.add(
            "pose.embed",
            Array::new(&[c.bins, c.embed_dim], embed_data)?,
        );
        let pose_in_w = store.add(
            "pose.in_w",
            init_weight(&mut rng, c.pose_dims * c.embed_dim, dm),
        );
        let pose_in_b = store.add("pose.in_b", Array::zeros(&[dm]));
        let start_data = (0..dm).map(|_| S::of(rng.normal() * 0.1)).collect();
        let start = store.add("pose.start", Array::new(&[1, dm], start_data)?);
        let pose_blocks = (0..c.pose.blocks)
            .map(|i| {
                BlockParams::init(
                    &mut store,
                    &format!("pose.block{i}"),
                    &c.pose,
                    c.ff_mult,
                    &mut rng,
                )
            })
            .collect();
        let audio = if c.use_audio {
            let da = c.audio.model_dim;
            let beat_data = (0..2 * c.beat_embed_dim)
                .map(|_| S::of(rng.normal()))
                .collect();
            let beat_embed = store.add(
                "audio.beat_embed",
                Array::new(&[2, c.beat_embed_dim], beat_data)?,
            );
            let c_in = c.audio_dims + c.beat_embed_dim;
            let conv_w = store.add(
                "audio.conv_w",
                init_weight(&mut rng, c.audio_kernel * c_in, da),
            );
            let conv_b = store.add("audio.conv_b", Array::zeros(&[da]));
            let blocks = (0..c.audio.blocks)
                .map(|i| {
                    BlockParams::init(
                        &mut store,
                        &format!("audio.block{i}"),
                        &c.audio,
                        c.ff_mult,
                        &mut rng,
                    )
                })
                .collect();
            let fuse_w = store.add("fuse.wa", Array::zeros(&[da, out]));
            Some(AudioParams {
                beat_embed,
                conv_w,
                conv_b,
                blocks,
                fuse_w,
            })
        } else {
            None
        };
        let fuse_wx = store.add("fuse.wx", Array::zeros(&[dm, out]));
        let fuse_b = store.add("fuse.b", Array::zeros(&[out]));
        Ok(Self {
            config,
            params: store,
            ids: ModelParams {
                embed,
                pose_in_w,
                pose_in_b,
                start,
                pose_blocks,
                audio,
                fuse_wx,
                fuse_b,
            },
        })
    }

    pub fn config(&self) -> &TsmtConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<S> {
        &mut self.params
    }

    pub fn ids(&self) -> &ModelParams {
        &self.ids
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    /// Replaces every parameter with Gaussian noise of the given scale, with
    /// layer-norm gains centred on one. Used to exercise non-trivial gradients.
    pub fn randomize(&mut self, rng: &mut SeededRng, scale: f64) {
        for id in 0..self.params.len() {
            let centre = if self.params.name(id).contains("_g") {
                1.0
            } else {
                0.0
            };
            for v in self.params.get_mut(id).data_mut() {
                *v = S::of(centre + rng.normal() * scale);
            }
        }
    }

    pub fn validate_input(&self, input: &SequenceInput<'_>) -> Result<()> {
        let c = &self.config;
        let t = input.len();
        if t == 0 {
            return Err(Error::invalid("empty sequence"));
        }
        if t > c.max_context {
            return Err(Error::invalid(format!(
                "sequence of {t} frames exceeds the maximum context of {}",
                c.max_context
            )));
        }
        if input.tokens.len() != t * c.pose_dims {
            return Err(Error::shape(
                "model input tokens",
                &[input.tokens.len()],
                &[t, c.pose_dims],
            ));
        }
        if c.use_audio && input.audio.len() != t * c.audio_dims {
            return Err(Error::shape(
                "model input audio",
                &[input.audio.len()],
                &[t, c.audio_dims],
            ));
        }
        if let Some(&bad) = input.tokens.iter().find(|&&k| k >= c.bins) {
            return Err(Error::invalid(format!(
                "token {bad} out of range [0, {})",
                c.bins
            )));
        }
        Ok(())
    }

    /// Pose-stream output `z^X`, `[T, D^M]`.
    pub fn pose_stream(
        &self,
        g: &mut Graph<S>,
        tokens: &[usize],
        t_len: usize,
        dropout: Option<&mut Dropout<'_>>,
    ) -> Result<Var> {
        let c = &self.config;
        let table = g.param(&self.params, self.ids.embed);
        let e = g.embedding(table, tokens, t_len)?;
        let w = g.param(&self.params, self.ids.pose_in_w);
        let b = g.param(&self.params, self.ids.pose_in_b);
        let h = g.matmul(e, w)?;
        let h = g.add_row(h, b)?;
        let pe = g.constant(positional_encoding(t_len, c.pose.model_dim)?);
        let h = g.add(h, pe)?;
        stream_forward(
            g,
            &self.params,
            &self.ids.pose_blocks,
            &c.pose,
            h,
            true,
            S::of(c.ln_eps),
            dropout,
        )
    }

    /// Audio-stream output `z^A`, `[T, D^A]`.
    pub fn audio_stream(
        &self,
        g: &mut Graph<S>,
        audio: &[f64],
        beat: &[bool],
        dropout: Option<&mut Dropout<'_>>,
    ) -> Result<Var> {
        let c = &self.config;
        let a = self
            .ids
            .audio
            .as_ref()
            .ok_or_else(|| Error::invalid("model was built without an audio stream"))?;
        let t_len = beat.len();
        let feats = g.constant(Array::from_f64(&[t_len, c.audio_dims], audio)?);
        let table = g.param(&self.params, a.beat_embed);
        let idx: Vec<usize> = beat.iter().map(|&b| usize::from(b)).collect();
        let be = g.embedding(table, &idx, t_len)?;
        let x = g.concat_cols(&[feats, be])?;
        let w = g.param(&self.params, a.conv_w);
        let b = g.param(&self.params, a.conv_b);
        let h = g.conv1d_causal(x, w, b, c.audio_kernel)?;
        let pe = g.constant(positional_encoding(t_len, c.audio.model_dim)?);
        let h = g.add(h, pe)?;
        stream_forward(
            g,
            &self.params,
            &a.blocks,
            &c.audio,
            h,
            c.audio_causal,
            S::of(c.ln_eps),
            dropout,
        )
    }

    /// Fused per-coordinate log-probabilities, `[T * pose_dims, bins]`.
    pub fn fuse(&self, g: &mut Graph<S>, zx: Var, za: Option<Var>) -> Result<Var> {
        let c = &self.config;
        let t_len = g.value(zx).rows();
        let start = g.param(&self.params, self.ids.start);
        let shifted = if t_len > 1 {
            let prev = g.slice_rows(zx, 0, t_len - 1)?;
            g.concat_rows(&[start, prev])?
        } else {
            start
        };
        let wx = g.param(&self.params, self.ids.fuse_wx);
        let mut logits = g.matmul(shifted, wx)?;
        if let (Some(za), Some(a)) = (za, &self.ids.audio) {
            let wa = g.param(&self.params, a.fuse_w);
            let ha = g.matmul(za, wa)?;
            logits = g.add(logits, ha)?;
        }
        let b = g.param(&self.params, self.ids.fuse_b);
        let logits = g.add_row(logits, b)?;
        let logits = g.reshape(logits, &[t_len * c.pose_dims, c.bins])?;
        Ok(g.log_softmax(logits))
    }

    /// Full teacher-forced forward pass to log-probabilities.
    pub fn forward(
        &self,
        g: &mut Graph<S>,
        input: &SequenceInput<'_>,
        mut dropout: Option<&mut Dropout<'_>>,
    ) -> Result<Var> {
        self.validate_input(input)?;
        let zx = self.pose_stream(g, input.tokens, input.len(), dropout.as_deref_mut())?;
        let za = if self.config.use_audio {
            Some(self.audio_stream(g, input.audio, input.beat, dropout)?)
        } else {
            None
        };
        self.fuse(g, zx, za)
    }

    /// Mean negative log-likelihood of the sequence's own tokens.
    pub fn loss(
        &self,
        g: &mut Graph<S>,
        input: &SequenceInput<'_>,
        dropout: Option<&mut Dropout<'_>>,
    ) -> Result<Var> {
        let logp = self.forward(g, input, dropout)?;
        g.nll(logp, input.tokens)
    }

    /// Log-probabilities without dropout, `[T * pose_dims, bins]`.
    pub fn log_probs(&self, input: &SequenceInput<'_>) -> Result<Array<S>> {
        let mut g = Graph::new();
        let lp = self.forward(&mut g, input, None)?;
        Ok(g.value(lp).clone())
    }

    /// Mean loss over a batch (no dropout).
    pub fn batch_loss(&self, batch: &[SequenceInput<'_>]) -> Result<S> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let losses = batch
            .par_iter()
            .map(|inp| {
                let mut g = Graph::new();
                let l = self.loss(&mut g, inp, None)?;
                Ok(g.value(l).item())
            })
            .collect::<Result<Vec<S>>>()?;
        Ok(losses.into_iter().sum::<S>() / S::of_usize(batch.len()))
    }

    /// Mean batch loss and its gradient for every parameter. Sequences are
    /// evaluated in parallel on separate graphs; `dropout_rngs`, when given,
    /// holds one generator per sequence.
    pub fn loss_and_grads(
        &self,
        batch: &[SequenceInput<'_>],
        dropout_rngs: Option<Vec<SeededRng>>,
    ) -> Result<(S, Vec<Array<S>>)> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let n = S::of_usize(batch.len());
        let p = self.config.dropout;
        let rngs: Vec<Option<SeededRng>> = match dropout_rngs {
            Some(r) if r.len() == batch.len() => r.into_iter().map(Some).collect(),
            Some(r) => {
                return Err(Error::invalid(format!(
                    "{} dropout generators for a batch of {}",
                    r.len(),
                    batch.len()
                )))
            }
            None => batch.iter().map(|_| None).collect(),
        };
        let parts = batch
            .par_iter()
            .zip(rngs)
            .map(|(inp, rng)| {
                let mut g = Graph::new();
                let mut rng = rng;
                let mut drop = rng.as_mut().map(|r| Dropout { p, rng: r });
                let l = self.loss(&mut g, inp, drop.as_mut())?;
                let scaled = g.scale(l, S::one() / n);
                let value = g.value(l).item();
                let grads = g.backward(scaled)?;
                Ok((value, grads.param_grads(&self.params)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = S::zero();
        let mut acc: Option<Vec<Array<S>>> = None;
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

    /// Fraction of coordinates whose teacher-forced argmax equals the target token.
    pub fn argmax_accuracy(&self, inputs: &[SequenceInput<'_>]) -> Result<f64> {
        let results = inputs
            .par_iter()
            .map(|inp| {
                let lp = self.log_probs(inp)?;
                let hits = inp
                    .tokens
                    .iter()
                    .enumerate()
                    .filter(|&(i, &tok)| argmax(lp.row(i)) == tok)
                    .count();
                Ok((hits, inp.tokens.len()))
            })
            .collect::<Result<Vec<_>>>()?;
        let (hits, total) = results.iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        Ok(hits as f64 / total.max(1) as f64)
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<T: Scalar>(&self) -> Tsmt<T> {
        let mut params = ParamStore::new();
        for (name, a) in self.params.iter() {
            params.add(name, a.cast());
        }
        Tsmt {
            config: self.config.clone(),
            params,
            ids: self.ids.clone(),
        }
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax<S: Scalar>(row: &[S]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
