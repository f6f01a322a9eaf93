use crate::error::{Error, Result};
use crate::model::layers::BlockParams;
use crate::model::{positional_row, StreamConfig, Tsmt};
use crate::numerics::kernels::{
    add_in_place, axpy, conv_row, dot, layer_norm, log_softmax, relu_in_place, softmax, vec_mat,
};
use crate::numerics::{Array, ParamStore};
use crate::Scalar;

/// Keys and values of every past position for one block, `heads * head_dim`
/// values per row.
#[derive(Debug, Clone, Default)]
struct KvCache<S> {
    keys: Vec<S>,
    values: Vec<S>,
}

/// Scratch buffers and cache for one stream.
#[derive(Debug, Clone)]
struct StreamState<S> {
    caches: Vec<KvCache<S>>,
}

/// Incremental decoder over one model.
///
/// Each call to [`Session::predict`] consumes the next audio frame and returns
/// the distribution of the next pose frame; [`Session::commit`] then feeds
/// the chosen tokens back. Past keys and values are cached, so step `t` costs
/// `O(t)` attention work instead of recomputing the whole prefix, and the
/// arithmetic matches the parallel forward pass operation for operation.
#[derive(Debug, Clone)]
pub struct Session<'a, S> {
    model: &'a Tsmt<S>,
    pose: StreamState<S>,
    audio: StreamState<S>,
    audio_inputs: Vec<Vec<S>>,
    prev_pose: Vec<S>,
    pending_audio: Option<Vec<S>>,
    pos: usize,
    step_flops: Vec<u64>,
    flops: u64,
}

fn block_step<S: Scalar>(
    store: &ParamStore<S>,
    p: &BlockParams,
    cfg: &StreamConfig,
    cache: &mut KvCache<S>,
    x: &[S],
    eps: S,
    flops: &mut u64,
) -> Vec<S> {
    let a = cfg.attn_dim();
    let d = cfg.model_dim;
    let mut q = vec![S::zero(); a];
    let mut k = vec![S::zero(); a];
    let mut v = vec![S::zero(); a];
    vec_mat(x, store.get(p.wq), &mut q);
    vec_mat(x, store.get(p.wk), &mut k);
    vec_mat(x, store.get(p.wv), &mut v);
    cache.keys.extend_from_slice(&k);
    cache.values.extend_from_slice(&v);
    let n = cache.keys.len() / a;
    let scale = S::one() / S::of_usize(cfg.head_dim).sqrt();
    let mut att = vec![S::zero(); a];
    let mut scores = vec![S::zero(); n];
    let mut probs = vec![S::zero(); n];
    for h in 0..cfg.heads {
        let (lo, hi) = (h * cfg.head_dim, (h + 1) * cfg.head_dim);
        for (j, s) in scores.iter_mut().enumerate() {
            *s = dot(&q[lo..hi], &cache.keys[j * a + lo..j * a + hi]) * scale;
        }
        softmax(&scores, &mut probs);
        for (j, &pj) in probs.iter().enumerate() {
            axpy(pj, &cache.values[j * a + lo..j * a + hi], &mut att[lo..hi]);
        }
    }
    let f = store.get(p.ff1_w).cols();
    *flops += (3 * d * a + 2 * n * a + a * d + 2 * d * f) as u64;
    let mut proj = vec![S::zero(); d];
    vec_mat(&att, store.get(p.wo), &mut proj);
    add_in_place(&mut proj, store.get(p.bo).data());
    let mut res = x.to_vec();
    add_in_place(&mut res, &proj);
    let mut xhat = vec![S::zero(); d];
    let mut y = vec![S::zero(); d];
    layer_norm(
        &res,
        store.get(p.ln1_g).data(),
        store.get(p.ln1_b).data(),
        eps,
        &mut xhat,
        &mut y,
    );
    let mut hdn = vec![S::zero(); f];
    vec_mat(&y, store.get(p.ff1_w), &mut hdn);
    add_in_place(&mut hdn, store.get(p.ff1_b).data());
    relu_in_place(&mut hdn);
    let mut ff = vec![S::zero(); d];
    vec_mat(&hdn, store.get(p.ff2_w), &mut ff);
    add_in_place(&mut ff, store.get(p.ff2_b).data());
    let mut res2 = y.clone();
    add_in_place(&mut res2, &ff);
    let mut out = vec![S::zero(); d];
    layer_norm(
        &res2,
        store.get(p.ln2_g).data(),
        store.get(p.ln2_b).data(),
        eps,
        &mut xhat,
        &mut out,
    );
    out
}

impl<'a, S: Scalar> Session<'a, S> {
    pub fn new(model: &'a Tsmt<S>) -> Result<Self> {
        let c = model.config();
        if c.use_audio && !c.audio_causal {
            return Err(Error::invalid(
                "incremental decoding needs a causal audio stream",
            ));
        }
        let ids = model.ids();
        let audio_blocks = ids.audio.as_ref().map_or(0, |a| a.blocks.len());
        Ok(Self {
            model,
            pose: StreamState {
                caches: vec![KvCache::default(); ids.pose_blocks.len()],
            },
            audio: StreamState {
                caches: vec![KvCache::default(); audio_blocks],
            },
            audio_inputs: Vec::new(),
            prev_pose: model.params().get(ids.start).data().to_vec(),
            pending_audio: None,
            pos: 0,
            step_flops: Vec::new(),
            flops: 0,
        })
    }

    pub fn model(&self) -> &Tsmt<S> {
        self.model
    }

    /// Frames committed so far.
    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn is_full(&self) -> bool {
        self.pos >= self.model.config().max_context
    }

    /// Multiply-accumulate count of each completed step.
    pub fn step_flops(&self) -> &[u64] {
        &self.step_flops
    }

    fn audio_step(&mut self, features: &[f64], beat: bool) -> Result<Vec<S>> {
        let c = self.model.config();
        let a = self
            .model
            .ids()
            .audio
            .as_ref()
            .expect("audio stream present");
        let store = self.model.params();
        if features.len() != c.audio_dims {
            return Err(Error::shape(
                "session audio frame",
                &[features.len()],
                &[c.audio_dims],
            ));
        }
        let mut row: Vec<S> = features.iter().map(|&v| S::of(v)).collect();
        row.extend_from_slice(store.get(a.beat_embed).row(usize::from(beat)));
        self.audio_inputs.push(row);
        let k = c.audio_kernel;
        if self.audio_inputs.len() > k {
            self.audio_inputs.remove(0);
        }
        let n = self.audio_inputs.len();
        let t = self.pos;
        let window: Vec<Option<&[S]>> = (0..k)
            .map(|i| (t + i + 1 >= k).then(|| self.audio_inputs[n + i - k].as_slice()))
            .collect();
        let d = c.audio.model_dim;
        let mut h = vec![S::zero(); d];
        conv_row(
            &window,
            store.get(a.conv_w),
            store.get(a.conv_b).data(),
            &mut h,
        );
        self.flops += (k * (c.audio_dims + c.beat_embed_dim) * d) as u64;
        let mut pe = vec![S::zero(); d];
        positional_row(t, d, &mut pe);
        add_in_place(&mut h, &pe);
        let eps = S::of(c.ln_eps);
        for (p, cache) in a.blocks.iter().zip(&mut self.audio.caches) {
            h = block_step(store, p, &c.audio, cache, &h, eps, &mut self.flops);
        }
        Ok(h)
    }

    /// Consumes audio frame `t` (standardized features and beat flag) and
    /// returns log-probabilities `[pose_dims, bins]` for pose frame `t`.
    /// Audio is ignored by models without an audio stream.
    pub fn predict(&mut self, features: &[f64], beat: bool) -> Result<Array<S>> {
        if self.pending_audio.is_some() {
            return Err(Error::invalid("predict called twice without commit"));
        }
        if self.is_full() {
            return Err(Error::invalid(format!(
                "session exhausted: maximum context of {} frames reached",
                self.model.config().max_context
            )));
        }
        let c = self.model.config();
        let store = self.model.params();
        let ids = self.model.ids();
        let out = c.pose_dims * c.bins;
        let mut logits = vec![S::zero(); out];
        vec_mat(&self.prev_pose, store.get(ids.fuse_wx), &mut logits);
        self.flops += (c.pose.model_dim * out) as u64;
        let za = if c.use_audio {
            let za = self.audio_step(features, beat)?;
            let a = ids.audio.as_ref().expect("audio stream present");
            let mut ha = vec![S::zero(); out];
            vec_mat(&za, store.get(a.fuse_w), &mut ha);
            self.flops += (c.audio.model_dim * out) as u64;
            add_in_place(&mut logits, &ha);
            za
        } else {
            Vec::new()
        };
        add_in_place(&mut logits, store.get(ids.fuse_b).data());
        let mut lp = vec![S::zero(); out];
        for (src, dst) in logits.chunks(c.bins).zip(lp.chunks_mut(c.bins)) {
            log_softmax(src, dst);
        }
        self.pending_audio = Some(za);
        Array::new(&[c.pose_dims, c.bins], lp)
    }

    /// Feeds the tokens chosen for the frame last predicted.
    pub fn commit(&mut self, tokens: &[usize]) -> Result<()> {
        if self.pending_audio.take().is_none() {
            return Err(Error::invalid("commit called without a preceding predict"));
        }
        let c = self.model.config();
        if tokens.len() != c.pose_dims {
            return Err(Error::shape(
                "session commit",
                &[tokens.len()],
                &[c.pose_dims],
            ));
        }
        if let Some(&bad) = tokens.iter().find(|&&k| k >= c.bins) {
            return Err(Error::invalid(format!(
                "token {bad} out of range [0, {})",
                c.bins
            )));
        }
        let store = self.model.params();
        let ids = self.model.ids();
        let table = store.get(ids.embed);
        let mut e = Vec::with_capacity(c.pose_dims * c.embed_dim);
        for &k in tokens {
            e.extend_from_slice(table.row(k));
        }
        let d = c.pose.model_dim;
        let mut h = vec![S::zero(); d];
        vec_mat(&e, store.get(ids.pose_in_w), &mut h);
        add_in_place(&mut h, store.get(ids.pose_in_b).data());
        self.flops += (e.len() * d) as u64;
        let mut pe = vec![S::zero(); d];
        positional_row(self.pos, d, &mut pe);
        add_in_place(&mut h, &pe);
        let eps = S::of(c.ln_eps);
        for (p, cache) in ids.pose_blocks.iter().zip(&mut self.pose.caches) {
            h = block_step(store, p, &c.pose, cache, &h, eps, &mut self.flops);
        }
        self.prev_pose = h;
        self.pos += 1;
        self.step_flops.push(std::mem::take(&mut self.flops));
        Ok(())
    }
}
