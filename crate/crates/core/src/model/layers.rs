//! Transformer building blocks shared by the motion model and the style
//! classifier.

use super::config::StreamConfig;
use crate::error::Result;
use crate::numerics::{Array, Graph, ParamId, ParamStore, Var};
use crate::rng::SeededRng;
use crate::Scalar;

/// Parameter ids of one attention + feed-forward block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockParams {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub wo: ParamId,
    pub bo: ParamId,
    pub ln1_g: ParamId,
    pub ln1_b: ParamId,
    pub ff1_w: ParamId,
    pub ff1_b: ParamId,
    pub ff2_w: ParamId,
    pub ff2_b: ParamId,
    pub ln2_g: ParamId,
    pub ln2_b: ParamId,
}

/// Gaussian weights scaled by `1/sqrt(fan_in)`.
pub fn init_weight<S: Scalar>(rng: &mut SeededRng, rows: usize, cols: usize) -> Array<S> {
    let scale = 1.0 / (rows as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| S::of(rng.normal() * scale))
        .collect();
    Array::new(&[rows, cols], data).expect("shape matches data")
}

impl BlockParams {
    pub fn init<S: Scalar>(
        store: &mut ParamStore<S>,
        prefix: &str,
        cfg: &StreamConfig,
        ff_mult: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let (d, a, f) = (cfg.model_dim, cfg.attn_dim(), cfg.ff_dim(ff_mult));
        let mut w = |name: &str, r: usize, c: usize, rng: &mut SeededRng| {
            store.add(format!("{prefix}.{name}"), init_weight(rng, r, c))
        };
        let wq = w("wq", d, a, rng);
        let wk = w("wk", d, a, rng);
        let wv = w("wv", d, a, rng);
        let wo = w("wo", a, d, rng);
        let ff1_w = w("ff1_w", d, f, rng);
        let ff2_w = w("ff2_w", f, d, rng);
        let mut v = |name: &str, n: usize, val: f64| {
            store.add(format!("{prefix}.{name}"), Array::full(&[n], S::of(val)))
        };
        Self {
            wq,
            wk,
            wv,
            wo,
            bo: v("bo", d, 0.0),
            ln1_g: v("ln1_g", d, 1.0),
            ln1_b: v("ln1_b", d, 0.0),
            ff1_w,
            ff1_b: v("ff1_b", f, 0.0),
            ff2_w,
            ff2_b: v("ff2_b", d, 0.0),
            ln2_g: v("ln2_g", d, 1.0),
            ln2_b: v("ln2_b", d, 0.0),
        }
    }
}

/// Inverted dropout driven by a seeded generator.
pub struct Dropout<'a> {
    pub p: f64,
    pub rng: &'a mut SeededRng,
}

impl Dropout<'_> {
    pub fn apply<S: Scalar>(&mut self, g: &mut Graph<S>, x: Var) -> Result<Var> {
        if self.p <= 0.0 {
            return Ok(x);
        }
        let keep = S::of(1.0 / (1.0 - self.p));
        let shape = g.value(x).shape().to_vec();
        let n = g.value(x).len();
        let mask = (0..n)
            .map(|_| {
                if self.rng.uniform() < self.p {
                    S::zero()
                } else {
                    keep
                }
            })
            .collect();
        let m = g.constant(Array::new(&shape, mask)?);
        g.mul(x, m)
    }
}

/// Bound graph variables of one block.
struct BlockVars {
    wq: Var,
    wk: Var,
    wv: Var,
    wo: Var,
    bo: Var,
    ln1_g: Var,
    ln1_b: Var,
    ff1_w: Var,
    ff1_b: Var,
    ff2_w: Var,
    ff2_b: Var,
    ln2_g: Var,
    ln2_b: Var,
}

fn bind<S: Scalar>(g: &mut Graph<S>, store: &ParamStore<S>, p: &BlockParams) -> BlockVars {
    BlockVars {
        wq: g.param(store, p.wq),
        wk: g.param(store, p.wk),
        wv: g.param(store, p.wv),
        wo: g.param(store, p.wo),
        bo: g.param(store, p.bo),
        ln1_g: g.param(store, p.ln1_g),
        ln1_b: g.param(store, p.ln1_b),
        ff1_w: g.param(store, p.ff1_w),
        ff1_b: g.param(store, p.ff1_b),
        ff2_w: g.param(store, p.ff2_w),
        ff2_b: g.param(store, p.ff2_b),
        ln2_g: g.param(store, p.ln2_g),
        ln2_b: g.param(store, p.ln2_b),
    }
}

/// Multi-head self-attention over `x` (`[T, D]`), before the output
/// projection. Returns the concatenated head outputs, `[T, heads * head_dim]`.
pub fn attention<S: Scalar>(
    g: &mut Graph<S>,
    x: Var,
    wq: Var,
    wk: Var,
    wv: Var,
    cfg: &StreamConfig,
    causal: bool,
    mut dropout: Option<&mut Dropout<'_>>,
) -> Result<Var> {
    let q = g.matmul(x, wq)?;
    let k = g.matmul(x, wk)?;
    let v = g.matmul(x, wv)?;
    let scale = S::one() / S::of_usize(cfg.head_dim).sqrt();
    let mut heads = Vec::with_capacity(cfg.heads);
    for h in 0..cfg.heads {
        let (lo, hi) = (h * cfg.head_dim, (h + 1) * cfg.head_dim);
        let qh = g.slice_cols(q, lo, hi)?;
        let kh = g.slice_cols(k, lo, hi)?;
        let vh = g.slice_cols(v, lo, hi)?;
        let kt = g.transpose(kh)?;
        let scores = g.matmul(qh, kt)?;
        let scores = g.scale(scores, scale);
        let mut probs = if causal {
            g.causal_softmax(scores)?
        } else {
            g.softmax(scores)
        };
        if let Some(d) = dropout.as_deref_mut() {
            probs = d.apply(g, probs)?;
        }
        heads.push(g.matmul(probs, vh)?);
    }
    if heads.len() == 1 {
        Ok(heads[0])
    } else {
        g.concat_cols(&heads)
    }
}

/// One block: attention, projection, residual and layer norm, followed by a
/// position-wise feed-forward pair with its own residual and layer norm.
#[allow(clippy::too_many_arguments)]
pub fn block_forward<S: Scalar>(
    g: &mut Graph<S>,
    store: &ParamStore<S>,
    p: &BlockParams,
    cfg: &StreamConfig,
    x: Var,
    causal: bool,
    eps: S,
    mut dropout: Option<&mut Dropout<'_>>,
) -> Result<Var> {
    let b = bind(g, store, p);
    let att = attention(g, x, b.wq, b.wk, b.wv, cfg, causal, dropout.as_deref_mut())?;
    let proj = g.matmul(att, b.wo)?;
    let proj = g.add_row(proj, b.bo)?;
    let res = g.add(x, proj)?;
    let y = g.layer_norm(res, b.ln1_g, b.ln1_b, eps)?;
    let h = g.matmul(y, b.ff1_w)?;
    let h = g.add_row(h, b.ff1_b)?;
    let h = g.relu(h);
    let f = g.matmul(h, b.ff2_w)?;
    let mut f = g.add_row(f, b.ff2_b)?;
    if let Some(d) = dropout {
        f = d.apply(g, f)?;
    }
    let res = g.add(y, f)?;
    g.layer_norm(res, b.ln2_g, b.ln2_b, eps)
}

/// Stacked blocks. An empty stack is the identity.
#[allow(clippy::too_many_arguments)]
pub fn stream_forward<S: Scalar>(
    g: &mut Graph<S>,
    store: &ParamStore<S>,
    blocks: &[BlockParams],
    cfg: &StreamConfig,
    x: Var,
    causal: bool,
    eps: S,
    mut dropout: Option<&mut Dropout<'_>>,
) -> Result<Var> {
    let mut h = x;
    for p in blocks {
        h = block_forward(g, store, p, cfg, h, causal, eps, dropout.as_deref_mut())?;
    }
    Ok(h)
}
