//! Music-conditioned dance motion synthesis.
//!
//! The crate covers the whole pipeline: pose and audio conditioning
//! ([`motion`], [`audio`]), a discrete-pose two-stream transformer trained with
//! teacher forcing ([`model`]), autoregressive sampling with cached attention
//! ([`sampler`]) and the evaluation suite ([`metrics`]). The numeric core
//! ([`numerics`]) and the model are generic over [`Scalar`]; the aliases below
//! fix the scalar to `f64`, which is what checkpoints store.

pub mod audio;
mod error;
pub mod fsutil;
pub mod metrics;
pub mod model;
pub mod motion;
pub mod numerics;
mod rng;
pub mod sampler;
mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use rng::SeededRng;
pub use scalar::Scalar;

pub type Array64 = numerics::Array<f64>;
pub type Array32 = numerics::Array<f32>;
pub type Graph64 = numerics::Graph<f64>;
pub type Model64 = model::Tsmt<f64>;
pub type Model32 = model::Tsmt<f32>;
pub type Checkpoint64 = model::Checkpoint<f64>;
pub type Session64<'a> = sampler::Session<'a, f64>;
