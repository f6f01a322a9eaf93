//! Autoregressive sampling with cached attention.

mod categorical;
mod generate;
mod session;

pub use categorical::{sample_categorical, Sampling};
pub use generate::{
    generate, generate_tokens, incremental_nll, AudioInput, GenerationRequest, GenerationResult,
    SeedFrames, TokenGeneration,
};
pub use session::Session;
