//! Spatio-temporal encoder shared by the agent and region levels.
//!
//! Each step, every node embeds its input and attends over its current
//! neighbors' embedding differences. Each node's sequence of spatial
//! outputs then goes through one full (non-causal) temporal attention layer.

mod incremental;
mod network;

pub use incremental::WindowCache;
pub use network::{Encoder, EncoderCache, EncoderWindow};

mod scaler;
pub use scaler::Standardizer;
