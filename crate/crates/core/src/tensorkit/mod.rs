//! Small differentiable numeric kernel shared by the agent- and region-level
//! encoders: dense layers, two-layer MLPs, softmax, cosine dissimilarity,
//! Adam, EMA and a finite-difference gradient checker.
//!
//! Everything is `f64`. Backward passes are written by hand per layer and
//! verified with [`grad_check`].

mod checkpoint;
mod dense;
mod gradcheck;
mod ops;
mod optim;

pub use checkpoint::{Checkpoint, CheckpointMeta, TensorRecord};
pub use dense::{dense_forward, Dense, Mlp, MlpCache};
pub use gradcheck::{grad_check, relative_error};
pub use ops::{cosine_dissim, cosine_dissim_grad, softmax, softmax_in_place};
pub use optim::{adam_step, ema_update, AdamConfig, OptimizerState, Parameters, TensorMut, TensorRef};

pub use optim::{assign_flat, flatten};
