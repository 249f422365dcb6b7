//! Agent-level encoder, its self-supervised losses, and training.
//!
//! The online branch is trained by gradient descent; the target branch
//! follows it by exponential moving average and only supplies constants to
//! the losses.

mod losses;
mod net;
mod train;

pub use losses::{agent_losses, neighbor_frequencies, sample_temporal_neighbors, AgentLosses};
pub use net::{AgentHyper, AgentModel, AgentNet};
pub use train::{train_agent, write_train_log, TrainRecord};
