//! Per-agent detection scores from trained representations, shared with
//! neighbors through one averaging round per step.

mod score;

pub use score::{agent_dissimilarity, cap_neighbors, communicate, score_trace, ScoreSeries};
