//! Hierarchical emergence detection for agent-based systems.
//!
//! Agents encode their local neighborhood over a sliding window, turn the
//! change in their own representation into a score in `[0, 1]`, and share
//! only that score with neighbors. Scores are summed per grid region, and a
//! region-level encoder turns the region series into a single system score
//! whose falling edges through a threshold mark detected change points.
//!
//! Both encoder levels are trained without labels by aligning an online and
//! an EMA target branch over temporal and spatial views of the same window.

pub mod agent_detect;
pub mod agent_model;
pub mod baseline_detect;
pub mod dyngraph;
pub mod encoder;
pub mod error;
pub mod evalkit;
pub mod experiment;
pub mod pipeline;
pub mod simkit;
pub mod system_model;
pub mod tensorkit;

pub use error::{Error, Result};
