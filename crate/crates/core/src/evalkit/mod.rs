//! Ground-truth labeling, tolerance F1, covering, and threshold search.
//!
//! All indices are 0-based positions in an evaluation series. A change
//! point is the first index of a new segment.

mod label;
mod metrics;
mod threshold;

pub use label::label_offline;
pub use metrics::{covering, f1_at_tolerance, mean_std, F1Report, MetricsReport, RunMetrics, Segmentation};
pub use threshold::{mean_f1_at, quantile_candidates, search_threshold, ThresholdChoice, ThresholdRun, TimeAxis};
