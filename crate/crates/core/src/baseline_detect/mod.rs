//! DETect-style baseline: each agent regresses its own motion on its
//! neighborhood, runs CUSUM on the p-values, and shares a scalar belief with
//! one random neighbor per step. Emergence is declared when the number of
//! agents sending feedback jumps above its recent level.

mod belief;
mod pipeline;
mod relation;

pub use belief::{collaborate, cusum_detect, detect_global_baseline};
pub use pipeline::{calibrate_baseline, feedback_counts, run_baseline, BaselineCalibration, BaselineConfig, BaselineRun};
pub use relation::{compute_variables, fit_relationship, ols_p_value, External, Internal};
