use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::belief::{collaborate, cusum_detect, detect_global_baseline};
use super::relation::{compute_variables, fit_relationship};
use crate::dyngraph::{AgentTrace, DynamicGraph, WindowView};
use crate::error::{Error, Result};
use crate::evalkit::{f1_at_tolerance, quantile_candidates};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Steps per sliding regression window.
    pub regression_window: usize,
    pub drift: f64,
    pub cusum_threshold: f64,
    pub mix: f64,
    /// Belief above which an agent sends feedback.
    pub feedback_threshold: f64,
    /// Trailing window of the global rule, in evaluation steps.
    pub rolling_window: usize,
    pub z: f64,
    pub delta: f64,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            regression_window: 20,
            drift: 0.05,
            cusum_threshold: 0.5,
            mix: 0.05,
            feedback_threshold: 0.5,
            rolling_window: 50,
            z: 3.0,
            delta: 5.0,
            seed: 0,
        }
    }
}

/// Beliefs per recorded step, `beliefs[t][j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub beliefs: Vec<Vec<f64>>,
    /// Fraction of agents flagging a change at each step.
    pub flag_rate: Vec<f64>,
}

/// Runs the per-agent relationship tests, CUSUM, and belief sharing over a
/// whole trace.
pub fn run_baseline(trace: &AgentTrace, cfg: &BaselineConfig) -> Result<BaselineRun> {
    let l = cfg.regression_window;
    if l < 3 {
        return Err(Error::Config("regression window must be at least 3".into()));
    }
    let len = trace.len();
    let n = trace.n_agents();
    let graph = DynamicGraph::build(trace, cfg.delta);
    // flags[j][t]
    let flags: Vec<Vec<bool>> = (0..n)
        .into_par_iter()
        .map(|j| -> Result<Vec<bool>> {
            if len < l {
                return Ok(vec![false; len]);
            }
            let whole = WindowView::new(trace, &graph, len - 1, len)?;
            let (internal, external) = compute_variables(&whole, j, cfg.delta);
            let mut p = vec![[[1.0; 4]; 2]; len];
            for t in l - 1..len {
                p[t] = fit_relationship(&internal[t + 1 - l..=t], &external[t + 1 - l..=t])?;
            }
            let mut any = vec![false; len];
            for i in 0..2 {
                for e in 0..4 {
                    let series: Vec<f64> = p[l - 1..].iter().map(|m| m[i][e]).collect();
                    for (k, f) in cusum_detect(&series, cfg.drift, cfg.cusum_threshold).into_iter().enumerate() {
                        any[l - 1 + k] |= f;
                    }
                }
            }
            Ok(any)
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut beliefs = Vec::with_capacity(len);
    let mut flag_rate = Vec::with_capacity(len);
    let mut b = vec![0.0; n];
    for t in 0..len {
        let f: Vec<bool> = (0..n).map(|j| flags[j][t]).collect();
        flag_rate.push(f.iter().filter(|&&x| x).count() as f64 / n.max(1) as f64);
        b = collaborate(&b, &f, graph.at(t), cfg.mix, &mut rng)?;
        beliefs.push(b.clone());
    }
    Ok(BaselineRun { beliefs, flag_rate })
}

/// Number of agents whose belief exceeds `threshold`, summed over each
/// block of `per_eval` recorded steps.
pub fn feedback_counts(run: &BaselineRun, threshold: f64, per_eval: usize) -> Vec<f64> {
    let per_eval = per_eval.max(1);
    run.beliefs
        .chunks(per_eval)
        .map(|block| block.iter().flatten().filter(|&&b| b > threshold).count() as f64)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineCalibration {
    pub feedback_threshold: f64,
    pub z: f64,
    pub mean_f1: f64,
}

/// Grid search of the feedback threshold and `z` on validation runs for
/// the best mean F1, preferring larger values on ties. Each run is
/// `(baseline output, truth points, evaluation length)`.
pub fn calibrate_baseline(
    runs: &[(&BaselineRun, &[usize], usize)],
    cfg: &BaselineConfig,
    per_eval: usize,
    theta: usize,
) -> Result<BaselineCalibration> {
    if runs.is_empty() {
        return Err(Error::EmptySet("validation runs"));
    }
    let pooled: Vec<f64> = runs.iter().flat_map(|r| r.0.beliefs.iter().flatten().copied()).collect();
    let q = quantile_candidates(&pooled);
    let mut thresholds: Vec<f64> = [50, 60, 70, 80, 90, 95, 99]
        .iter()
        .map(|&k| q[((k as f64 / 100.0) * (q.len() - 1) as f64).round() as usize])
        .collect();
    thresholds.push(cfg.feedback_threshold);
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let zs = [1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0];
    let mut best = BaselineCalibration { feedback_threshold: cfg.feedback_threshold, z: cfg.z, mean_f1: f64::NEG_INFINITY };
    for &th in &thresholds {
        let counts: Vec<Vec<f64>> = runs.iter().map(|r| feedback_counts(r.0, th, per_eval)).collect();
        for &z in &zs {
            let f: f64 = runs
                .iter()
                .zip(&counts)
                .map(|(r, c)| {
                    let det: Vec<usize> = detect_global_baseline(c, cfg.rolling_window, z)
                        .into_iter()
                        .filter(|&p| p < r.2)
                        .collect();
                    f1_at_tolerance(r.1, &det, theta).f1
                })
                .sum::<f64>()
                / runs.len() as f64;
            if f >= best.mean_f1 {
                best = BaselineCalibration { feedback_threshold: th, z, mean_f1: f };
            }
        }
    }
    Ok(best)
}
