use serde::{Deserialize, Serialize};

use super::metrics::f1_at_tolerance;
use crate::error::{Error, Result};
use crate::system_model::detect_change_points;

/// Maps detection indices onto the evaluation axis. A score series sampled
/// every `detect_stride` raw steps is compared with truth sampled every
/// `eval_stride` raw steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeAxis {
    pub detect_stride: usize,
    pub eval_stride: usize,
}

impl TimeAxis {
    pub const IDENTITY: TimeAxis = TimeAxis { detect_stride: 1, eval_stride: 1 };

    pub fn new(detect_stride: usize, eval_stride: usize) -> Result<Self> {
        if detect_stride == 0 || eval_stride == 0 {
            return Err(Error::Config("strides must be positive".into()));
        }
        Ok(TimeAxis { detect_stride, eval_stride })
    }

    /// Floors each point onto the evaluation axis and keeps the distinct
    /// ones inside `(0, eval_len)`.
    pub fn map_points(&self, points: &[usize], eval_len: usize) -> Vec<usize> {
        let mut out: Vec<usize> = points
            .iter()
            .map(|&p| p * self.detect_stride / self.eval_stride)
            .filter(|&p| p > 0 && p < eval_len)
            .collect();
        out.dedup();
        out
    }
}

/// One validation run: a detection-axis score series and its truth points.
#[derive(Clone, Copy, Debug)]
pub struct ThresholdRun<'a> {
    pub scores: &'a [f64],
    pub truth: &'a [usize],
    pub eval_len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub mean_f1: f64,
}

/// Linear-interpolated quantiles at 1%..99% plus min and max, sorted and
/// deduplicated. Non-finite values are ignored.
pub fn quantile_candidates(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return Vec::new();
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let q = |p: f64| {
        let pos = p * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    let mut out = vec![v[0], v[n - 1]];
    out.extend((1..100).map(|k| q(k as f64 / 100.0)));
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

pub fn mean_f1_at(runs: &[ThresholdRun], c: f64, axis: TimeAxis, theta: usize) -> f64 {
    let total: f64 = runs
        .iter()
        .map(|r| {
            let det = axis.map_points(&detect_change_points(r.scores, c), r.eval_len);
            f1_at_tolerance(r.truth, &det, theta).f1
        })
        .sum();
    total / runs.len() as f64
}

/// Picks the candidate threshold with the best mean F1 over `runs`,
/// preferring the larger threshold on ties.
pub fn search_threshold(runs: &[ThresholdRun], axis: TimeAxis, theta: usize) -> Result<ThresholdChoice> {
    if runs.is_empty() {
        return Err(Error::EmptySet("validation runs"));
    }
    let pooled: Vec<f64> = runs.iter().flat_map(|r| r.scores.iter().copied()).collect();
    let candidates = quantile_candidates(&pooled);
    if candidates.is_empty() {
        return Err(Error::EmptySet("validation scores"));
    }
    let mut best = ThresholdChoice { threshold: candidates[0], mean_f1: f64::NEG_INFINITY };
    for &c in &candidates {
        let f = mean_f1_at(runs, c, axis, theta);
        if f >= best.mean_f1 {
            best = ThresholdChoice { threshold: c, mean_f1: f };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_of_a_ramp() {
        let v: Vec<f64> = (0..=100).map(f64::from).collect();
        let c = quantile_candidates(&v);
        assert_eq!(c.len(), 101);
        assert_eq!(c[0], 0.0);
        assert_eq!(c[37], 37.0);
        assert_eq!(c[100], 100.0);
        assert!(quantile_candidates(&[]).is_empty());
        assert_eq!(quantile_candidates(&[2.0, 2.0]), vec![2.0]);
    }

    #[test]
    fn map_points_floors_and_filters() {
        let axis = TimeAxis::new(5, 50).unwrap();
        assert_eq!(axis.map_points(&[3, 10, 19, 20, 400], 20), vec![1, 2]);
        assert_eq!(TimeAxis::IDENTITY.map_points(&[0, 4, 9], 9), vec![4]);
        assert!(TimeAxis::new(0, 1).is_err());
    }

    #[test]
    fn bimodal_scores_pick_largest_separating_candidate() {
        // Three low plateaus separated by two high bursts ending at 40 and 80.
        let mut s = vec![0.1; 120];
        for i in 30..40 {
            s[i] = 0.9;
        }
        for i in 70..80 {
            s[i] = 0.8;
        }
        let truth = [40, 80];
        let run = ThresholdRun { scores: &s, truth: &truth, eval_len: 120 };
        let best = search_threshold(&[run], TimeAxis::IDENTITY, 0).unwrap();
        assert_eq!(best.mean_f1, 1.0);
        let cands = quantile_candidates(&s);
        let largest_perfect = cands
            .iter()
            .copied()
            .filter(|&c| mean_f1_at(&[run], c, TimeAxis::IDENTITY, 0) == 1.0)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best.threshold, largest_perfect);
        assert!(best.threshold >= 0.1 && best.threshold < 0.8);
    }

    #[test]
    fn all_zero_scores_return_largest_candidate() {
        let s = vec![0.0; 50];
        let run = ThresholdRun { scores: &s, truth: &[20], eval_len: 50 };
        let best = search_threshold(&[run], TimeAxis::IDENTITY, 5).unwrap();
        assert_eq!(best, ThresholdChoice { threshold: 0.0, mean_f1: 0.0 });
    }

    #[test]
    fn single_spike_threshold_below_spike() {
        let mut s = vec![0.05; 60];
        s[24] = 0.7;
        let run = ThresholdRun { scores: &s, truth: &[25], eval_len: 60 };
        let best = search_threshold(&[run], TimeAxis::IDENTITY, 2).unwrap();
        assert!(best.threshold < 0.7);
        assert_eq!(best.mean_f1, 1.0);
        assert!(search_threshold(&[], TimeAxis::IDENTITY, 2).is_err());
    }
}
