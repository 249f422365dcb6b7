use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Change points over a series of length `len`, inducing the segments
/// `[0, p1), [p1, p2), ..., [pk, len)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub len: usize,
    pub points: Vec<usize>,
}

impl Segmentation {
    pub fn new(len: usize, points: Vec<usize>) -> Result<Self> {
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InputShape("change points must be strictly increasing".into()));
        }
        if points.iter().any(|&p| p == 0 || p >= len) {
            return Err(Error::InputShape(format!("change points must lie in (0, {len})")));
        }
        Ok(Segmentation { len, points })
    }

    /// Builds a segmentation from arbitrary points, dropping duplicates and
    /// anything outside `(0, len)`.
    pub fn from_unsorted(len: usize, mut points: Vec<usize>) -> Self {
        points.sort_unstable();
        points.dedup();
        points.retain(|&p| p > 0 && p < len);
        Segmentation { len, points }
    }

    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(self.points.len() + 2);
        edges.push(0);
        edges.extend(&self.points);
        edges.push(self.len);
        edges.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub tp: usize,
    pub fp: usize,
    pub precision: f64,
    /// `None` when there are no true change points.
    pub recall: Option<f64>,
    pub f1: f64,
}

/// A true point counts once if any detection lies within `theta` of it; a
/// detection is a false positive if no true point lies within `theta`.
pub fn f1_at_tolerance(truth: &[usize], detected: &[usize], theta: usize) -> F1Report {
    let near = |a: usize, b: usize| a.abs_diff(b) <= theta;
    let tp = truth.iter().filter(|&&t| detected.iter().any(|&d| near(t, d))).count();
    let fp = detected.iter().filter(|&&d| !truth.iter().any(|&t| near(t, d))).count();
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = (!truth.is_empty()).then(|| tp as f64 / truth.len() as f64);
    let f1 = match recall {
        Some(r) if precision + r > 0.0 => 2.0 * precision * r / (precision + r),
        _ => 0.0,
    };
    F1Report { tp, fp, precision, recall, f1 }
}

fn jaccard(a: (usize, usize), b: (usize, usize)) -> f64 {
    let inter = a.1.min(b.1).saturating_sub(a.0.max(b.0));
    let union = (a.1 - a.0) + (b.1 - b.0) - inter;
    inter as f64 / union as f64
}

/// `(1/T) * sum over true segments of |I| * max_J jaccard(I, J)`.
pub fn covering(truth: &Segmentation, detected: &Segmentation) -> Result<f64> {
    if truth.len != detected.len {
        return Err(Error::InputShape(format!(
            "segmentations cover {} and {} steps",
            truth.len, detected.len
        )));
    }
    if truth.len == 0 {
        return Ok(1.0);
    }
    let det = detected.segments();
    let total: f64 = truth
        .segments()
        .into_iter()
        .map(|seg| {
            let best = det.iter().map(|&d| jaccard(seg, d)).fold(0.0, f64::max);
            (seg.1 - seg.0) as f64 * best
        })
        .sum();
    Ok(total / truth.len as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run: String,
    pub truth: Vec<usize>,
    pub detected: Vec<usize>,
    pub tp: usize,
    pub fp: usize,
    pub precision: f64,
    pub recall: Option<f64>,
    pub f1: f64,
    pub covering: f64,
}

impl RunMetrics {
    pub fn evaluate(run: impl Into<String>, len: usize, truth: &[usize], detected: &[usize], theta: usize) -> Result<Self> {
        let t = Segmentation::from_unsorted(len, truth.to_vec());
        let d = Segmentation::from_unsorted(len, detected.to_vec());
        let f = f1_at_tolerance(&t.points, &d.points, theta);
        Ok(RunMetrics {
            run: run.into(),
            covering: covering(&t, &d)?,
            truth: t.points,
            detected: d.points,
            tp: f.tp,
            fp: f.fp,
            precision: f.precision,
            recall: f.recall,
            f1: f.f1,
        })
    }
}

/// Mean and population standard deviation; `(0, 0)` for no values.
pub fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Per-method evaluation over a set of test runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub dataset: String,
    pub theta: usize,
    pub threshold: f64,
    pub runs: Vec<RunMetrics>,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub covering_mean: f64,
    pub covering_std: f64,
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

impl MetricsReport {
    pub fn new(method: impl Into<String>, dataset: impl Into<String>, theta: usize, threshold: f64, runs: Vec<RunMetrics>) -> Self {
        let (f1_mean, f1_std) = mean_std(runs.iter().map(|r| r.f1));
        let (covering_mean, covering_std) = mean_std(runs.iter().map(|r| r.covering));
        MetricsReport {
            method: method.into(),
            dataset: dataset.into(),
            theta,
            threshold,
            runs,
            f1_mean,
            f1_std,
            covering_mean,
            covering_std,
            metadata: serde_json::Map::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn f1_examples() {
        let r = f1_at_tolerance(&[100, 300], &[100, 300], 20);
        assert_eq!((r.precision, r.recall, r.f1), (1.0, Some(1.0), 1.0));

        let r = f1_at_tolerance(&[100, 300], &[105, 290, 500], 20);
        assert_eq!((r.tp, r.fp), (2, 1));
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.recall, Some(1.0));
        assert!((r.f1 - 0.8).abs() < 1e-15);

        let r = f1_at_tolerance(&[100, 300], &[], 20);
        assert_eq!((r.tp, r.fp, r.f1), (0, 0, 0.0));

        let r = f1_at_tolerance(&[], &[4], 20);
        assert_eq!(r.recall, None);
        assert_eq!(r.f1, 0.0);
    }

    #[test]
    fn several_detections_near_one_truth_count_once() {
        let r = f1_at_tolerance(&[50], &[45, 50, 55], 20);
        assert_eq!((r.tp, r.fp), (1, 0));
        assert_eq!(r.f1, 1.0);
    }

    #[test]
    fn covering_examples() {
        // Truth {[1,5], [6,10]} in 1-based closed form is points {5} here.
        let truth = Segmentation::new(10, vec![5]).unwrap();
        let whole = Segmentation::new(10, vec![]).unwrap();
        assert!((covering(&truth, &whole).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(covering(&truth, &truth).unwrap(), 1.0);

        let every = Segmentation::new(10, (1..10).collect()).unwrap();
        assert!((covering(&whole, &every).unwrap() - 0.1).abs() < 1e-15);

        assert!(covering(&truth, &Segmentation::new(11, vec![]).unwrap()).is_err());
        assert!(Segmentation::new(10, vec![5, 5]).is_err());
        assert!(Segmentation::new(10, vec![0]).is_err());
    }

    /// Higher F1 with lower covering than a reference, both by fragmenting
    /// (more detections, more recall) and by missing points (fewer, longer
    /// segments, higher precision).
    #[test]
    fn f1_and_covering_can_disagree() {
        let len = 300;
        let truth = vec![100, 200];
        let theta = 20;
        let eval = |det: Vec<usize>| {
            let f = f1_at_tolerance(&truth, &det, theta).f1;
            let c = covering(
                &Segmentation::new(len, truth.clone()).unwrap(),
                &Segmentation::from_unsorted(len, det),
            )
            .unwrap();
            (f, c)
        };
        // Reference: one exact hit and one detection just outside tolerance.
        let reference = eval(vec![100, 230]);
        // Every detection is within tolerance but the segments are chopped up.
        let fragmented = eval(vec![81, 90, 100, 110, 119, 181, 190, 200, 210, 219]);
        assert!(fragmented.0 > reference.0 && fragmented.1 < reference.1, "{reference:?} {fragmented:?}");
        let sparse = eval(vec![119]);
        assert!(sparse.0 > reference.0 && sparse.1 < reference.1, "{reference:?} {sparse:?}");
    }

    proptest! {
        #[test]
        fn covering_bounded_and_one_iff_identical(
            len in 2usize..60,
            a in prop::collection::vec(1usize..60, 0..6),
            b in prop::collection::vec(1usize..60, 0..6),
        ) {
            let sa = Segmentation::from_unsorted(len, a);
            let sb = Segmentation::from_unsorted(len, b);
            let c = covering(&sa, &sb).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&c));
            prop_assert_eq!((c - 1.0).abs() < 1e-12, sa == sb);
        }

        #[test]
        fn f1_is_monotone_in_theta(
            truth in prop::collection::btree_set(0usize..200, 1..8),
            det in prop::collection::btree_set(0usize..200, 0..8),
            theta in 0usize..30,
        ) {
            let truth: Vec<usize> = truth.into_iter().collect();
            let det: Vec<usize> = det.into_iter().collect();
            let lo = f1_at_tolerance(&truth, &det, theta).f1;
            let hi = f1_at_tolerance(&truth, &det, theta + 1).f1;
            prop_assert!(hi >= lo - 1e-15);
        }
    }
}
