use crate::error::{Error, Result};

/// Exact least-squares segmentation with exactly `k` breakpoints.
///
/// Dynamic programming over prefix sums: `cost[s][e]` is the squared
/// deviation of `series[s..e]` from its mean, and `best[m][e]` the minimum
/// total cost of splitting `series[..e]` into `m + 1` segments. Returns the
/// first index of every segment after the first, in increasing order.
pub fn label_offline(series: &[f64], k: usize) -> Result<Vec<usize>> {
    let t = series.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    if t <= k {
        return Err(Error::Infeasible(format!(
            "{k} breakpoints need at least {} points, series has {t}",
            k + 1
        )));
    }
    let mut s1 = vec![0.0; t + 1];
    let mut s2 = vec![0.0; t + 1];
    for (i, &x) in series.iter().enumerate() {
        s1[i + 1] = s1[i] + x;
        s2[i + 1] = s2[i] + x * x;
    }
    let cost = |a: usize, b: usize| {
        let n = (b - a) as f64;
        let sum = s1[b] - s1[a];
        (s2[b] - s2[a] - sum * sum / n).max(0.0)
    };

    // best[m][e]: m + 1 segments covering [0, e); arg[m][e]: start of the last one.
    let mut best = vec![vec![f64::INFINITY; t + 1]; k + 1];
    let mut arg = vec![vec![0usize; t + 1]; k + 1];
    for e in 1..=t {
        best[0][e] = cost(0, e);
    }
    for m in 1..=k {
        for e in (m + 1)..=t {
            let mut b = f64::INFINITY;
            let mut a = 0;
            for s in m..e {
                let c = best[m - 1][s] + cost(s, e);
                if c < b {
                    b = c;
                    a = s;
                }
            }
            best[m][e] = b;
            arg[m][e] = a;
        }
    }
    let mut points = Vec::with_capacity(k);
    let mut e = t;
    for m in (1..=k).rev() {
        let s = arg[m][e];
        points.push(s);
        e = s;
    }
    points.reverse();
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_without_breaks() {
        assert!(label_offline(&[3.0; 20], 0).unwrap().is_empty());
    }

    #[test]
    fn single_step() {
        let mut s = vec![0.0; 50];
        s.extend(vec![5.0; 50]);
        assert_eq!(label_offline(&s, 1).unwrap(), vec![50]);
    }

    #[test]
    fn two_planted_jumps() {
        let s: Vec<f64> = (0..30).map(|i| if i < 7 { 1.0 } else if i < 19 { -2.0 } else { 4.0 }).collect();
        assert_eq!(label_offline(&s, 2).unwrap(), vec![7, 19]);
    }

    #[test]
    fn infeasible_k() {
        assert!(matches!(label_offline(&[1.0, 2.0], 2), Err(Error::Infeasible(_))));
        assert_eq!(label_offline(&[1.0, 2.0, 3.0], 2).unwrap(), vec![1, 2]);
    }

    /// Exhaustive search over all breakpoint sets on a small instance.
    #[test]
    fn matches_exhaustive_search() {
        let s = [0.3, 0.1, 2.2, 2.0, 2.4, -1.0, -0.8, 0.2, 0.1, 3.0];
        let sse = |seg: &[f64]| {
            let m = seg.iter().sum::<f64>() / seg.len() as f64;
            seg.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
        };
        for k in 1..=3 {
            let mut best = (f64::INFINITY, Vec::new());
            let n = s.len();
            let mut combo = vec![0usize; k];
            fn rec(pos: usize, start: usize, n: usize, combo: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
                if pos == combo.len() {
                    out.push(combo.clone());
                    return;
                }
                for p in start..n {
                    combo[pos] = p;
                    rec(pos + 1, p + 1, n, combo, out);
                }
            }
            let mut all = Vec::new();
            rec(0, 1, n, &mut combo, &mut all);
            for pts in all {
                let mut edges = vec![0];
                edges.extend(&pts);
                edges.push(n);
                let c: f64 = edges.windows(2).map(|w| sse(&s[w[0]..w[1]])).sum();
                if c < best.0 - 1e-12 {
                    best = (c, pts);
                }
            }
            assert_eq!(label_offline(&s, k).unwrap(), best.1, "k = {k}");
        }
    }
}
