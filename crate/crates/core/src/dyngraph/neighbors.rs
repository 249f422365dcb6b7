use rayon::prelude::*;

use super::trace::AgentTrace;

/// `N_j = {i != j : |p_i - p_j| <= delta}` for every agent, each list sorted.
///
/// Uses a uniform hash grid with cell size `delta`, so only the 3x3 block of
/// cells around an agent is scanned.
pub fn build_neighborhoods(positions: &[[f64; 2]], delta: f64) -> Vec<Vec<usize>> {
    assert!(delta > 0.0, "neighborhood radius must be positive");
    let n = positions.len();
    if n == 0 {
        return Vec::new();
    }
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in positions {
        min_x = min_x.min(p[0]);
        min_y = min_y.min(p[1]);
        max_x = max_x.max(p[0]);
        max_y = max_y.max(p[1]);
    }
    let cols = ((max_x - min_x) / delta).floor() as usize + 1;
    let rows = ((max_y - min_y) / delta).floor() as usize + 1;
    let cell_of = |p: &[f64; 2]| {
        let cx = (((p[0] - min_x) / delta).floor() as usize).min(cols - 1);
        let cy = (((p[1] - min_y) / delta).floor() as usize).min(rows - 1);
        (cx, cy)
    };
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); cols * rows];
    for (i, p) in positions.iter().enumerate() {
        let (cx, cy) = cell_of(p);
        buckets[cy * cols + cx].push(i);
    }
    let d2 = delta * delta;
    (0..n)
        .map(|j| {
            let pj = positions[j];
            let (cx, cy) = cell_of(&pj);
            let mut out = Vec::new();
            for y in cy.saturating_sub(1)..=(cy + 1).min(rows - 1) {
                for x in cx.saturating_sub(1)..=(cx + 1).min(cols - 1) {
                    for &i in &buckets[y * cols + x] {
                        if i == j {
                            continue;
                        }
                        let dx = positions[i][0] - pj[0];
                        let dy = positions[i][1] - pj[1];
                        if dx * dx + dy * dy <= d2 {
                            out.push(i);
                        }
                    }
                }
            }
            out.sort_unstable();
            out
        })
        .collect()
}

/// Time-indexed neighborhoods over a fixed node set.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicGraph {
    pub delta: f64,
    pub neighborhoods: Vec<Vec<Vec<usize>>>,
}

impl DynamicGraph {
    pub fn build(trace: &AgentTrace, delta: f64) -> Self {
        let neighborhoods = trace
            .steps
            .par_iter()
            .map(|agents| {
                let pos: Vec<[f64; 2]> = agents.iter().map(|s| [s[0], s[1]]).collect();
                build_neighborhoods(&pos, delta)
            })
            .collect();
        DynamicGraph { delta, neighborhoods }
    }

    pub fn len(&self) -> usize {
        self.neighborhoods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighborhoods.is_empty()
    }

    pub fn at(&self, t: usize) -> &[Vec<usize>] {
        &self.neighborhoods[t]
    }

    /// Number of undirected edges at step `t`.
    pub fn edge_count(&self, t: usize) -> usize {
        self.neighborhoods[t].iter().map(Vec::len).sum::<usize>() / 2
    }
}
