use super::trace::Bounds;
use crate::error::{Error, Result};

/// `n x n` grid of half-open cells over the world rectangle, with
/// bidirectional 4-neighbor adjacency. Region id is `row * n + col`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionGrid {
    pub bounds: Bounds,
    pub n: usize,
    /// Sorted neighbor ids per region.
    pub adjacency: Vec<Vec<usize>>,
    /// Regions still in use; every cell is active unless pruned.
    pub active: Vec<bool>,
}

pub fn build_region_grid(bounds: Bounds, n: usize) -> RegionGrid {
    assert!(n >= 1, "grid side count must be at least 1");
    assert!(bounds.width() > 0.0 && bounds.height() > 0.0, "degenerate world bounds");
    let mut adjacency = vec![Vec::new(); n * n];
    for row in 0..n {
        for col in 0..n {
            let id = row * n + col;
            if row > 0 {
                adjacency[id].push(id - n);
            }
            if col > 0 {
                adjacency[id].push(id - 1);
            }
            if col + 1 < n {
                adjacency[id].push(id + 1);
            }
            if row + 1 < n {
                adjacency[id].push(id + n);
            }
        }
    }
    RegionGrid {
        bounds,
        n,
        adjacency,
        active: vec![true; n * n],
    }
}

impl RegionGrid {
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn undirected_edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Extent of region `id` as `(lo, hi)` corners.
    pub fn cell_extent(&self, id: usize) -> ([f64; 2], [f64; 2]) {
        let (row, col) = (id / self.n, id % self.n);
        let cw = self.bounds.width() / self.n as f64;
        let ch = self.bounds.height() / self.n as f64;
        let lo = [self.bounds.min[0] + col as f64 * cw, self.bounds.min[1] + row as f64 * ch];
        (lo, [lo[0] + cw, lo[1] + ch])
    }

    /// Deactivates regions for which `keep` is false and drops their edges.
    /// Region ids are unchanged.
    pub fn prune(&mut self, keep: impl Fn(usize) -> bool) {
        for id in 0..self.len() {
            self.active[id] = keep(id);
        }
        let active = self.active.clone();
        for (id, adj) in self.adjacency.iter_mut().enumerate() {
            if !active[id] {
                adj.clear();
            } else {
                adj.retain(|&m| active[m]);
            }
        }
    }

    fn axis_index(&self, v: f64, lo: f64, hi: f64) -> Option<usize> {
        if !(lo..=hi).contains(&v) {
            return None;
        }
        if v == hi {
            return Some(self.n - 1);
        }
        let k = ((v - lo) * self.n as f64 / (hi - lo)).floor() as usize;
        Some(k.min(self.n - 1))
    }
}

/// Region containing `(x, y)`. Cells are `[lo, hi)` except the last row and
/// column, which are closed so the grid covers the bounds exactly.
pub fn assign_region(position: [f64; 2], grid: &RegionGrid) -> Result<usize> {
    let b = &grid.bounds;
    let col = grid.axis_index(position[0], b.min[0], b.max[0]);
    let row = grid.axis_index(position[1], b.min[1], b.max[1]);
    match (row, col) {
        (Some(r), Some(c)) => Ok(r * grid.n + c),
        _ => Err(Error::Invariant(format!(
            "position ({}, {}) outside world bounds",
            position[0], position[1]
        ))),
    }
}
