use ndarray::{s, Array2, Array3, ArrayView2};

use super::network::Encoder;
use crate::error::{Error, Result};
use crate::tensorkit::softmax_in_place;

/// Ring buffer of the last `w` steps of spatial outputs, temporal q/k/v, and
/// the unnormalized temporal attention scores of every node.
///
/// Advancing computes only the new step's spatial output and the new row and
/// column of each score matrix.
#[derive(Clone, Debug)]
pub struct WindowCache {
    w: usize,
    n: usize,
    dim: usize,
    /// Slot of the oldest stored step.
    head: usize,
    filled: usize,
    /// Step index of the newest stored step.
    last: Option<usize>,
    z: Array3<f64>,
    tq: Array3<f64>,
    tk: Array3<f64>,
    tv: Array3<f64>,
    /// `n × w × w` scores indexed by ring slot.
    scores: Array3<f64>,
}

impl WindowCache {
    pub fn new(n_nodes: usize, w: usize, dim: usize) -> Result<Self> {
        if w == 0 {
            return Err(Error::Config("window length must be at least 1".into()));
        }
        Ok(WindowCache {
            w,
            n: n_nodes,
            dim,
            head: 0,
            filled: 0,
            last: None,
            z: Array3::zeros((w, n_nodes, dim)),
            tq: Array3::zeros((w, n_nodes, dim)),
            tk: Array3::zeros((w, n_nodes, dim)),
            tv: Array3::zeros((w, n_nodes, dim)),
            scores: Array3::zeros((n_nodes, w, w)),
        })
    }

    pub fn is_full(&self) -> bool {
        self.filled == self.w
    }

    /// Step index of the newest stored step.
    pub fn last_step(&self) -> Option<usize> {
        self.last
    }

    /// Adds step `t`, which must directly follow the newest stored step,
    /// evicting the oldest once the window is full.
    pub fn push(&mut self, encoder: &Encoder, t: usize, x: ArrayView2<f64>, neighbors: &[Vec<usize>]) -> Result<()> {
        if let Some(last) = self.last {
            if t != last + 1 {
                return Err(Error::CacheInvalid { expected: last + 1, got: t });
            }
        }
        if x.nrows() != self.n || neighbors.len() != self.n || encoder.dim() != self.dim {
            return Err(Error::InputShape(format!(
                "cache holds {} nodes of width {}, got {} inputs for width {}",
                self.n,
                self.dim,
                x.nrows(),
                encoder.dim()
            )));
        }
        let slot = if self.filled < self.w {
            self.filled += 1;
            (self.head + self.filled - 1) % self.w
        } else {
            let s = self.head;
            self.head = (self.head + 1) % self.w;
            s
        };
        let z = encoder.spatial(x, neighbors);
        let tq = encoder.t_query.forward_rows(z.view());
        let tk = encoder.t_key.forward_rows(z.view());
        let tv = encoder.t_value.forward_rows(z.view());
        let scale = 1.0 / (self.dim as f64).sqrt();
        let slots = self.slots();
        for j in 0..self.n {
            for &c in &slots {
                let (qc, kc) = if c == slot {
                    (tq.row(j), tk.row(j))
                } else {
                    (self.tq.slice(s![c, j, ..]), self.tk.slice(s![c, j, ..]))
                };
                self.scores[[j, slot, c]] = tq.row(j).dot(&kc) * scale;
                self.scores[[j, c, slot]] = qc.dot(&tk.row(j)) * scale;
            }
        }
        self.z.slice_mut(s![slot, .., ..]).assign(&z);
        self.tq.slice_mut(s![slot, .., ..]).assign(&tq);
        self.tk.slice_mut(s![slot, .., ..]).assign(&tk);
        self.tv.slice_mut(s![slot, .., ..]).assign(&tv);
        self.last = Some(t);
        Ok(())
    }

    /// Pushes step `t` and, once the window is full, returns `n × w × D`
    /// representations for the window ending at `t`.
    pub fn advance(&mut self, encoder: &Encoder, t: usize, x: ArrayView2<f64>, neighbors: &[Vec<usize>]) -> Result<Option<Array3<f64>>> {
        self.push(encoder, t, x, neighbors)?;
        Ok(self.is_full().then(|| self.representations()))
    }

    fn slots(&self) -> Vec<usize> {
        (0..self.filled).map(|k| (self.head + k) % self.w).collect()
    }

    /// Representations of the stored steps, oldest first.
    pub fn representations(&self) -> Array3<f64> {
        let slots = self.slots();
        let f = slots.len();
        let d = self.dim;
        let mut h = Array3::<f64>::zeros((self.n, f, d));
        let out = h.as_slice_mut().expect("fresh array");
        let scores = self.scores.as_slice().expect("standard layout");
        let tv = self.tv.as_slice().expect("standard layout");
        let mut a = vec![0.0; f];
        for j in 0..self.n {
            let node_scores = &scores[j * self.w * self.w..(j + 1) * self.w * self.w];
            for (r, &sr) in slots.iter().enumerate() {
                let row = &node_scores[sr * self.w..(sr + 1) * self.w];
                for (ac, &sc) in a.iter_mut().zip(&slots) {
                    *ac = row[sc];
                }
                softmax_in_place(&mut a);
                let dst = &mut out[(j * f + r) * d..(j * f + r + 1) * d];
                for (&p, &sc) in a.iter().zip(&slots) {
                    let v = &tv[(sc * self.n + j) * d..(sc * self.n + j + 1) * d];
                    for (o, &x) in dst.iter_mut().zip(v) {
                        *o += p * x;
                    }
                }
            }
        }
        h
    }

    /// Spatial outputs of the stored steps for node `j`, oldest first.
    pub fn spatial_outputs(&self, j: usize) -> Array2<f64> {
        let slots = self.slots();
        let mut out = Array2::zeros((slots.len(), self.dim));
        for (r, &s) in slots.iter().enumerate() {
            out.row_mut(r).assign(&self.z.slice(s![s, j, ..]));
        }
        out
    }
}
