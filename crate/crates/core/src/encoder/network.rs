use ndarray::{s, Array2, Array3, ArrayView2, ArrayView3, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::tensorkit::{softmax_in_place, Dense, Parameters, TensorMut, TensorRef};

/// Per-step node inputs and neighbor lists for one window, oldest first.
#[derive(Clone, Debug)]
pub struct EncoderWindow<'a> {
    pub inputs: Vec<Array2<f64>>,
    pub neighbors: Vec<&'a [Vec<usize>]>,
}

impl<'a> EncoderWindow<'a> {
    pub fn new(inputs: Vec<Array2<f64>>, neighbors: Vec<&'a [Vec<usize>]>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptySet("window steps"));
        }
        if inputs.len() != neighbors.len() {
            return Err(Error::InputShape(format!(
                "{} input steps but {} neighbor lists",
                inputs.len(),
                neighbors.len()
            )));
        }
        let n = inputs[0].nrows();
        for (x, nb) in inputs.iter().zip(&neighbors) {
            if x.nrows() != n || nb.len() != n {
                return Err(Error::InputShape("node count changes within the window".into()));
            }
            if nb.iter().flatten().any(|&i| i >= n) {
                return Err(Error::InputShape("neighbor index out of range".into()));
            }
        }
        Ok(EncoderWindow { inputs, neighbors })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.inputs[0].nrows()
    }
}

/// Key maps carry no bias: a key bias shifts every score in a softmax row
/// by the same amount and has no effect.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    pub embed: Dense,
    pub query: Dense,
    pub key: Dense,
    pub value: Dense,
    pub t_query: Dense,
    pub t_key: Dense,
    pub t_value: Dense,
}

#[derive(Clone, Debug)]
struct SpatialCache {
    x: Array2<f64>,
    e: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    /// `e` through the value weight, without its bias.
    ve: Array2<f64>,
    alpha: Vec<Vec<f64>>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug)]
pub struct EncoderCache {
    spatial: Vec<SpatialCache>,
    neighbors: Vec<Vec<Vec<usize>>>,
    /// `n * w × D`, node-major.
    z: Array2<f64>,
    tq: Array2<f64>,
    tk: Array2<f64>,
    tv: Array2<f64>,
    /// Row-softmaxed temporal attention, `n × w × w`.
    attn: Array3<f64>,
}

impl Encoder {
    pub fn init<R: Rng + ?Sized>(in_dim: usize, dim: usize, rng: &mut R) -> Self {
        Encoder {
            embed: Dense::init(in_dim, dim, true, rng),
            query: Dense::init(dim, dim, true, rng),
            key: Dense::init(dim, dim, false, rng),
            value: Dense::init(dim, dim, true, rng),
            t_query: Dense::init(dim, dim, true, rng),
            t_key: Dense::init(dim, dim, false, rng),
            t_value: Dense::init(dim, dim, true, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Encoder {
            embed: self.embed.zeros_like(),
            query: self.query.zeros_like(),
            key: self.key.zeros_like(),
            value: self.value.zeros_like(),
            t_query: self.t_query.zeros_like(),
            t_key: self.t_key.zeros_like(),
            t_value: self.t_value.zeros_like(),
        }
    }

    pub fn dim(&self) -> usize {
        self.embed.out_dim()
    }

    pub fn in_dim(&self) -> usize {
        self.embed.in_dim()
    }

    fn scale(&self) -> f64 {
        1.0 / (self.dim() as f64).sqrt()
    }

    /// One spatial attention step for all nodes: `n × in` inputs to `n × D`.
    pub fn spatial(&self, x: ArrayView2<f64>, neighbors: &[Vec<usize>]) -> Array2<f64> {
        self.spatial_cached(x, neighbors).0
    }

    fn spatial_cached(&self, x: ArrayView2<f64>, neighbors: &[Vec<usize>]) -> (Array2<f64>, SpatialCache) {
        let e = self.embed.forward_rows(x);
        let q = self.query.forward_rows(e.view());
        let k = self.key.forward_rows(e.view());
        let ve = e.dot(&self.value.weight.t());
        let scale = self.scale();
        let mut z = e.clone();
        let mut alpha = Vec::with_capacity(neighbors.len());
        for (j, nb) in neighbors.iter().enumerate() {
            if nb.is_empty() {
                alpha.push(Vec::new());
                continue;
            }
            let qj = q.row(j);
            let mut a: Vec<f64> = nb.iter().map(|&i| qj.dot(&k.row(i)) * scale).collect();
            softmax_in_place(&mut a);
            let mut zj = z.row_mut(j);
            zj -= &ve.row(j);
            for (&i, &w) in nb.iter().zip(&a) {
                zj.scaled_add(w, &ve.row(i));
            }
            if let Some(b) = &self.value.bias {
                zj += b;
            }
            alpha.push(a);
        }
        let cache = SpatialCache { x: x.to_owned(), e, q, k, ve, alpha };
        (z, cache)
    }

    fn spatial_backward(&self, c: &SpatialCache, neighbors: &[Vec<usize>], dz: ArrayView2<f64>, grad: &mut Encoder) {
        let scale = self.scale();
        let mut de = dz.to_owned();
        let mut dq = Array2::<f64>::zeros(c.q.raw_dim());
        let mut dk = Array2::<f64>::zeros(c.k.raw_dim());
        let mut dve = Array2::<f64>::zeros(c.ve.raw_dim());
        for (j, nb) in neighbors.iter().enumerate() {
            if nb.is_empty() {
                continue;
            }
            let g = dz.row(j);
            if let Some(b) = grad.value.bias.as_mut() {
                *b += &g;
            }
            {
                let mut r = dve.row_mut(j);
                r -= &g;
            }
            let a = &c.alpha[j];
            let g_vej = g.dot(&c.ve.row(j));
            let da: Vec<f64> = nb.iter().map(|&i| g.dot(&c.ve.row(i)) - g_vej).collect();
            let mean: f64 = a.iter().zip(&da).map(|(a, d)| a * d).sum();
            for ((&i, &w), &d) in nb.iter().zip(a).zip(&da) {
                dve.row_mut(i).scaled_add(w, &g);
                let ds = w * (d - mean) * scale;
                dq.row_mut(j).scaled_add(ds, &c.k.row(i));
                dk.row_mut(i).scaled_add(ds, &c.q.row(j));
            }
        }
        de += &self.query.backward_rows(c.e.view(), dq.view(), &mut grad.query);
        de += &self.key.backward_rows(c.e.view(), dk.view(), &mut grad.key);
        grad.value.weight += &dve.t().dot(&c.e);
        de += &dve.dot(&self.value.weight);
        self.embed.accumulate_grad(c.x.view(), de.view(), &mut grad.embed);
    }

    /// Temporal attention over one node's `w × D` spatial outputs.
    pub fn temporal(&self, z: ArrayView2<f64>) -> Array2<f64> {
        let q = self.t_query.forward_rows(z);
        let k = self.t_key.forward_rows(z);
        let v = self.t_value.forward_rows(z);
        let mut s = q.dot(&k.t()) * self.scale();
        for mut row in s.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("row-major"));
        }
        s.dot(&v)
    }

    /// Representations for every node and window step, `n × w × D`.
    pub fn forward(&self, window: &EncoderWindow) -> Array3<f64> {
        self.forward_cached(window).0
    }

    pub fn forward_cached(&self, window: &EncoderWindow) -> (Array3<f64>, EncoderCache) {
        let n = window.n_nodes();
        let w = window.len();
        let d = self.dim();
        let mut z3 = Array3::<f64>::zeros((n, w, d));
        let mut spatial = Vec::with_capacity(w);
        for (t, (x, nb)) in window.inputs.iter().zip(&window.neighbors).enumerate() {
            let (zt, c) = self.spatial_cached(x.view(), nb);
            z3.slice_mut(s![.., t, ..]).assign(&zt);
            spatial.push(c);
        }
        let z = z3.into_shape_with_order((n * w, d)).expect("contiguous");
        let tq = self.t_query.forward_rows(z.view());
        let tk = self.t_key.forward_rows(z.view());
        let tv = self.t_value.forward_rows(z.view());
        let scale = self.scale();
        let mut attn = Array3::<f64>::zeros((n, w, w));
        let mut h = Array3::<f64>::zeros((n, w, d));
        for j in 0..n {
            let rows = s![j * w..(j + 1) * w, ..];
            let (qj, kj, vj) = (tq.slice(rows), tk.slice(rows), tv.slice(rows));
            let mut a = qj.dot(&kj.t()) * scale;
            for mut row in a.rows_mut() {
                softmax_in_place(row.as_slice_mut().expect("row-major"));
            }
            h.index_axis_mut(Axis(0), j).assign(&a.dot(&vj));
            attn.index_axis_mut(Axis(0), j).assign(&a);
        }
        let neighbors = window.neighbors.iter().map(|nb| nb.to_vec()).collect();
        (h, EncoderCache { spatial, neighbors, z, tq, tk, tv, attn })
    }

    /// Accumulates parameter gradients given `dL/dh` of shape `n × w × D`.
    pub fn backward(&self, cache: &EncoderCache, dh: ArrayView3<f64>, grad: &mut Encoder) {
        let (n, w, d) = dh.dim();
        let scale = self.scale();
        let mut dtq = Array2::<f64>::zeros((n * w, d));
        let mut dtk = Array2::<f64>::zeros((n * w, d));
        let mut dtv = Array2::<f64>::zeros((n * w, d));
        for j in 0..n {
            let rows = s![j * w..(j + 1) * w, ..];
            let a = cache.attn.index_axis(Axis(0), j);
            let g = dh.index_axis(Axis(0), j);
            dtv.slice_mut(rows).assign(&a.t().dot(&g));
            let da = g.dot(&cache.tv.slice(rows).t());
            let mut ds = &a * &da;
            for (mut row, arow) in ds.rows_mut().into_iter().zip(a.rows()) {
                let total = row.sum();
                row.zip_mut_with(&arow, |x, &p| *x -= p * total);
            }
            ds *= scale;
            dtq.slice_mut(rows).assign(&ds.dot(&cache.tk.slice(rows)));
            dtk.slice_mut(rows).assign(&ds.t().dot(&cache.tq.slice(rows)));
        }
        let mut dz = self.t_query.backward_rows(cache.z.view(), dtq.view(), &mut grad.t_query);
        dz += &self.t_key.backward_rows(cache.z.view(), dtk.view(), &mut grad.t_key);
        dz += &self.t_value.backward_rows(cache.z.view(), dtv.view(), &mut grad.t_value);
        let dz3 = dz.into_shape_with_order((n, w, d)).expect("contiguous");
        for (t, c) in cache.spatial.iter().enumerate() {
            let dzt = dz3.slice(s![.., t, ..]);
            self.spatial_backward(c, &cache.neighbors[t], dzt, grad);
        }
    }
}

impl Parameters for Encoder {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        self.embed.collect(&format!("{prefix}.embed"), out);
        self.query.collect(&format!("{prefix}.query"), out);
        self.key.collect(&format!("{prefix}.key"), out);
        self.value.collect(&format!("{prefix}.value"), out);
        self.t_query.collect(&format!("{prefix}.t_query"), out);
        self.t_key.collect(&format!("{prefix}.t_key"), out);
        self.t_value.collect(&format!("{prefix}.t_value"), out);
    }

    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a>>) {
        self.embed.collect_mut(&format!("{prefix}.embed"), out);
        self.query.collect_mut(&format!("{prefix}.query"), out);
        self.key.collect_mut(&format!("{prefix}.key"), out);
        self.value.collect_mut(&format!("{prefix}.value"), out);
        self.t_query.collect_mut(&format!("{prefix}.t_query"), out);
        self.t_key.collect_mut(&format!("{prefix}.t_key"), out);
        self.t_value.collect_mut(&format!("{prefix}.t_value"), out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorkit::{assign_flat, flatten, grad_check};
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_encoder(d: usize) -> Encoder {
        let id = || Dense::identity(d, true);
        Encoder {
            embed: id(),
            query: id(),
            key: id(),
            value: id(),
            t_query: id(),
            t_key: id(),
            t_value: id(),
        }
    }

    fn random_window(n: usize, w: usize, in_dim: usize, rng: &mut ChaCha8Rng) -> (Vec<Array2<f64>>, Vec<Vec<Vec<usize>>>) {
        let inputs = (0..w)
            .map(|_| Array2::from_shape_fn((n, in_dim), |_| rng.random_range(-1.0..1.0)))
            .collect();
        let nbrs = (0..w)
            .map(|_| {
                (0..n)
                    .map(|j| (0..n).filter(|&i| i != j && rng.random_bool(0.5)).collect())
                    .collect()
            })
            .collect();
        (inputs, nbrs)
    }

    #[test]
    fn spatial_examples() {
        let enc = identity_encoder(2);
        let x = array![[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]];
        // Empty neighborhood: z = e.
        let z = enc.spatial(x.view(), &[vec![], vec![], vec![]]);
        assert_eq!(z, x);
        // Singleton: z_j = e_j + (e_i - e_j) = e_i.
        let z = enc.spatial(x.view(), &[vec![1], vec![], vec![]]);
        assert_eq!(z.row(0).to_vec(), vec![0.0, 1.0]);
        // Two neighbors by hand: a_i = q_0 . k_i / sqrt 2 with q_0 = (1, 0).
        let z = enc.spatial(x.view(), &[vec![1, 2], vec![], vec![]]);
        let (a1, a2) = (0.0f64, 2.0 / 2f64.sqrt());
        let p2 = a2.exp() / (a1.exp() + a2.exp());
        let p1 = 1.0 - p2;
        let expect = [1.0 + p1 * -1.0 + p2 * 1.0, p1 * 1.0 + p2 * 2.0];
        for (g, e) in z.row(0).iter().zip(expect) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn temporal_examples() {
        let enc = identity_encoder(2);
        let z = array![[0.3, -1.2]];
        assert_eq!(enc.temporal(z.view()), z);
        let same = array![[0.5, 1.0], [0.5, 1.0], [0.5, 1.0]];
        let h = enc.temporal(same.view());
        for r in h.rows() {
            assert!((r[0] - 0.5).abs() < 1e-15 && (r[1] - 1.0).abs() < 1e-15);
        }
        // w = 2 by hand: rows attend with weights from q.k / sqrt 2.
        let z = array![[1.0, 0.0], [0.0, 2.0]];
        let h = enc.temporal(z.view());
        let r = 2f64.sqrt();
        let p = |a: f64, b: f64| a.exp() / (a.exp() + b.exp());
        let p00 = p(1.0 / r, 0.0);
        let p10 = p(0.0, 4.0 / r);
        assert!((h[[0, 0]] - p00).abs() < 1e-14);
        assert!((h[[0, 1]] - 2.0 * (1.0 - p00)).abs() < 1e-14);
        assert!((h[[1, 0]] - p10).abs() < 1e-14);
        assert!((h[[1, 1]] - 2.0 * (1.0 - p10)).abs() < 1e-14);
    }

    #[test]
    fn isolated_node_single_step_is_value_of_embedding() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let enc = Encoder::init(4, 6, &mut rng);
        let x = array![[0.1, -0.4, 0.9, 0.2]];
        let nb = vec![vec![]];
        let w = EncoderWindow::new(vec![x.clone()], vec![&nb]).unwrap();
        let h = enc.forward(&w);
        let e = enc.embed.forward_rows(x.view());
        let v = enc.t_value.forward_rows(e.view());
        for (a, b) in h.iter().zip(v.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_window_gives_constant_representations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let enc = Encoder::init(4, 5, &mut rng);
        let x = Array2::from_shape_fn((3, 4), |_| rng.random_range(-1.0..1.0));
        let nb = vec![vec![1], vec![0, 2], vec![]];
        let w = EncoderWindow::new(vec![x.clone(); 4], vec![&nb; 4]).unwrap();
        let h = enc.forward(&w);
        for j in 0..3 {
            for t in 1..4 {
                for c in 0..5 {
                    assert!((h[[j, t, c]] - h[[j, 0, c]]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn window_validation() {
        let x = Array2::zeros((2, 1));
        let bad = vec![vec![5], vec![]];
        assert!(EncoderWindow::new(vec![x.clone()], vec![&bad]).is_err());
        assert!(EncoderWindow::new(vec![], vec![]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let enc = Encoder::init(4, 5, &mut rng);
        let (inputs, nbrs) = random_window(4, 3, 4, &mut rng);
        let window = EncoderWindow::new(inputs, nbrs.iter().map(|v| v.as_slice()).collect()).unwrap();
        let coef = Array3::from_shape_fn((4, 3, 5), |_| rng.random_range(-1.0..1.0));
        let loss = |flat: &[f64]| {
            let mut p = enc.clone();
            assign_flat(&mut p, flat);
            let (h, cache) = p.forward_cached(&window);
            let l = (&h * &coef).sum() + 0.5 * h.mapv(|v| v * v).sum();
            let dh = &coef + &h;
            let mut g = p.zeros_like();
            p.backward(&cache, dh.view(), &mut g);
            (l, flatten(&g))
        };
        let err = grad_check(loss, &flatten(&enc), 1e-5);
        assert!(err < 1e-5, "relative error {err}");
    }

    proptest! {
        /// With attention weights held fixed, shifting every embedding by a
        /// common vector leaves the aggregated value term unchanged.
        #[test]
        fn value_term_is_shift_invariant(
            e in prop::collection::vec(-2.0f64..2.0, 9),
            alpha in prop::collection::vec(0.01f64..1.0, 2),
            shift in prop::collection::vec(-3.0f64..3.0, 3),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let value = Dense::init(3, 3, true, &mut rng);
            let total: f64 = alpha.iter().sum();
            let alpha: Vec<f64> = alpha.iter().map(|a| a / total).collect();
            let e = Array2::from_shape_vec((3, 3), e).unwrap();
            let shifted = &e + &ndarray::Array1::from(shift);
            let term = |e: &Array2<f64>| {
                let mut acc = ndarray::Array1::<f64>::zeros(3);
                for (k, &a) in alpha.iter().enumerate() {
                    let diff = &e.row(k + 1) - &e.row(0);
                    acc.scaled_add(a, &value.forward_one(diff.view()));
                }
                acc
            };
            let (a, b) = (term(&e), term(&shifted));
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
