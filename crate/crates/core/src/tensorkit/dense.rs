use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::optim::{Parameters, TensorMut, TensorRef};
use crate::error::{Error, Result};

/// Affine layer `y = W x + b` with `W` stored as `out_dim × in_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Option<Array1<f64>>,
}

impl Dense {
    /// Uniform fan-in initialisation, `U(-1/sqrt(in), 1/sqrt(in))`.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, bias: bool, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weight = Array2::from_shape_fn((out_dim, in_dim), |_| rng.random_range(-bound..bound));
        let bias = bias.then(|| Array1::from_shape_fn(out_dim, |_| rng.random_range(-bound..bound)));
        Dense { weight, bias }
    }

    pub fn identity(dim: usize, bias: bool) -> Self {
        Dense {
            weight: Array2::eye(dim),
            bias: bias.then(|| Array1::zeros(dim)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Dense {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: self.bias.as_ref().map(|b| Array1::zeros(b.len())),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    /// Row-batched forward pass: each row of `x` is one input.
    pub fn forward_rows(&self, x: ArrayView2<f64>) -> Array2<f64> {
        debug_assert_eq!(x.ncols(), self.in_dim());
        let mut y = x.dot(&self.weight.t());
        if let Some(b) = &self.bias {
            y += b;
        }
        y
    }

    pub fn forward_one(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let mut y = self.weight.dot(&x);
        if let Some(b) = &self.bias {
            y += b;
        }
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward_rows(&self, x: ArrayView2<f64>, dy: ArrayView2<f64>, grad: &mut Dense) -> Array2<f64> {
        self.accumulate_grad(x, dy, grad);
        dy.dot(&self.weight)
    }

    /// Parameter gradients only, for layers whose input is not differentiated.
    pub fn accumulate_grad(&self, x: ArrayView2<f64>, dy: ArrayView2<f64>, grad: &mut Dense) {
        grad.weight += &dy.t().dot(&x);
        if let Some(gb) = grad.bias.as_mut() {
            *gb += &dy.sum_axis(Axis(0));
        }
    }
}

/// Checked single-vector forward pass.
pub fn dense_forward(params: &Dense, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != params.in_dim() {
        return Err(Error::InputShape(format!(
            "dense layer expects {} inputs, got {}",
            params.in_dim(),
            x.len()
        )));
    }
    Ok(params.forward_one(ArrayView1::from(x)).to_vec())
}

impl Parameters for Dense {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        out.push(TensorRef::new(format!("{prefix}.weight"), &self.weight));
        if let Some(b) = &self.bias {
            out.push(TensorRef::new(format!("{prefix}.bias"), b));
        }
    }

    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a>>) {
        out.push(TensorMut::new(format!("{prefix}.weight"), &mut self.weight));
        if let Some(b) = self.bias.as_mut() {
            out.push(TensorMut::new(format!("{prefix}.bias"), b));
        }
    }
}

/// Two dense layers with a `tanh` in between.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub hidden: Dense,
    pub output: Dense,
}

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    input: Array2<f64>,
    activated: Array2<f64>,
}

impl Mlp {
    pub fn init<R: Rng + ?Sized>(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut R) -> Self {
        Mlp {
            hidden: Dense::init(in_dim, hidden, true, rng),
            output: Dense::init(hidden, out_dim, true, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            hidden: self.hidden.zeros_like(),
            output: self.output.zeros_like(),
        }
    }

    pub fn forward_rows(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let a = self.hidden.forward_rows(x).mapv_into(f64::tanh);
        self.output.forward_rows(a.view())
    }

    pub fn forward_rows_cached(&self, x: ArrayView2<f64>) -> (Array2<f64>, MlpCache) {
        let activated = self.hidden.forward_rows(x).mapv_into(f64::tanh);
        let y = self.output.forward_rows(activated.view());
        (
            y,
            MlpCache {
                input: x.to_owned(),
                activated,
            },
        )
    }

    pub fn backward_rows(&self, cache: &MlpCache, dy: ArrayView2<f64>, grad: &mut Mlp) -> Array2<f64> {
        let mut da = self.output.backward_rows(cache.activated.view(), dy, &mut grad.output);
        da.zip_mut_with(&cache.activated, |g, &a| *g *= 1.0 - a * a);
        self.hidden.backward_rows(cache.input.view(), da.view(), &mut grad.hidden)
    }
}

impl Parameters for Mlp {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        self.hidden.collect(&format!("{prefix}.hidden"), out);
        self.output.collect(&format!("{prefix}.output"), out);
    }

    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a>>) {
        self.hidden.collect_mut(&format!("{prefix}.hidden"), out);
        self.output.collect_mut(&format!("{prefix}.output"), out);
    }
}
