use ndarray::{Array, Dimension};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Read-only view of one named parameter tensor.
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

impl<'a> TensorRef<'a> {
    pub fn new<D: Dimension>(name: String, array: &'a Array<f64, D>) -> Self {
        TensorRef {
            name,
            shape: array.shape().to_vec(),
            data: array.as_slice().expect("parameters are stored in standard layout"),
        }
    }
}

pub struct TensorMut<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a mut [f64],
}

impl<'a> TensorMut<'a> {
    pub fn new<D: Dimension>(name: String, array: &'a mut Array<f64, D>) -> Self {
        let shape = array.shape().to_vec();
        TensorMut {
            name,
            shape,
            data: array.as_slice_mut().expect("parameters are stored in standard layout"),
        }
    }
}

/// A fixed, ordered collection of named parameter tensors.
///
/// Gradients use the same type as the parameters they belong to, so Adam and
/// EMA can zip the two tensor lists.
pub trait Parameters {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>);
    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a>>);

    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = Vec::new();
        self.collect("", &mut out);
        for t in &mut out {
            if let Some(stripped) = t.name.strip_prefix('.') {
                t.name = stripped.to_string();
            }
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::new();
        self.collect_mut("", &mut out);
        for t in &mut out {
            if let Some(stripped) = t.name.strip_prefix('.') {
                t.name = stripped.to_string();
            }
        }
        out
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }
}

pub fn flatten<P: Parameters + ?Sized>(params: &P) -> Vec<f64> {
    params.tensors().iter().flat_map(|t| t.data.iter().copied()).collect()
}

pub fn assign_flat<P: Parameters + ?Sized>(params: &mut P, flat: &[f64]) {
    let mut offset = 0;
    for t in params.tensors_mut() {
        let n = t.data.len();
        t.data.copy_from_slice(&flat[offset..offset + n]);
        offset += n;
    }
    assert_eq!(offset, flat.len(), "flat parameter vector length mismatch");
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new<P: Parameters>(params: &P, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect();
        OptimizerState {
            config,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<P: Parameters>(state: &mut OptimizerState, params: &mut P, grads: &P) -> Result<()> {
    let grads = grads.tensors();
    if grads.len() != state.first_moment.len() {
        return Err(Error::InputShape("gradient tensor count differs from optimizer state".into()));
    }
    for g in &grads {
        if let Some(bad) = g.data.iter().find(|x| !x.is_finite()) {
            return Err(Error::TrainingDivergence(format!("non-finite gradient {bad} in {}", g.name)));
        }
    }
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let tensors = params.tensors_mut();
    for (k, (p, g)) in tensors.into_iter().zip(&grads).enumerate() {
        if p.data.len() != g.data.len() {
            return Err(Error::InputShape(format!("gradient shape mismatch for {}", p.name)));
        }
        let m = &mut state.first_moment[k];
        let v = &mut state.second_moment[k];
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p.data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// `target <- eta * target + (1 - eta) * online`, elementwise.
pub fn ema_update<P: Parameters>(target: &mut P, online: &P, eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Config(format!("EMA decay {eta} outside [0, 1]")));
    }
    if eta == 1.0 {
        return Ok(());
    }
    let online = online.tensors();
    for (t, o) in target.tensors_mut().into_iter().zip(&online) {
        if t.data.len() != o.data.len() {
            return Err(Error::InputShape(format!("EMA shape mismatch for {}", t.name)));
        }
        for (x, &y) in t.data.iter_mut().zip(o.data) {
            *x = eta * *x + (1.0 - eta) * y;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorkit::Dense;
    use ndarray::{array, Array1, Array2};
    use proptest::prelude::*;

    fn scalar(v: f64) -> Dense {
        Dense {
            weight: Array2::from_elem((1, 1), v),
            bias: None,
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = Dense {
            weight: array![[1.0, -2.0]],
            bias: Some(array![0.5]),
        };
        let before = p.clone();
        let g = p.zeros_like();
        let mut state = OptimizerState::new(&p, AdamConfig::default());
        adam_step(&mut state, &mut p, &g).unwrap();
        assert_eq!(p, before);
        assert!(state.first_moment.iter().flatten().all(|&m| m == 0.0));
        assert!(state.second_moment.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = scalar(1.0);
        let g = scalar(1.0);
        let cfg = AdamConfig { lr: 0.1, ..AdamConfig::default() };
        let mut state = OptimizerState::new(&p, cfg);
        adam_step(&mut state, &mut p, &g).unwrap();
        // m_hat = 1, v_hat = 1: update = lr / (1 + eps)
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((p.weight[[0, 0]] - expected).abs() < 1e-15);

        // Second identical gradient: m = 0.19, v = 0.001999
        // m_hat = 0.19 / 0.19 = 1, v_hat = 0.001999 / 0.001999 = 1.
        adam_step(&mut state, &mut p, &g).unwrap();
        let m = 0.9 * 0.1 + 0.1;
        let v = 0.999 * 0.001 + 0.001;
        let m_hat = m / (1.0 - 0.9f64.powi(2));
        let v_hat = v / (1.0 - 0.999f64.powi(2));
        let step2 = 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p.weight[[0, 0]] - (expected - step2)).abs() < 1e-15);
        assert!((step2 - 0.1).abs() < 1e-7);
    }

    #[test]
    fn nan_gradient_is_divergence() {
        let mut p = scalar(1.0);
        let g = scalar(f64::NAN);
        let mut state = OptimizerState::new(&p, AdamConfig::default());
        assert!(matches!(adam_step(&mut state, &mut p, &g), Err(Error::TrainingDivergence(_))));
        assert_eq!(p.weight[[0, 0]], 1.0);
    }

    #[test]
    fn ema_examples() {
        let online = scalar(4.0);
        let mut t = scalar(2.0);
        ema_update(&mut t, &online, 1.0).unwrap();
        assert_eq!(t.weight[[0, 0]], 2.0);
        ema_update(&mut t, &online, 0.5).unwrap();
        assert_eq!(t.weight[[0, 0]], 3.0);
        ema_update(&mut t, &online, 0.0).unwrap();
        assert_eq!(t.weight[[0, 0]], 4.0);
        assert!(matches!(ema_update(&mut t, &online, 1.5), Err(Error::Config(_))));
        assert!(matches!(ema_update(&mut t, &online, -0.1), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn ema_is_a_contraction(
            target in prop::collection::vec(-10.0f64..10.0, 6),
            online in prop::collection::vec(-10.0f64..10.0, 6),
            eta in 0.0f64..=1.0,
        ) {
            let mut t = Dense { weight: Array2::from_shape_vec((2, 3), target.clone()).unwrap(), bias: Some(Array1::zeros(2)) };
            let o = Dense { weight: Array2::from_shape_vec((2, 3), online.clone()).unwrap(), bias: Some(Array1::zeros(2)) };
            ema_update(&mut t, &o, eta).unwrap();
            for ((after, before), on) in t.weight.iter().zip(&target).zip(&online) {
                prop_assert!((after - on).abs() <= eta * (before - on).abs() + 1e-12);
            }
        }
    }
}
