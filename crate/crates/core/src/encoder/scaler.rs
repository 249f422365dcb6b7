use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature affine standardization fitted on training inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Fits mean and standard deviation per feature. Features with (near)
    /// zero spread keep a unit scale.
    pub fn fit<'a>(dim: usize, rows: impl Iterator<Item = &'a [f64]>) -> Result<Self> {
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for r in rows {
            if r.len() != dim {
                return Err(Error::InputShape(format!("expected {dim} features, got {}", r.len())));
            }
            n += 1;
            for (k, &v) in r.iter().enumerate() {
                sum[k] += v;
                sq[k] += v * v;
            }
        }
        if n == 0 {
            return Err(Error::EmptySet("standardizer inputs"));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n as f64 - m * m).max(0.0).sqrt();
                if sd > 1e-12 { sd } else { 1.0 }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply<'a>(&self, rows: impl ExactSizeIterator<Item = &'a [f64]>) -> Array2<f64> {
        let d = self.dim();
        let mut out = Array2::zeros((rows.len(), d));
        for (mut o, r) in out.rows_mut().into_iter().zip(rows) {
            for k in 0..d {
                o[k] = (r[k] - self.mean[k]) / self.std[k];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_and_apply() {
        let rows = [[1.0, 5.0], [3.0, 5.0]];
        let s = Standardizer::fit(2, rows.iter().map(|r| r.as_slice())).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        let out = s.apply(rows.iter().map(|r| r.as_slice()));
        assert_eq!(out.column(0).to_vec(), vec![-1.0, 1.0]);
        assert_eq!(out.column(1).to_vec(), vec![0.0, 0.0]);
        assert!(Standardizer::fit(2, std::iter::empty()).is_err());
        assert!(Standardizer::fit(3, rows.iter().map(|r| r.as_slice())).is_err());
    }
}
