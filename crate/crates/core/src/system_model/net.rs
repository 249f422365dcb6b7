use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::region::RegionSeries;
use crate::encoder::{Encoder, EncoderWindow, Standardizer};
use crate::error::{Error, Result};
use crate::tensorkit::{Checkpoint, CheckpointMeta, Mlp, Parameters, TensorMut, TensorRef};

const MODULE_VERSION: &str = "system/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemHyper {
    pub window: usize,
    pub dim: usize,
    pub kappa: usize,
    pub epochs: usize,
    pub batches: usize,
    pub eta: f64,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SystemHyper {
    fn default() -> Self {
        SystemHyper {
            window: 40,
            dim: 128,
            kappa: 5,
            epochs: 10,
            batches: 64,
            eta: 0.99,
            lr: 1e-3,
            seed: 0,
        }
    }
}

impl SystemHyper {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.dim == 0 || self.kappa == 0 {
            return Err(Error::Config("window, dim and kappa must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config(format!("eta {} outside [0, 1]", self.eta)));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("lr must be positive".into()));
        }
        Ok(())
    }
}

/// Region encoder with the regional spatial and temporal projections.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemNet {
    pub encoder: Encoder,
    pub proj_rs: Mlp,
    pub proj_rt: Mlp,
}

impl SystemNet {
    pub fn init<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        SystemNet {
            encoder: Encoder::init(1, dim, rng),
            proj_rs: Mlp::init(dim, dim, dim, rng),
            proj_rt: Mlp::init(dim, dim, dim, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        SystemNet {
            encoder: self.encoder.zeros_like(),
            proj_rs: self.proj_rs.zeros_like(),
            proj_rt: self.proj_rt.zeros_like(),
        }
    }
}

impl Parameters for SystemNet {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        self.encoder.collect(&format!("{prefix}.encoder"), out);
        self.proj_rs.collect(&format!("{prefix}.proj_rs"), out);
        self.proj_rt.collect(&format!("{prefix}.proj_rt"), out);
    }

    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a>>) {
        self.encoder.collect_mut(&format!("{prefix}.encoder"), out);
        self.proj_rs.collect_mut(&format!("{prefix}.proj_rs"), out);
        self.proj_rt.collect_mut(&format!("{prefix}.proj_rt"), out);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemModel {
    pub hyper: SystemHyper,
    pub scaler: Standardizer,
    pub online: SystemNet,
    pub target: SystemNet,
}

impl SystemModel {
    pub fn init<R: Rng + ?Sized>(hyper: SystemHyper, scaler: Standardizer, rng: &mut R) -> Result<Self> {
        hyper.validate()?;
        if scaler.dim() != 1 {
            return Err(Error::InputShape(format!("region scaler has {} features", scaler.dim())));
        }
        let online = SystemNet::init(hyper.dim, rng);
        Ok(SystemModel { target: online.clone(), online, hyper, scaler })
    }

    pub fn scale_step(&self, y: &[f64]) -> Array2<f64> {
        self.scaler.apply(y.chunks(1))
    }

    /// Region states `[tau - w + 1, tau]` over the static grid adjacency.
    pub fn encoder_window<'a>(&self, series: &RegionSeries, adjacency: &'a [Vec<usize>], tau: usize) -> Result<EncoderWindow<'a>> {
        let w = self.hyper.window;
        if tau >= series.len() || tau + 1 < w {
            return Err(Error::InputShape(format!(
                "window ending at {tau} does not fit {} region steps",
                series.len()
            )));
        }
        let inputs = (tau + 1 - w..=tau).map(|t| self.scale_step(&series.values[t])).collect();
        EncoderWindow::new(inputs, vec![adjacency; w])
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut extra = std::collections::BTreeMap::new();
        extra.insert("hyper".to_string(), serde_json::to_value(&self.hyper)?);
        extra.insert("scaler".to_string(), serde_json::to_value(&self.scaler)?);
        let mut ck = Checkpoint::new(CheckpointMeta {
            hidden_dim: self.hyper.dim,
            window: self.hyper.window,
            seed: self.hyper.seed,
            module_version: MODULE_VERSION.to_string(),
            extra,
        });
        ck.insert("online", &self.online);
        ck.insert("target", &self.target);
        Ok(ck)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.metadata.module_version != MODULE_VERSION {
            return Err(Error::Config(format!(
                "checkpoint is {}, expected {MODULE_VERSION}",
                ck.metadata.module_version
            )));
        }
        let field = |k: &str| {
            ck.metadata
                .extra
                .get(k)
                .cloned()
                .ok_or_else(|| Error::Config(format!("checkpoint metadata lacks {k}")))
        };
        let hyper: SystemHyper = serde_json::from_value(field("hyper")?)?;
        let scaler: Standardizer = serde_json::from_value(field("scaler")?)?;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut model = SystemModel::init(hyper, scaler, &mut rng)?;
        ck.restore("online", &mut model.online)?;
        ck.restore("target", &mut model.target)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hyper = SystemHyper { dim: 5, ..SystemHyper::default() };
        let m = SystemModel::init(hyper, Standardizer::identity(1), &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sys.json");
        m.save(&p).unwrap();
        assert_eq!(SystemModel::load(&p).unwrap(), m);
        // An agent checkpoint is not a system checkpoint.
        let mut ck = m.to_checkpoint().unwrap();
        ck.metadata.module_version = "agent/1".into();
        assert!(SystemModel::from_checkpoint(&ck).is_err());
    }
}
