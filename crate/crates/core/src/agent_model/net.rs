use std::path::Path;

use ndarray::{Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dyngraph::{State, WindowView};
use crate::encoder::{Encoder, EncoderWindow, Standardizer};
use crate::error::{Error, Result};
use crate::tensorkit::{Checkpoint, CheckpointMeta, Mlp, Parameters, TensorMut, TensorRef};

pub const STATE_DIM: usize = 4;
const MODULE_VERSION: &str = "agent/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentHyper {
    pub window: usize,
    pub dim: usize,
    pub kappa: usize,
    pub epochs: usize,
    /// Window slices per training trace per epoch.
    pub batches: usize,
    pub eta: f64,
    pub lr: f64,
    /// Neighborhood radius.
    pub delta: f64,
    pub seed: u64,
}

impl Default for AgentHyper {
    fn default() -> Self {
        AgentHyper {
            window: 10,
            dim: 128,
            kappa: 5,
            epochs: 10,
            batches: 64,
            eta: 0.99,
            lr: 1e-3,
            delta: 5.0,
            seed: 0,
        }
    }
}

impl AgentHyper {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.dim == 0 || self.kappa == 0 {
            return Err(Error::Config("window, dim and kappa must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config(format!("eta {} outside [0, 1]", self.eta)));
        }
        if !(self.delta > 0.0) || !(self.lr > 0.0) {
            return Err(Error::Config("delta and lr must be positive".into()));
        }
        Ok(())
    }
}

/// Encoder plus the temporal projection, spatial projection, and the
/// predictor applied on the online side of the spatial loss.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentNet {
    pub encoder: Encoder,
    pub proj_t: Mlp,
    pub proj_s: Mlp,
    pub predictor: Mlp,
}

impl AgentNet {
    pub fn init<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        AgentNet {
            encoder: Encoder::init(STATE_DIM, dim, rng),
            proj_t: Mlp::init(dim, dim, dim, rng),
            proj_s: Mlp::init(dim, dim, dim, rng),
            predictor: Mlp::init(dim, dim, dim, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        AgentNet {
            encoder: self.encoder.zeros_like(),
            proj_t: self.proj_t.zeros_like(),
            proj_s: self.proj_s.zeros_like(),
            predictor: self.predictor.zeros_like(),
        }
    }
}

impl Parameters for AgentNet {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<TensorRef<'a>>) {
        self.encoder.collect(&format!("{prefix}.encoder"), out);
        self.proj_t.collect(&format!("{prefix}.proj_t"), out);
        self.proj_s.collect(&format!("{prefix}.proj_s"), out);
        self.predictor.collect(&format!("{prefix}.predictor"), out);
    }

    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<TensorMut<'a>>) {
        self.encoder.collect_mut(&format!("{prefix}.encoder"), out);
        self.proj_t.collect_mut(&format!("{prefix}.proj_t"), out);
        self.proj_s.collect_mut(&format!("{prefix}.proj_s"), out);
        self.predictor.collect_mut(&format!("{prefix}.predictor"), out);
    }
}

/// Trained (or freshly initialized) agent-level parameters with the input
/// standardization they were trained under.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentModel {
    pub hyper: AgentHyper,
    pub scaler: Standardizer,
    pub online: AgentNet,
    pub target: AgentNet,
}

impl AgentModel {
    /// Target starts as an exact copy of the online branch.
    pub fn init<R: Rng + ?Sized>(hyper: AgentHyper, scaler: Standardizer, rng: &mut R) -> Result<Self> {
        hyper.validate()?;
        if scaler.dim() != STATE_DIM {
            return Err(Error::InputShape(format!("agent scaler has {} features", scaler.dim())));
        }
        let online = AgentNet::init(hyper.dim, rng);
        Ok(AgentModel { target: online.clone(), online, hyper, scaler })
    }

    pub fn scale_states(&self, states: &[State]) -> Array2<f64> {
        self.scaler.apply(states.iter().map(|s| s.as_slice()))
    }

    pub fn encoder_window<'a>(&self, view: &WindowView<'a>) -> Result<EncoderWindow<'a>> {
        let inputs = (0..view.w()).map(|k| self.scale_states(view.states(k))).collect();
        let neighbors = (0..view.w()).map(|k| view.neighbors(k)).collect();
        EncoderWindow::new(inputs, neighbors)
    }

    /// Online representations for a window, `n × w × D`.
    pub fn represent(&self, view: &WindowView) -> Result<Array3<f64>> {
        Ok(self.online.encoder.forward(&self.encoder_window(view)?))
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
        let hyper: AgentHyper = serde_json::from_value(field("hyper")?)?;
        let scaler: Standardizer = serde_json::from_value(field("scaler")?)?;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut model = AgentModel::init(hyper, scaler, &mut rng)?;
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
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let hyper = AgentHyper { dim: 6, ..AgentHyper::default() };
        let mut m = AgentModel::init(hyper, Standardizer::identity(4), &mut rng).unwrap();
        m.target.proj_t.output.weight[[0, 0]] = 42.0;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.json");
        m.save(&path).unwrap();
        let back = AgentModel::load(&path).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn bad_hyper_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let hyper = AgentHyper { eta: 1.5, ..AgentHyper::default() };
        assert!(AgentModel::init(hyper, Standardizer::identity(4), &mut rng).is_err());
        let hyper = AgentHyper { dim: 4, ..AgentHyper::default() };
        assert!(AgentModel::init(hyper, Standardizer::identity(2), &mut rng).is_err());
    }
}
