use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::Parameters;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub hidden_dim: usize,
    pub window: usize,
    pub seed: u64,
    pub module_version: String,
    #[serde(default)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// `{layer name -> {shape, row-major values}}` plus a metadata block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub metadata: CheckpointMeta,
    pub layers: BTreeMap<String, TensorRecord>,
}

impl Checkpoint {
    pub fn new(metadata: CheckpointMeta) -> Self {
        Checkpoint {
            metadata,
            layers: BTreeMap::new(),
        }
    }

    pub fn insert<P: Parameters + ?Sized>(&mut self, prefix: &str, params: &P) {
        for t in params.tensors() {
            self.layers.insert(
                format!("{prefix}.{}", t.name),
                TensorRecord {
                    shape: t.shape,
                    values: t.data.to_vec(),
                },
            );
        }
    }

    /// Copies stored values into `params`; every tensor must be present with
    /// a matching shape.
    pub fn restore<P: Parameters + ?Sized>(&self, prefix: &str, params: &mut P) -> Result<()> {
        for t in params.tensors_mut() {
            let key = format!("{prefix}.{}", t.name);
            let rec = self
                .layers
                .get(&key)
                .ok_or_else(|| Error::Config(format!("checkpoint is missing layer {key}")))?;
            if rec.shape != t.shape || rec.values.len() != t.data.len() {
                return Err(Error::InputShape(format!(
                    "layer {key}: checkpoint shape {:?}, model shape {:?}",
                    rec.shape, t.shape
                )));
            }
            if rec.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("layer {key} contains non-finite values")));
            }
            t.data.copy_from_slice(&rec.values);
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorkit::Mlp;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_through_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mlp = Mlp::init(3, 4, 2, &mut rng);
        let mut ck = Checkpoint::new(CheckpointMeta {
            hidden_dim: 4,
            window: 10,
            seed: 1,
            module_version: "test".into(),
            extra: BTreeMap::new(),
        });
        ck.insert("proj", &mlp);
        assert!(ck.layers.contains_key("proj.hidden.weight"));
        assert_eq!(ck.layers["proj.hidden.weight"].shape, vec![4, 3]);

        let text = serde_json::to_string(&ck).unwrap();
        let back: Checkpoint = serde_json::from_str(&text).unwrap();
        let mut restored = mlp.zeros_like();
        back.restore("proj", &mut restored).unwrap();
        assert_eq!(restored, mlp);

        let mut wrong = Mlp::init(3, 5, 2, &mut rng);
        assert!(matches!(back.restore("proj", &mut wrong), Err(Error::InputShape(_))));
        assert!(matches!(back.restore("missing", &mut restored), Err(Error::Config(_))));
    }
}
