use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::losses::{sample_regions, system_losses};
use super::net::{SystemHyper, SystemModel};
use super::region::RegionSeries;
use crate::agent_model::TrainRecord;
use crate::encoder::Standardizer;
use crate::error::{Error, Result};
use crate::tensorkit::{adam_step, ema_update, AdamConfig, OptimizerState};

/// Same loop as agent training, over region series: random window slices,
/// Adam on the online branch, then an EMA step of the target.
pub fn train_system(series: &[RegionSeries], hyper: &SystemHyper) -> Result<(SystemModel, Vec<TrainRecord>)> {
    hyper.validate()?;
    let first = series.first().ok_or(Error::EmptySet("training region series"))?;
    let w = hyper.window;
    for (k, s) in series.iter().enumerate() {
        if s.n != first.n {
            return Err(Error::InputShape(format!("region series {k} uses a {}-grid, expected {}", s.n, first.n)));
        }
        if s.len() < w {
            return Err(Error::InputShape(format!("region series {k} has {} steps, window is {w}", s.len())));
        }
    }
    let scaler = Standardizer::fit(1, series.iter().flat_map(|s| s.values.iter().flat_map(|v| v.chunks(1))))?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut model = SystemModel::init(hyper.clone(), scaler, &mut rng)?;
    let grid = first.grid();
    let mut opt = OptimizerState::new(&model.online, AdamConfig { lr: hyper.lr, ..AdamConfig::default() });
    let mut log = Vec::with_capacity(hyper.epochs * series.len() * hyper.batches);
    for epoch in 0..hyper.epochs {
        for (ti, s) in series.iter().enumerate() {
            for slice in 0..hyper.batches {
                let tau = rng.random_range(w - 1..s.len());
                let window = model.encoder_window(s, &grid.adjacency, tau)?;
                let regions = sample_regions(s.n_regions(), hyper.kappa, &mut rng);
                let (l, grad) = system_losses(&model.online, &model.target, &window, &regions)?;
                if !l.total.is_finite() {
                    return Err(Error::TrainingDivergence(format!(
                        "system loss {} at epoch {epoch}, series {ti}, slice {slice}",
                        l.total
                    )));
                }
                adam_step(&mut opt, &mut model.online, &grad)?;
                ema_update(&mut model.target, &model.online, hyper.eta)?;
                log.push(TrainRecord { epoch, trace: ti, slice, temporal: l.temporal, spatial: l.spatial, total: l.total });
            }
        }
    }
    Ok((model, log))
}
