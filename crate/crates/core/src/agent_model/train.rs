use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::losses::{agent_losses, sample_temporal_neighbors};
use super::net::{AgentHyper, AgentModel, STATE_DIM};
use crate::dyngraph::{AgentTrace, DynamicGraph, WindowView};
use crate::encoder::Standardizer;
use crate::error::{Error, Result};
use crate::tensorkit::{adam_step, ema_update, AdamConfig, OptimizerState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: usize,
    pub trace: usize,
    pub slice: usize,
    pub temporal: f64,
    pub spatial: f64,
    pub total: f64,
}

/// Writes `epoch,slice,L_T,L_S,L_Agent`-style rows with the given loss
/// column names.
pub fn write_train_log(path: &Path, records: &[TrainRecord], names: [&str; 3]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("epoch,trace,slice,{},{},{}\n", names[0], names[1], names[2]));
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.epoch, r.trace, r.slice, r.temporal, r.spatial, r.total
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Fits the input standardization on every training state, then runs
/// `epochs × traces × batches` single-window updates: Adam on the online
/// branch followed by an EMA step of the target.
pub fn train_agent(traces: &[AgentTrace], hyper: &AgentHyper) -> Result<(AgentModel, Vec<TrainRecord>)> {
    hyper.validate()?;
    if traces.is_empty() {
        return Err(Error::EmptySet("training traces"));
    }
    let w = hyper.window;
    for (k, t) in traces.iter().enumerate() {
        if t.len() < w {
            return Err(Error::InputShape(format!("trace {k} has {} steps, window is {w}", t.len())));
        }
    }
    let scaler = Standardizer::fit(
        STATE_DIM,
        traces.iter().flat_map(|t| t.steps.iter().flatten().map(|s| s.as_slice())),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut model = AgentModel::init(hyper.clone(), scaler, &mut rng)?;
    let graphs: Vec<DynamicGraph> = traces.iter().map(|t| DynamicGraph::build(t, hyper.delta)).collect();
    let mut opt = OptimizerState::new(&model.online, AdamConfig { lr: hyper.lr, ..AdamConfig::default() });
    let mut log = Vec::with_capacity(hyper.epochs * traces.len() * hyper.batches);

    for epoch in 0..hyper.epochs {
        for (ti, (trace, graph)) in traces.iter().zip(&graphs).enumerate() {
            for slice in 0..hyper.batches {
                let tau = rng.random_range(w - 1..trace.len());
                let view = WindowView::new(trace, graph, tau, w)?;
                let window = model.encoder_window(&view)?;
                let samples = sample_temporal_neighbors(&window.neighbors, hyper.kappa, &mut rng);
                let (l, grad) = agent_losses(&model.online, &model.target, &window, &samples)?;
                if !l.total.is_finite() {
                    return Err(Error::TrainingDivergence(format!(
                        "agent loss {} at epoch {epoch}, trace {ti}, slice {slice}",
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
