use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{ArrayView2, Axis};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent_model::AgentModel;
use crate::dyngraph::{AgentTrace, DynamicGraph};
use crate::encoder::WindowCache;
use crate::error::{Error, Result};
use crate::tensorkit::cosine_dissim;

/// Cosine dissimilarity of the window means of two `w × D` representation
/// windows.
pub fn agent_dissimilarity(now: ArrayView2<f64>, prev: ArrayView2<f64>) -> Result<f64> {
    let a = now.mean_axis(Axis(0)).ok_or(Error::EmptySet("window"))?;
    let b = prev.mean_axis(Axis(0)).ok_or(Error::EmptySet("window"))?;
    cosine_dissim(a.as_slice().expect("contiguous"), b.as_slice().expect("contiguous"))
}

/// `s_j' = alpha * d_j + (1 - alpha) * mean of s over {j} and j's neighbors`.
pub fn communicate(scores: &[f64], dissims: &[f64], neighbors: &[Vec<usize>], alpha: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
    }
    if scores.len() != dissims.len() || scores.len() != neighbors.len() {
        return Err(Error::InputShape(format!(
            "{} scores, {} dissimilarities, {} neighborhoods",
            scores.len(),
            dissims.len(),
            neighbors.len()
        )));
    }
    Ok(neighbors
        .iter()
        .enumerate()
        .map(|(j, nb)| {
            let total: f64 = scores[j] + nb.iter().map(|&i| scores[i]).sum::<f64>();
            let mean = total / (nb.len() + 1) as f64;
            (alpha * dissims[j] + (1.0 - alpha) * mean).clamp(0.0, 1.0)
        })
        .collect())
}

/// Uniformly subsamples every neighborhood larger than `budget`.
pub fn cap_neighbors<R: Rng + ?Sized>(neighbors: &[Vec<usize>], budget: usize, rng: &mut R) -> Vec<Vec<usize>> {
    neighbors
        .iter()
        .map(|nb| {
            if nb.len() <= budget {
                nb.clone()
            } else {
                let mut pick: Vec<usize> = nb.choose_multiple(rng, budget).copied().collect();
                pick.sort_unstable();
                pick
            }
        })
        .collect()
}

/// Scores per recorded step, `scores[t][j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub n_agents: usize,
    pub scores: Vec<Vec<f64>>,
}

impl ScoreSeries {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Mean over agents at every step.
    pub fn mean_series(&self) -> Vec<f64> {
        self.scores
            .iter()
            .map(|s| if s.is_empty() { 0.0 } else { s.iter().sum::<f64>() / s.len() as f64 })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(f);
        let io = |e| Error::io(path, e);
        writeln!(out, "t,agent_id,score").map_err(io)?;
        for (t, row) in self.scores.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                writeln!(out, "{t},{j},{s}").map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rows: Vec<(usize, usize, f64)> = Vec::new();
        for (k, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if k == 0 || line.is_empty() {
                continue;
            }
            let bad = || Error::Trace(format!("{}:{}: malformed score row", path.display(), k + 1));
            let mut it = line.split(',');
            let t = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let j = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let s = it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            rows.push((t, j, s));
        }
        let len = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let n = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if rows.len() != len * n {
            return Err(Error::Trace(format!("{}: score table is not {len} x {n}", path.display())));
        }
        let mut scores = vec![vec![f64::NAN; n]; len];
        for (t, j, s) in rows {
            scores[t][j] = s;
        }
        if scores.iter().flatten().any(|s| s.is_nan()) {
            return Err(Error::Trace(format!("{}: duplicate or missing score rows", path.display())));
        }
        Ok(ScoreSeries { n_agents: n, scores })
    }
}

/// Runs the trained encoder over the whole trace with an incremental window.
///
/// Scores start at 0. Once windows ending at `tau - 1` and `tau` both exist,
/// the dissimilarity of their pooled representations feeds the
/// communication round that produces the scores at `tau + 1`, using the
/// neighborhoods at `tau`.
pub fn score_trace(model: &AgentModel, trace: &AgentTrace, alpha: f64, budget: Option<usize>, seed: u64) -> Result<ScoreSeries> {
    let n = trace.n_agents();
    let len = trace.len();
    let w = model.hyper.window;
    let graph = DynamicGraph::build(trace, model.hyper.delta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache = WindowCache::new(n, w, model.hyper.dim)?;
    let mut scores = vec![vec![0.0; n]; len];
    let mut prev_pool: Option<ndarray::Array2<f64>> = None;
    for tau in 0..len {
        let x = model.scale_states(&trace.steps[tau]);
        let Some(h) = cache.advance(&model.online.encoder, tau, x.view(), graph.at(tau))? else {
            continue;
        };
        let pool = h.mean_axis(Axis(1)).expect("non-empty window");
        if let Some(prev) = &prev_pool {
            if tau + 1 < len {
                let dissims = (0..n)
                    .map(|j| {
                        cosine_dissim(
                            pool.row(j).as_slice().expect("contiguous"),
                            prev.row(j).as_slice().expect("contiguous"),
                        )
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let capped;
                let nb = match budget {
                    Some(b) => {
                        capped = cap_neighbors(graph.at(tau), b, &mut rng);
                        capped.as_slice()
                    }
                    None => graph.at(tau),
                };
                scores[tau + 1] = communicate(&scores[tau], &dissims, nb, alpha)?;
            }
        }
        prev_pool = Some(pool);
    }
    Ok(ScoreSeries { n_agents: n, scores })
}
