use std::collections::BTreeMap;

use ndarray::{s, Array2, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::net::AgentNet;
use crate::encoder::EncoderWindow;
use crate::error::Result;
use crate::tensorkit::{cosine_dissim_grad, Mlp};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentLosses {
    pub temporal: f64,
    pub spatial: f64,
    pub total: f64,
    /// Agents left out of the spatial term for having no neighbors.
    pub skipped: usize,
}

/// How often each neighbor of `j` appears over the window's steps.
pub fn neighbor_frequencies(neighbors: &[&[Vec<usize>]], j: usize) -> BTreeMap<usize, usize> {
    let mut freq = BTreeMap::new();
    for step in neighbors {
        for &i in &step[j] {
            *freq.entry(i).or_insert(0) += 1;
        }
    }
    freq
}

/// Draws `kappa` neighbors per agent, with replacement, in proportion to how
/// often each appears in the window. Agents with no neighbors get an empty
/// list.
pub fn sample_temporal_neighbors<R: Rng + ?Sized>(neighbors: &[&[Vec<usize>]], kappa: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let n = neighbors.first().map_or(0, |s| s.len());
    (0..n)
        .map(|j| {
            let freq = neighbor_frequencies(neighbors, j);
            if freq.is_empty() {
                return Vec::new();
            }
            let (ids, weights): (Vec<usize>, Vec<usize>) = freq.into_iter().unzip();
            let dist = WeightedIndex::new(&weights).expect("positive counts");
            (0..kappa).map(|_| ids[dist.sample(rng)]).collect()
        })
        .collect()
}

fn pooled(x: &Array2<f64>, n: usize, w: usize) -> Array2<f64> {
    x.view()
        .into_shape_with_order((n, w, x.ncols()))
        .expect("node-major rows")
        .mean_axis(Axis(1))
        .expect("non-empty window")
}

fn target_pooled_spatial(target: &AgentNet, h: &Array2<f64>, n: usize, w: usize) -> Array2<f64> {
    pooled(&target.proj_s.forward_rows(h.view()), n, w)
}

fn mlp_rows(mlp: &Mlp, x: &Array2<f64>) -> (Array2<f64>, crate::tensorkit::MlpCache) {
    mlp.forward_rows_cached(x.view())
}

/// Temporal and spatial consistency losses for one window, with gradients
/// with respect to the online branch. `samples[j]` lists the neighbors drawn
/// for agent `j`; agents with an empty list are skipped in the spatial term.
pub fn agent_losses(online: &AgentNet, target: &AgentNet, window: &EncoderWindow, samples: &[Vec<usize>]) -> Result<(AgentLosses, AgentNet)> {
    let n = window.n_nodes();
    let w = window.len();
    let d = online.encoder.dim();

    let (h3, enc_cache) = online.encoder.forward_cached(window);
    let h = h3.into_shape_with_order((n * w, d)).expect("contiguous");
    let ht = target
        .encoder
        .forward(window)
        .into_shape_with_order((n * w, d))
        .expect("contiguous");

    let mut grad = online.zeros_like();
    let mut dh = Array2::<f64>::zeros((n * w, d));

    // Temporal: pooled projection against every target step of the same agent.
    let (pt, pt_cache) = mlp_rows(&online.proj_t, &h);
    let v = pooled(&pt, n, w);
    let mut temporal = 0.0;
    let mut dpt = Array2::<f64>::zeros((n * w, d));
    let norm_t = 1.0 / (n * w) as f64;
    for j in 0..n {
        let vj = v.row(j).to_vec();
        let mut dv = vec![0.0; d];
        for t in 0..w {
            let (dist, du, _) = cosine_dissim_grad(&vj, ht.row(j * w + t).as_slice().expect("row-major"))?;
            temporal += dist * norm_t;
            for (a, b) in dv.iter_mut().zip(&du) {
                *a += b * norm_t;
            }
        }
        let share = ndarray::Array1::from(dv) / w as f64;
        dpt.slice_mut(s![j * w..(j + 1) * w, ..]).assign(&share.broadcast((w, d)).expect("row broadcast"));
    }
    dh += &online.proj_t.backward_rows(&pt_cache, dpt.view(), &mut grad.proj_t);

    // Spatial: predicted pooled projection against sampled neighbors' target
    // pooled projections.
    let counted: Vec<usize> = (0..n).filter(|&j| !samples[j].is_empty()).collect();
    let skipped = n - counted.len();
    let mut spatial = 0.0;
    if !counted.is_empty() {
        let (ps, ps_cache) = mlp_rows(&online.proj_s, &h);
        let (m, m_cache) = mlp_rows(&online.predictor, &ps);
        let mp = pooled(&m, n, w);
        let nt = target_pooled_spatial(target, &ht, n, w);
        let mut dm = Array2::<f64>::zeros((n * w, d));
        for &j in &counted {
            let mj = mp.row(j).to_vec();
            let scale = 1.0 / (counted.len() * samples[j].len()) as f64;
            let mut dmj = vec![0.0; d];
            for &i in &samples[j] {
                let (dist, du, _) = cosine_dissim_grad(&mj, nt.row(i).as_slice().expect("row-major"))?;
                spatial += dist * scale;
                for (a, b) in dmj.iter_mut().zip(&du) {
                    *a += b * scale;
                }
            }
            let share = ndarray::Array1::from(dmj) / w as f64;
            dm.slice_mut(s![j * w..(j + 1) * w, ..]).assign(&share.broadcast((w, d)).expect("row broadcast"));
        }
        let dps = online.predictor.backward_rows(&m_cache, dm.view(), &mut grad.predictor);
        dh += &online.proj_s.backward_rows(&ps_cache, dps.view(), &mut grad.proj_s);
    }

    let dh3 = dh.into_shape_with_order((n, w, d)).expect("contiguous");
    online.encoder.backward(&enc_cache, dh3.view(), &mut grad.encoder);
    let losses = AgentLosses { temporal, spatial, total: temporal + spatial, skipped };
    Ok((losses, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorkit::{assign_flat, flatten, grad_check, Dense};
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(rng: &mut ChaCha8Rng, n: usize, w: usize) -> (Vec<Array2<f64>>, Vec<Vec<Vec<usize>>>) {
        let xs = (0..w)
            .map(|_| Array2::from_shape_fn((n, 4), |_| rng.random_range(-1.0..1.0)))
            .collect();
        let nb = (0..w)
            .map(|t| (0..n).map(|j| if j == 2 && t % 2 == 0 { vec![] } else { vec![(j + 1) % n] }).collect())
            .collect();
        (xs, nb)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let online = AgentNet::init(6, &mut rng);
        let target = AgentNet::init(6, &mut rng);
        let (xs, nb) = toy(&mut rng, 3, 4);
        let window = EncoderWindow::new(xs, nb.iter().map(|v| v.as_slice()).collect()).unwrap();
        let samples = sample_temporal_neighbors(&window.neighbors, 5, &mut rng);
        let loss = |flat: &[f64]| {
            let mut p = online.clone();
            assign_flat(&mut p, flat);
            let (l, g) = agent_losses(&p, &target, &window, &samples).unwrap();
            (l.total, flatten(&g))
        };
        let err = grad_check(loss, &flatten(&online), 1e-5);
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn identical_projections_give_zero_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut net = AgentNet::init(4, &mut rng);
        // Every projection and the encoder output collapse to the same constant.
        let constant = |d: &mut Dense| {
            d.weight.fill(0.0);
            if let Some(b) = d.bias.as_mut() {
                b.fill(1.0);
            }
        };
        constant(&mut net.encoder.t_value);
        for mlp in [&mut net.proj_t, &mut net.proj_s, &mut net.predictor] {
            constant(&mut mlp.output);
        }
        let (xs, nb) = toy(&mut rng, 3, 3);
        let window = EncoderWindow::new(xs, nb.iter().map(|v| v.as_slice()).collect()).unwrap();
        let samples = sample_temporal_neighbors(&window.neighbors, 5, &mut rng);
        let (l, _) = agent_losses(&net, &net.clone(), &window, &samples).unwrap();
        assert!(l.temporal.abs() < 1e-15 && l.spatial.abs() < 1e-15);
    }

    #[test]
    fn losses_are_bounded_and_skip_isolated_agents() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let online = AgentNet::init(5, &mut rng);
        let target = AgentNet::init(5, &mut rng);
        let xs: Vec<Array2<f64>> = (0..3).map(|_| Array2::from_shape_fn((4, 4), |_| rng.random_range(-1.0..1.0))).collect();
        let nb: Vec<Vec<usize>> = vec![vec![1], vec![0], vec![], vec![]];
        let window = EncoderWindow::new(xs, vec![nb.as_slice(); 3]).unwrap();
        let samples = sample_temporal_neighbors(&window.neighbors, 3, &mut rng);
        let (l, _) = agent_losses(&online, &target, &window, &samples).unwrap();
        assert_eq!(l.skipped, 2);
        assert!((0.0..=1.0).contains(&l.temporal) && (0.0..=1.0).contains(&l.spatial));
        assert!((l.total - l.temporal - l.spatial).abs() < 1e-15);
    }

    /// A neighbor present in 3 of 4 steps is drawn three times as often as
    /// one present in 1 step; chi-square with 1 dof at the 0.1% level.
    #[test]
    fn sampling_follows_window_frequency() {
        let steps: Vec<Vec<Vec<usize>>> = vec![
            vec![vec![1], vec![], vec![]],
            vec![vec![1, 2], vec![], vec![]],
            vec![vec![1], vec![], vec![]],
            vec![vec![], vec![], vec![]],
        ];
        let views: Vec<&[Vec<usize>]> = steps.iter().map(|s| s.as_slice()).collect();
        assert_eq!(neighbor_frequencies(&views, 0), BTreeMap::from([(1, 3), (2, 1)]));
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let draws = 20_000;
        let s = sample_temporal_neighbors(&views, draws, &mut rng);
        assert!(s[1].is_empty() && s[2].is_empty());
        let ones = s[0].iter().filter(|&&i| i == 1).count() as f64;
        let twos = draws as f64 - ones;
        let (e1, e2) = (0.75 * draws as f64, 0.25 * draws as f64);
        let chi2 = (ones - e1).powi(2) / e1 + (twos - e2).powi(2) / e2;
        assert!(chi2 < 10.83, "chi-square {chi2}");
    }
}
