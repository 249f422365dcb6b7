
use super::losses::system_representation;
use super::net::SystemModel;
use super::region::RegionSeries;
use crate::encoder::WindowCache;
use crate::error::Result;
use crate::tensorkit::cosine_dissim;

/// Dissimilarity of two consecutive system representations.
pub fn system_score(u_now: &[f64], u_prev: &[f64]) -> Result<f64> {
    cosine_dissim(u_now, u_prev)
}

/// System score per region step: 0 until windows ending at `tau - 1` and
/// `tau` both exist, then the dissimilarity of their representations.
pub fn score_system(model: &SystemModel, series: &RegionSeries) -> Result<Vec<f64>> {
    let grid = series.grid();
    let w = model.hyper.window;
    let mut cache = WindowCache::new(series.n_regions(), w, model.hyper.dim)?;
    let mut out = vec![0.0; series.len()];
    let mut prev: Option<Vec<f64>> = None;
    for (tau, y) in series.values.iter().enumerate() {
        let x = model.scale_step(y);
        let Some(r) = cache.advance(&model.online.encoder, tau, x.view(), &grid.adjacency)? else {
            continue;
        };
        let (_, u) = system_representation(&model.online, &r);
        let u = u.to_vec();
        if let Some(p) = &prev {
            out[tau] = system_score(&u, p)?;
        }
        prev = Some(u);
    }
    debug_assert!(out.iter().all(|s| (0.0..=1.0).contains(s)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyngraph::Bounds;
    use crate::encoder::Standardizer;
    use crate::system_model::SystemHyper;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn score_examples() {
        assert!(system_score(&[1.0, 2.0], &[1.0, 2.0]).unwrap() < 1e-15);
        assert!((system_score(&[1.0, 0.0], &[-1.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((system_score(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(system_score(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    fn model(w: usize) -> SystemModel {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hyper = SystemHyper { window: w, dim: 4, ..SystemHyper::default() };
        SystemModel::init(hyper, Standardizer::identity(1), &mut rng).unwrap()
    }

    #[test]
    fn constant_regions_score_zero_and_warmup_is_zero() {
        let series = RegionSeries { n: 2, bounds: Bounds::square(4.0), values: vec![vec![0.5, 0.0, 1.0, 0.25]; 9] };
        let s = score_system(&model(3), &series).unwrap();
        assert_eq!(s.len(), 9);
        assert!(s[..3].iter().all(|&v| v == 0.0));
        assert!(s.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn single_region_runs() {
        let values: Vec<Vec<f64>> = (0..12).map(|t| vec![(t % 4) as f64]).collect();
        let series = RegionSeries { n: 1, bounds: Bounds::square(4.0), values };
        let s = score_system(&model(2), &series).unwrap();
        assert_eq!(s.len(), 12);
        assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(s.iter().any(|&v| v > 0.0));
    }
}
