use ndarray::{s, Array1, Array2, Array3, Axis};
use rand::seq::index::sample;
use rand::Rng;

use super::net::SystemNet;
use crate::encoder::EncoderWindow;
use crate::error::{Error, Result};
use crate::tensorkit::cosine_dissim_grad;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemLosses {
    pub temporal: f64,
    pub spatial: f64,
    pub total: f64,
}

/// `kappa` distinct regions drawn uniformly, or every region when `kappa`
/// is at least the region count.
pub fn sample_regions<R: Rng + ?Sized>(n_regions: usize, kappa: usize, rng: &mut R) -> Vec<usize> {
    if kappa >= n_regions {
        return (0..n_regions).collect();
    }
    let mut ids = sample(rng, n_regions, kappa).into_vec();
    ids.sort_unstable();
    ids
}

/// Region-mean of the spatially projected representations per step
/// (`w × D`) and the system representation `u` (`D`), the step-mean of
/// their temporal projection.
pub fn system_representation(net: &SystemNet, r: &Array3<f64>) -> (Array2<f64>, Array1<f64>) {
    let (m, w, d) = r.dim();
    let flat = r.view().into_shape_with_order((m * w, d)).expect("contiguous");
    let p = net.proj_rs.forward_rows(flat);
    let rg = p
        .into_shape_with_order((m, w, d))
        .expect("contiguous")
        .mean_axis(Axis(0))
        .expect("at least one region");
    let u = net.proj_rt.forward_rows(rg.view()).mean_axis(Axis(0)).expect("non-empty window");
    (rg, u)
}

/// System temporal and spatial consistency losses with gradients with
/// respect to the online branch. `regions` are the sampled region ids.
pub fn system_losses(online: &SystemNet, target: &SystemNet, window: &EncoderWindow, regions: &[usize]) -> Result<(SystemLosses, SystemNet)> {
    let m = window.n_nodes();
    let w = window.len();
    let d = online.encoder.dim();
    if regions.is_empty() || regions.iter().any(|&i| i >= m) {
        return Err(Error::InputShape(format!("sampled regions must be non-empty ids below {m}")));
    }

    let (r3, enc_cache) = online.encoder.forward_cached(window);
    let r = r3.into_shape_with_order((m * w, d)).expect("contiguous");
    let (p, p_cache) = online.proj_rs.forward_rows_cached(r.view());
    let rg = p
        .view()
        .into_shape_with_order((m, w, d))
        .expect("contiguous")
        .mean_axis(Axis(0))
        .expect("regions");
    let (q, q_cache) = online.proj_rt.forward_rows_cached(rg.view());
    let u = q.mean_axis(Axis(0)).expect("window").to_vec();

    let rt = target.encoder.forward(window);
    let pt = target
        .proj_rs
        .forward_rows(rt.view().into_shape_with_order((m * w, d)).expect("contiguous"))
        .into_shape_with_order((m, w, d))
        .expect("contiguous");
    let rg_t = pt.mean_axis(Axis(0)).expect("regions");
    let wt = pt.mean_axis(Axis(1)).expect("window");

    let mut du = vec![0.0; d];
    let mut temporal = 0.0;
    for t in 0..w {
        let (dist, g, _) = cosine_dissim_grad(&u, rg_t.row(t).as_slice().expect("row-major"))?;
        temporal += dist / w as f64;
        du.iter_mut().zip(&g).for_each(|(a, b)| *a += b / w as f64);
    }
    let mut spatial = 0.0;
    let k = regions.len() as f64;
    for &i in regions {
        let (dist, g, _) = cosine_dissim_grad(&u, wt.row(i).as_slice().expect("row-major"))?;
        spatial += dist / k;
        du.iter_mut().zip(&g).for_each(|(a, b)| *a += b / k);
    }

    let mut grad = online.zeros_like();
    let dq_row = Array1::from(du) / w as f64;
    let dq = dq_row.broadcast((w, d)).expect("row broadcast").to_owned();
    let drg = online.proj_rt.backward_rows(&q_cache, dq.view(), &mut grad.proj_rt) / m as f64;
    let mut dp = Array2::<f64>::zeros((m * w, d));
    for i in 0..m {
        dp.slice_mut(s![i * w..(i + 1) * w, ..]).assign(&drg);
    }
    let dr = online.proj_rs.backward_rows(&p_cache, dp.view(), &mut grad.proj_rs);
    let dr3 = dr.into_shape_with_order((m, w, d)).expect("contiguous");
    online.encoder.backward(&enc_cache, dr3.view(), &mut grad.encoder);
    Ok((SystemLosses { temporal, spatial, total: temporal + spatial }, grad))
}
