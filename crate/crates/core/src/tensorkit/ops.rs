use crate::error::{Error, Result};

/// Numerically stable softmax (max-subtracted).
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::EmptySet("softmax of an empty score vector"));
    }
    let mut out = scores.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// In-place variant used by the attention kernels. A no-op on empty input.
pub fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `(1 - cos(u, v)) / 2`, clamped to `[0, 1]`.
pub fn cosine_dissim(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InputShape(format!(
            "cosine_dissim on vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::DegenerateInput("cosine dissimilarity of a zero-norm vector"));
    }
    let cos = dot(u, v) / (nu * nv);
    Ok(((1.0 - cos) * 0.5).clamp(0.0, 1.0))
}

/// Dissimilarity together with its gradients with respect to both arguments.
///
/// The value is not clamped here so that the gradient stays consistent with
/// it; rounding can push it a few ulps outside `[0, 1]`.
pub fn cosine_dissim_grad(u: &[f64], v: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if u.len() != v.len() {
        return Err(Error::InputShape(format!(
            "cosine_dissim on vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::DegenerateInput("cosine dissimilarity of a zero-norm vector"));
    }
    let uv = dot(u, v);
    let cos = uv / (nu * nv);
    // d = (1 - cos) / 2, dcos/du = v/(|u||v|) - cos * u/|u|^2
    let du = u
        .iter()
        .zip(v)
        .map(|(a, b)| -0.5 * (b / (nu * nv) - cos * a / (nu * nu)))
        .collect();
    let dv = v
        .iter()
        .zip(u)
        .map(|(b, a)| -0.5 * (a / (nu * nv) - cos * b / (nv * nv)))
        .collect();
    Ok(((1.0 - cos) * 0.5, du, dv))
}
