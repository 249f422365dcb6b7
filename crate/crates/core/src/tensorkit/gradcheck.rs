/// Relative error with a small absolute floor so that coordinates whose true
/// gradient is ~0 are judged by absolute error instead.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares the analytic gradient returned by `loss_fn` at `params` against
/// central differences `(f(p + h) - f(p - h)) / 2h`, one coordinate at a
/// time. Returns the worst [`relative_error`].
pub fn grad_check<F>(loss_fn: F, params: &[f64], step: f64) -> f64
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = loss_fn(params);
    assert_eq!(analytic.len(), params.len(), "gradient length differs from parameter count");
    let mut probe = params.to_vec();
    let mut worst = 0.0f64;
    for k in 0..params.len() {
        probe[k] = params[k] + step;
        let plus = loss_fn(&probe).0;
        probe[k] = params[k] - step;
        let minus = loss_fn(&probe).0;
        probe[k] = params[k];
        let numeric = (plus - minus) / (2.0 * step);
        worst = worst.max(relative_error(analytic[k], numeric));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let quad = |p: &[f64]| (0.5 * p.iter().map(|x| x * x).sum::<f64>(), p.to_vec());
        let err = grad_check(quad, &[1.5, -2.0, 0.25, 3.0], 1e-5);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let bad = |p: &[f64]| (0.5 * p.iter().map(|x| x * x).sum::<f64>(), p.iter().map(|x| 2.0 * x).collect());
        assert!(grad_check(bad, &[1.0, 2.0], 1e-5) > 0.4);
    }
}
