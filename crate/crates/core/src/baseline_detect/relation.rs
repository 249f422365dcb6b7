use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dyngraph::WindowView;
use crate::error::{Error, Result};

/// Speed and heading.
pub type Internal = [f64; 2];
/// Mean neighbor heading, mean neighbor speed, nearest-neighbor distance,
/// neighbor count.
pub type External = [f64; 4];

fn speed_heading(s: &[f64; 4]) -> (f64, f64) {
    (s[2].hypot(s[3]), s[3].atan2(s[2]))
}

/// Per-step internal and external variables of agent `j` over the window.
/// Steps with no neighbors use distance `delta`, count 0, and the agent's
/// own heading and speed as the neighbor means. Mean heading is the
/// circular mean.
pub fn compute_variables(view: &WindowView, j: usize, delta: f64) -> (Vec<Internal>, Vec<External>) {
    let mut internal = Vec::with_capacity(view.w());
    let mut external = Vec::with_capacity(view.w());
    for k in 0..view.w() {
        let states = view.states(k);
        let me = &states[j];
        let (speed, heading) = speed_heading(me);
        internal.push([speed, heading]);
        let nb = &view.neighbors(k)[j];
        if nb.is_empty() {
            external.push([heading, speed, delta, 0.0]);
            continue;
        }
        let (mut sin, mut cos, mut spd) = (0.0, 0.0, 0.0);
        let mut nearest = f64::INFINITY;
        for &i in nb {
            let (s, h) = speed_heading(&states[i]);
            sin += h.sin();
            cos += h.cos();
            spd += s;
            nearest = nearest.min((states[i][0] - me[0]).hypot(states[i][1] - me[1]));
        }
        let c = nb.len() as f64;
        external.push([sin.atan2(cos), spd / c, nearest, c]);
    }
    (internal, external)
}

/// OLS slope of `y` on `x` and the two-sided t-test p-value of the slope.
/// A regressor or response without variance gives `p = 1`.
pub fn ols_p_value(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::InputShape(format!("{} regressor values, {} responses", n, y.len())));
    }
    if n < 3 {
        return Err(Error::InputShape(format!("regression needs at least 3 points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let tiny = 1e-12;
    if sxx <= tiny * (1.0 + mx * mx) * nf || syy <= tiny * (1.0 + my * my) * nf {
        return Ok((0.0, 1.0));
    }
    let slope = sxy / sxx;
    let sse = (syy - slope * sxy).max(0.0);
    let df = nf - 2.0;
    let se = (sse / df / sxx).sqrt();
    if se == 0.0 {
        return Ok((slope, 0.0));
    }
    let t = (slope / se).abs();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Invariant(e.to_string()))?;
    let p = (2.0 * dist.sf(t)).clamp(0.0, 1.0);
    Ok((slope, p))
}

/// p-value of every (internal, external) pair, `p[i][e]`.
pub fn fit_relationship(internal: &[Internal], external: &[External]) -> Result<[[f64; 4]; 2]> {
    let mut out = [[1.0; 4]; 2];
    let mut xs = vec![0.0; external.len()];
    let mut ys = vec![0.0; internal.len()];
    for (i, row) in out.iter_mut().enumerate() {
        for (k, y) in ys.iter_mut().enumerate() {
            *y = internal[k][i];
        }
        for (e, p) in row.iter_mut().enumerate() {
            for (k, x) in xs.iter_mut().enumerate() {
                *x = external[k][e];
            }
            *p = ols_p_value(&xs, &ys)?.1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyngraph::{AgentTrace, Bounds, Dataset, DynamicGraph, TraceHeader};
    use proptest::prelude::*;

    fn trace(steps: Vec<Vec<[f64; 4]>>) -> AgentTrace {
        AgentTrace {
            header: TraceHeader {
                n_agents: steps[0].len(),
                bounds: Bounds::square(20.0),
                schedule: vec![],
                seed: 0,
                dataset: Dataset::Flock,
                stride: 1,
                objective: vec![],
                objective_stride: 50,
                groups: vec![],
            },
            steps,
        }
    }

    #[test]
    fn variable_examples() {
        let lone = trace(vec![vec![[1.0, 1.0, 1.0, 1.0]]; 4]);
        let g = DynamicGraph::build(&lone, 5.0);
        let view = WindowView::new(&lone, &g, 3, 4).unwrap();
        let (int, ext) = compute_variables(&view, 0, 5.0);
        assert!((int[0][1] - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((int[0][0] - 2f64.sqrt()).abs() < 1e-15);
        assert!(ext.iter().all(|e| e[3] == 0.0 && e[2] == 5.0 && e[1] == int[0][0] && e[0] == int[0][1]));

        let pair = trace(vec![vec![[1.0, 1.0, 1.0, 0.0], [4.0, 1.0, 0.0, 2.0]]; 5]);
        let g = DynamicGraph::build(&pair, 5.0);
        let view = WindowView::new(&pair, &g, 4, 5).unwrap();
        let (_, ext) = compute_variables(&view, 0, 5.0);
        for e in &ext {
            assert_eq!(e[2], 3.0);
            assert_eq!(e[3], 1.0);
            assert_eq!(e[1], 2.0);
            assert!((e[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        }
    }

    #[test]
    fn p_value_examples() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(k, v)| 2.0 * v + 1e-9 * ((k * 7 % 5) as f64 - 2.0)).collect();
        let (slope, p) = ols_p_value(&x, &y).unwrap();
        assert!((slope - 2.0).abs() < 1e-8);
        assert!(p < 1e-6);
        assert_eq!(ols_p_value(&x, &[3.0; 10]).unwrap(), (0.0, 1.0));
        assert_eq!(ols_p_value(&[1.0; 10], &x).unwrap(), (0.0, 1.0));
        assert!(ols_p_value(&[1.0, 2.0], &[1.0, 2.0]).is_err());

        // Hand instance: x = 1..4, y = (1, 3, 2, 5): slope 1.1, SSE 2.7,
        // se = sqrt(2.7 / 2 / 5), t = 2.117, df 2. Two-sided p from the
        // t-table lies between 0.10 (t = 2.920) and 0.20 (t = 1.886).
        let (slope, p) = ols_p_value(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 5.0]).unwrap();
        assert!((slope - 1.1).abs() < 1e-12);
        assert!(p > 0.10 && p < 0.20, "{p}");
        // Closed form for df = 2: p = 1 - t / sqrt(2 + t^2).
        let t = 1.1 / (2.7f64 / 2.0 / 5.0).sqrt();
        assert!((p - (1.0 - t / (2.0 + t * t).sqrt())).abs() < 1e-10);
    }

    #[test]
    fn relationship_matrix_shape() {
        let int: Vec<Internal> = (0..6).map(|k| [k as f64, 1.0]).collect();
        let ext: Vec<External> = (0..6).map(|k| [k as f64 * 3.0 + 0.1 * (k % 2) as f64, 0.5, 2.0, (k % 3) as f64]).collect();
        let p = fit_relationship(&int, &ext).unwrap();
        assert!(p[0][0] < 1e-3);
        assert_eq!(p[0][1], 1.0);
        assert_eq!(p[1], [1.0; 4]);
    }

    proptest! {
        #[test]
        fn p_value_ignores_affine_regressor_rescaling(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 5..30),
            a in prop_oneof![0.1f64..10.0, -10.0f64..-0.1],
            b in -5.0f64..5.0,
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let (_, p1) = ols_p_value(&x, &y).unwrap();
            let (_, p2) = ols_p_value(&xs, &y).unwrap();
            prop_assert!((p1 - p2).abs() < 1e-8);
            prop_assert!((0.0..=1.0).contains(&p1));
        }
    }
}
