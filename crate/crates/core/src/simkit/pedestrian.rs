use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::SimConfig;
use super::flock::{phase_at, record_schedule};
use super::objective::lane_count;
use super::Recorder;
use crate::dyngraph::{AgentTrace, Bounds, Dataset, Phase, State, TraceHeader};

/// Two opposing streams on a corridor that wraps along x and has walls at
/// `y = 0` and `y = world`. Group 0 walks toward +x, group 1 toward -x.
///
/// Walking speed is fixed, so x advances monotonically (modulo the wrap).
/// In normal phases the lateral step is uniform noise, which mixes the
/// streams. In emergent phases a lane-forming force pulls each walker
/// toward same-direction neighbors and pushes it away from
/// opposite-direction ones, with a small residual noise.
pub fn simulate_pedestrian(config: &SimConfig) -> AgentTrace {
    let rules = &config.pedestrian;
    let side = config.world as f64;
    let schedule = config.resolved_schedule();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_agents;

    let groups: Vec<u8> = (0..n).map(|j| (j % 2) as u8).collect();
    let dir: Vec<f64> = groups.iter().map(|&g| if g == 0 { 1.0 } else { -1.0 }).collect();
    let mut pos: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side)])
        .collect();
    let mut lateral = vec![0.0f64; n];

    // Wrapped x distance so the corridor has no seam.
    let dx_wrap = |a: f64, b: f64| {
        let d = (a - b).abs();
        d.min(side - d)
    };

    let mut rec = Recorder::new(config);
    let mut states: Vec<State> = Vec::with_capacity(n);
    let vision2 = rules.vision * rules.vision;
    for t in 0..config.n_steps {
        states.clear();
        states.extend((0..n).map(|j| [pos[j][0], pos[j][1], dir[j] * rules.speed, lateral[j]]));
        rec.observe(t, &states, || {
            lane_count(&states, &groups, config.world, rules.lane_threshold) as f64
        });

        match phase_at(&schedule, t) {
            Phase::Normal => {
                for v in lateral.iter_mut() {
                    *v = rng.random_range(-rules.lateral_noise..=rules.lateral_noise);
                }
            }
            Phase::Emergent => {
                // Bucket walkers by lateral band so only nearby bands are scanned.
                let bands = config.world.max(1);
                let mut by_band: Vec<Vec<usize>> = vec![Vec::new(); bands];
                for (j, p) in pos.iter().enumerate() {
                    by_band[((p[1] / side * bands as f64) as usize).min(bands - 1)].push(j);
                }
                let reach = rules.vision.ceil() as usize;
                let next: Vec<f64> = (0..n)
                    .map(|j| {
                        let band = ((pos[j][1] / side * bands as f64) as usize).min(bands - 1);
                        let mut force = 0.0;
                        for b in band.saturating_sub(reach)..=(band + reach).min(bands - 1) {
                            for &i in &by_band[b] {
                                if i == j {
                                    continue;
                                }
                                let dx = dx_wrap(pos[i][0], pos[j][0]);
                                let dy = pos[i][1] - pos[j][1];
                                if dx * dx + dy * dy > vision2 {
                                    continue;
                                }
                                let weight = 1.0 - (dx * dx + dy * dy).sqrt() / rules.vision;
                                if groups[i] == groups[j] {
                                    force += weight * dy / rules.vision;
                                } else {
                                    force -= weight * dy.signum() * (1.0 - dy.abs() / rules.vision);
                                }
                            }
                        }
                        let noise = rng.random_range(-0.1..=0.1) * rules.lateral_noise;
                        (rules.lane_strength * force + noise)
                            .clamp(-rules.max_lateral_speed, rules.max_lateral_speed)
                    })
                    .collect();
                lateral = next;
            }
        }

        for j in 0..n {
            let mut x = pos[j][0] + dir[j] * rules.speed;
            x = x.rem_euclid(side);
            let mut y = pos[j][1] + lateral[j];
            if y < 0.0 {
                y = -y;
                lateral[j] = -lateral[j];
            } else if y > side {
                y = 2.0 * side - y;
                lateral[j] = -lateral[j];
            }
            pos[j] = [x, y.clamp(0.0, side)];
        }
    }

    AgentTrace {
        header: TraceHeader {
            n_agents: n,
            bounds: Bounds::square(side),
            schedule: record_schedule(&schedule, config.record_stride),
            seed: config.seed,
            dataset: Dataset::Pedestrian,
            stride: config.record_stride,
            objective: rec.objective,
            objective_stride: config.objective_stride,
            groups,
        },
        steps: rec.steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyngraph::PhaseInterval;

    #[test]
    fn zero_steps_gives_empty_body() {
        let cfg = SimConfig { n_steps: 0, ..SimConfig::preset(Dataset::Pedestrian, 1) };
        let tr = simulate_pedestrian(&cfg);
        assert!(tr.steps.is_empty());
        assert_eq!(tr.header.groups.len(), 382);
    }

    #[test]
    fn lone_walker_progresses_monotonically() {
        let cfg = SimConfig {
            n_agents: 1,
            n_steps: 500,
            schedule: Some(vec![
                PhaseInterval { start: 0, end: 250, phase: Phase::Normal },
                PhaseInterval { start: 250, end: 500, phase: Phase::Emergent },
            ]),
            ..SimConfig::preset(Dataset::Pedestrian, 3)
        };
        let tr = simulate_pedestrian(&cfg);
        let mut unwrapped = tr.steps[0][0][0];
        for w in tr.steps.windows(2) {
            let mut dx = w[1][0][0] - w[0][0][0];
            if dx < 0.0 {
                dx += 40.0;
            }
            assert!((dx - 0.5).abs() < 1e-9);
            unwrapped += dx;
            assert!(w[1][0][1] >= 0.0 && w[1][0][1] <= 40.0);
        }
        assert!((unwrapped - tr.steps[0][0][0] - 0.5 * 499.0).abs() < 1e-6);
    }

    #[test]
    fn deterministic_and_bounded() {
        let cfg = SimConfig { n_steps: 300, ..SimConfig::preset(Dataset::Pedestrian, 9) };
        let a = simulate_pedestrian(&cfg);
        assert_eq!(a, simulate_pedestrian(&cfg));
        for step in &a.steps {
            for s in step {
                assert!(a.header.bounds.contains(s[0], s[1]));
            }
        }
    }
}
