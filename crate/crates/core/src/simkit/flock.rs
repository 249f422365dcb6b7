use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::SimConfig;
use super::objective::empty_patches;
use super::Recorder;
use crate::dyngraph::{build_neighborhoods, AgentTrace, Bounds, Dataset, Phase, PhaseInterval, State, TraceHeader};

/// Signed smallest rotation from `b` to `a`, in `(-pi, pi]`.
fn subtract_headings(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % (2.0 * PI);
    if d <= -PI {
        d += 2.0 * PI;
    } else if d > PI {
        d -= 2.0 * PI;
    }
    d
}

fn turn_at_most(heading: f64, turn: f64, max_turn: f64) -> f64 {
    heading + turn.clamp(-max_turn, max_turn)
}

fn mean_angle(angles: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut c, mut n) = (0.0, 0.0, 0);
    for a in angles {
        s += a.sin();
        c += a.cos();
        n += 1;
    }
    (n > 0 && (s != 0.0 || c != 0.0)).then(|| s.atan2(c))
}

/// Mirror `v` back into `[lo, hi]`; returns whether it bounced.
fn reflect(v: &mut f64, lo: f64, hi: f64) -> bool {
    if *v < lo {
        *v = 2.0 * lo - *v;
        true
    } else if *v > hi {
        *v = 2.0 * hi - *v;
        true
    } else {
        false
    }
}

pub(crate) fn phase_at(schedule: &[PhaseInterval], t: usize) -> Phase {
    schedule
        .iter()
        .find(|p| p.start <= t && t < p.end)
        .map_or(Phase::Normal, |p| p.phase)
}

pub(crate) fn record_schedule(schedule: &[PhaseInterval], stride: usize) -> Vec<PhaseInterval> {
    schedule
        .iter()
        .map(|p| PhaseInterval {
            start: p.start.div_ceil(stride),
            end: p.end.div_ceil(stride),
            phase: p.phase,
        })
        .filter(|p| p.end > p.start)
        .collect()
}

/// Boids with reflecting walls. Emergent phases run separation, alignment
/// and cohesion as bounded heading turns; normal phases turn each bird by a
/// uniform random angle instead.
pub fn simulate_flock(config: &SimConfig) -> AgentTrace {
    let rules = &config.flock;
    let side = config.world as f64;
    let bounds = Bounds::square(side);
    let schedule = config.resolved_schedule();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_agents;

    let mut pos: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side)])
        .collect();
    let mut heading: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();

    let align = rules.max_align_turn.to_radians();
    let cohere = rules.max_cohere_turn.to_radians();
    let separate = rules.max_separate_turn.to_radians();
    let wander = rules.wander_turn.to_radians();

    let mut rec = Recorder::new(config);
    let mut states: Vec<State> = Vec::with_capacity(n);
    for t in 0..config.n_steps {
        states.clear();
        states.extend(
            pos.iter()
                .zip(&heading)
                .map(|(p, h)| [p[0], p[1], rules.speed * h.cos(), rules.speed * h.sin()]),
        );
        rec.observe(t, &states, || empty_patches(&states, config.world) as f64);

        let next_heading: Vec<f64> = match phase_at(&schedule, t) {
            Phase::Emergent => {
                let mates = build_neighborhoods(&pos, rules.vision);
                (0..n)
                    .map(|j| {
                        let h = heading[j];
                        if mates[j].is_empty() {
                            return h;
                        }
                        let dist = |i: usize| {
                            let dx = pos[i][0] - pos[j][0];
                            let dy = pos[i][1] - pos[j][1];
                            (dx * dx + dy * dy).sqrt()
                        };
                        let nearest = *mates[j]
                            .iter()
                            .min_by(|&&a, &&b| dist(a).total_cmp(&dist(b)))
                            .expect("non-empty");
                        if dist(nearest) < rules.min_separation {
                            turn_at_most(h, subtract_headings(h, heading[nearest]), separate)
                        } else {
                            let mut h2 = h;
                            if let Some(target) = mean_angle(mates[j].iter().map(|&i| heading[i])) {
                                h2 = turn_at_most(h2, subtract_headings(target, h2), align);
                            }
                            let towards = mates[j]
                                .iter()
                                .map(|&i| (pos[i][1] - pos[j][1]).atan2(pos[i][0] - pos[j][0]));
                            if let Some(target) = mean_angle(towards) {
                                h2 = turn_at_most(h2, subtract_headings(target, h2), cohere);
                            }
                            h2
                        }
                    })
                    .collect()
            }
            Phase::Normal => heading.iter().map(|h| h + rng.random_range(-wander..=wander)).collect(),
        };
        heading = next_heading;

        for j in 0..n {
            let (mut vx, mut vy) = (rules.speed * heading[j].cos(), rules.speed * heading[j].sin());
            let mut x = pos[j][0] + vx;
            let mut y = pos[j][1] + vy;
            if reflect(&mut x, 0.0, side) {
                vx = -vx;
            }
            if reflect(&mut y, 0.0, side) {
                vy = -vy;
            }
            pos[j] = [x.clamp(0.0, side), y.clamp(0.0, side)];
            heading[j] = vy.atan2(vx);
        }
    }

    AgentTrace {
        header: TraceHeader {
            n_agents: n,
            bounds,
            schedule: record_schedule(&schedule, config.record_stride),
            seed: config.seed,
            dataset: Dataset::Flock,
            stride: config.record_stride,
            objective: rec.objective,
            objective_stride: config.objective_stride,
            groups: Vec::new(),
        },
        steps: rec.steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyngraph::downsample;

    fn small(seed: u64) -> SimConfig {
        SimConfig {
            n_steps: 400,
            ..SimConfig::preset(Dataset::Flock, seed)
        }
    }

    #[test]
    fn zero_steps_gives_empty_body() {
        let cfg = SimConfig { n_steps: 0, ..small(1) };
        let tr = simulate_flock(&cfg);
        assert!(tr.steps.is_empty());
        assert_eq!(tr.header.n_agents, 150);
        assert!(tr.header.schedule.is_empty());
    }

    fn triangle(x: f64, side: f64) -> f64 {
        let period = 2.0 * side;
        let r = x.rem_euclid(period);
        if r <= side {
            r
        } else {
            period - r
        }
    }

    #[test]
    fn lone_bird_moves_in_a_straight_reflected_line() {
        let cfg = SimConfig {
            n_agents: 1,
            n_steps: 300,
            schedule: Some(vec![PhaseInterval { start: 0, end: 300, phase: Phase::Emergent }]),
            ..small(7)
        };
        let tr = simulate_flock(&cfg);
        let [x0, y0, vx, vy] = tr.steps[0][0];
        for (k, step) in tr.steps.iter().enumerate() {
            let x = triangle(x0 + vx * k as f64, 51.0);
            let y = triangle(y0 + vy * k as f64, 51.0);
            assert!((step[0][0] - x).abs() < 1e-9, "step {k}: {} vs {x}", step[0][0]);
            assert!((step[0][1] - y).abs() < 1e-9, "step {k}: {} vs {y}", step[0][1]);
            let speed = (step[0][2].powi(2) + step[0][3].powi(2)).sqrt();
            assert!((speed - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_bounded() {
        let a = simulate_flock(&small(11));
        let b = simulate_flock(&small(11));
        assert_eq!(a, b);
        let c = simulate_flock(&small(12));
        assert_ne!(a.steps, c.steps);
        for step in &a.steps {
            for s in step {
                assert!(a.header.bounds.contains(s[0], s[1]));
            }
        }
        assert_eq!(a.header.objective.len(), 8);
    }

    #[test]
    fn record_stride_equals_downsampling() {
        let full = simulate_flock(&small(5));
        let strided = simulate_flock(&SimConfig { record_stride: 5, ..small(5) });
        assert_eq!(strided, downsample(&full, 5));
    }

    #[test]
    fn heading_arithmetic() {
        assert!((subtract_headings(0.1, -0.1) - 0.2).abs() < 1e-15);
        assert!((subtract_headings(-3.0, 3.0) - (2.0 * PI - 6.0)).abs() < 1e-12);
        assert_eq!(turn_at_most(0.0, 1.0, 0.25), 0.25);
        assert_eq!(turn_at_most(0.0, -1.0, 0.25), -0.25);
    }
}
