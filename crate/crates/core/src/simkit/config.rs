use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyngraph::{Dataset, Phase, PhaseInterval};
use crate::error::{Error, Result};

/// Boids constants. Turn limits are in degrees per step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlockRules {
    pub speed: f64,
    pub vision: f64,
    pub min_separation: f64,
    pub max_align_turn: f64,
    pub max_cohere_turn: f64,
    pub max_separate_turn: f64,
    /// Half-width of the uniform random turn during non-emergent phases.
    pub wander_turn: f64,
}

impl Default for FlockRules {
    fn default() -> Self {
        FlockRules {
            speed: 1.0,
            vision: 5.0,
            min_separation: 0.75,
            max_align_turn: 12.0,
            max_cohere_turn: 10.0,
            max_separate_turn: 4.0,
            wander_turn: 60.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PedestrianRules {
    pub speed: f64,
    pub vision: f64,
    /// Gain of the lateral lane-forming force.
    pub lane_strength: f64,
    /// Half-width of the uniform lateral step during non-emergent phases.
    pub lateral_noise: f64,
    pub max_lateral_speed: f64,
    /// Fraction of a band's occupants that must share a direction for the
    /// band to count as a lane.
    pub lane_threshold: f64,
}

impl Default for PedestrianRules {
    fn default() -> Self {
        PedestrianRules {
            speed: 0.5,
            vision: 5.0,
            lane_strength: 3.0,
            lateral_noise: 2.0,
            max_lateral_speed: 1.2,
            lane_threshold: 0.75,
        }
    }
}

fn default_record_stride() -> usize {
    1
}

fn default_objective_stride() -> usize {
    50
}

fn default_emergent_phases() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dataset: Dataset,
    pub n_agents: usize,
    /// Patches per side of the square world.
    pub world: usize,
    /// Raw simulator steps.
    pub n_steps: usize,
    /// Explicit phase intervals in raw steps; generated from the seed when absent.
    #[serde(default)]
    pub schedule: Option<Vec<PhaseInterval>>,
    #[serde(default = "default_emergent_phases")]
    pub emergent_phases: usize,
    pub seed: u64,
    #[serde(default = "default_record_stride")]
    pub record_stride: usize,
    #[serde(default = "default_objective_stride")]
    pub objective_stride: usize,
    #[serde(default)]
    pub flock: FlockRules,
    #[serde(default)]
    pub pedestrian: PedestrianRules,
}

impl SimConfig {
    /// Table-scale defaults: 150 birds on 51x51, or 382 pedestrians on 40x40,
    /// 50,000 raw steps.
    pub fn preset(dataset: Dataset, seed: u64) -> Self {
        let (n_agents, world) = match dataset {
            Dataset::Flock => (150, 51),
            Dataset::Pedestrian => (382, 40),
        };
        SimConfig {
            dataset,
            n_agents,
            world,
            n_steps: 50_000,
            schedule: None,
            emergent_phases: 5,
            seed,
            record_stride: 1,
            objective_stride: 50,
            flock: FlockRules::default(),
            pedestrian: PedestrianRules::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::Config("n_agents must be positive".into()));
        }
        if self.world == 0 {
            return Err(Error::Config("world must be at least one patch wide".into()));
        }
        if self.record_stride == 0 || self.objective_stride == 0 {
            return Err(Error::Config("strides must be positive".into()));
        }
        if let Some(schedule) = &self.schedule {
            check_schedule(schedule, self.n_steps)?;
        }
        Ok(())
    }

    pub fn resolved_schedule(&self) -> Vec<PhaseInterval> {
        match &self.schedule {
            Some(s) => s.clone(),
            None => default_schedule(self.n_steps, self.emergent_phases, self.seed),
        }
    }
}

fn check_schedule(schedule: &[PhaseInterval], n_steps: usize) -> Result<()> {
    if n_steps == 0 {
        return Ok(());
    }
    let mut expected = 0;
    for p in schedule {
        if p.start != expected || p.end <= p.start {
            return Err(Error::Config(format!(
                "schedule interval [{}, {}) does not continue from {expected}",
                p.start, p.end
            )));
        }
        expected = p.end;
    }
    if expected != n_steps {
        return Err(Error::Config(format!("schedule ends at {expected}, run has {n_steps} steps")));
    }
    Ok(())
}

/// `2k + 1` alternating intervals starting and ending non-emergent, with
/// boundaries jittered by up to 20% of the nominal spacing.
pub fn default_schedule(n_steps: usize, emergent_phases: usize, seed: u64) -> Vec<PhaseInterval> {
    if n_steps == 0 {
        return Vec::new();
    }
    let parts = 2 * emergent_phases + 1;
    if n_steps < parts {
        return vec![PhaseInterval { start: 0, end: n_steps, phase: Phase::Normal }];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5C4E_D01E);
    let spacing = n_steps as f64 / parts as f64;
    let jitter = 0.2 * spacing;
    let mut bounds = vec![0usize];
    for k in 1..parts {
        let b = k as f64 * spacing + rng.random_range(-jitter..=jitter);
        bounds.push(b.round() as usize);
    }
    bounds.push(n_steps);
    (0..parts)
        .map(|k| PhaseInterval {
            start: bounds[k],
            end: bounds[k + 1],
            phase: if k % 2 == 1 { Phase::Emergent } else { Phase::Normal },
        })
        .collect()
}
