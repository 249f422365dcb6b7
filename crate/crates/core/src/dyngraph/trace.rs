use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-agent state `(x, y, vx, vy)`.
pub type State = [f64; 4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Flock,
    Pedestrian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Normal,
    Emergent,
}

/// Half-open interval `[start, end)` of recorded steps in one phase.
/// Serialized as `[start, end, phase]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, Phase)", into = "(usize, usize, Phase)")]
pub struct PhaseInterval {
    pub start: usize,
    pub end: usize,
    pub phase: Phase,
}

impl From<(usize, usize, Phase)> for PhaseInterval {
    fn from((start, end, phase): (usize, usize, Phase)) -> Self {
        PhaseInterval { start, end, phase }
    }
}

impl From<PhaseInterval> for (usize, usize, Phase) {
    fn from(p: PhaseInterval) -> Self {
        (p.start, p.end, p.phase)
    }
}

/// World rectangle, serialized as `[min_x, min_y, max_x, max_y]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl From<[f64; 4]> for Bounds {
    fn from(b: [f64; 4]) -> Self {
        Bounds {
            min: [b[0], b[1]],
            max: [b[2], b[3]],
        }
    }
}

impl From<Bounds> for [f64; 4] {
    fn from(b: Bounds) -> Self {
        [b.min[0], b.min[1], b.max[0], b.max[1]]
    }
}

impl Bounds {
    pub fn square(side: f64) -> Self {
        Bounds {
            min: [0.0, 0.0],
            max: [side, side],
        }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }
}

fn one() -> usize {
    1
}

fn fifty() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub n_agents: usize,
    pub bounds: Bounds,
    /// Phase intervals in recorded-step units.
    pub schedule: Vec<PhaseInterval>,
    pub seed: u64,
    pub dataset: Dataset,
    /// Raw simulator steps between consecutive records.
    #[serde(default = "one")]
    pub stride: usize,
    /// Objective measure, one value per `objective_stride` raw steps.
    #[serde(default)]
    pub objective: Vec<f64>,
    #[serde(default = "fifty")]
    pub objective_stride: usize,
    /// Per-agent group label (walking direction for pedestrians).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct StepRecord {
    t: usize,
    agents: Vec<State>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentTrace {
    pub header: TraceHeader,
    pub steps: Vec<Vec<State>>,
}

impl AgentTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn n_agents(&self) -> usize {
        self.header.n_agents
    }

    /// Change points implied by the schedule: the first step of every
    /// interval after the first.
    pub fn schedule_change_points(&self) -> Vec<usize> {
        self.header.schedule.iter().skip(1).map(|p| p.start).collect()
    }

    pub fn phase_at(&self, t: usize) -> Option<Phase> {
        self.header
            .schedule
            .iter()
            .find(|p| p.start <= t && t < p.end)
            .map(|p| p.phase)
    }

    /// JSONL: a header line followed by one `{"t", "agents"}` line per step.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        serde_json::to_writer(&mut out, &self.header)?;
        out.write_all(b"\n").map_err(io)?;
        for (k, agents) in self.steps.iter().enumerate() {
            let rec = StepRecord {
                t: k * self.header.stride,
                agents: agents.clone(),
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Trace(format!("{} is empty", path.display())))?
            .map_err(|e| Error::io(path, e))?;
        let header: TraceHeader = serde_json::from_str(&header_line)?;
        let mut steps = Vec::new();
        for line in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: StepRecord = serde_json::from_str(&line)?;
            if rec.agents.len() != header.n_agents {
                return Err(Error::Trace(format!(
                    "step {} has {} agents, header says {}",
                    rec.t,
                    rec.agents.len(),
                    header.n_agents
                )));
            }
            if rec.t != steps.len() * header.stride {
                return Err(Error::Trace(format!(
                    "expected step {}, found {}",
                    steps.len() * header.stride,
                    rec.t
                )));
            }
            steps.push(rec.agents);
        }
        Ok(AgentTrace { header, steps })
    }
}

/// Keeps every `k`-th record. Schedule boundaries move to `ceil(b / k)` so
/// a phase never appears to start earlier than it did.
pub fn downsample(trace: &AgentTrace, k: usize) -> AgentTrace {
    assert!(k >= 1, "downsampling stride must be at least 1");
    if k == 1 {
        return trace.clone();
    }
    let steps: Vec<Vec<State>> = trace.steps.iter().step_by(k).cloned().collect();
    let schedule = trace
        .header
        .schedule
        .iter()
        .map(|p| PhaseInterval {
            start: p.start.div_ceil(k),
            end: p.end.div_ceil(k),
            phase: p.phase,
        })
        .filter(|p| p.end > p.start)
        .collect();
    AgentTrace {
        header: TraceHeader {
            schedule,
            stride: trace.header.stride * k,
            ..trace.header.clone()
        },
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_trace(n_steps: usize, boundary: usize) -> AgentTrace {
        AgentTrace {
            header: TraceHeader {
                n_agents: 1,
                bounds: Bounds::square(10.0),
                schedule: vec![
                    PhaseInterval { start: 0, end: boundary, phase: Phase::Normal },
                    PhaseInterval { start: boundary, end: n_steps, phase: Phase::Emergent },
                ],
                seed: 0,
                dataset: Dataset::Flock,
                stride: 1,
                objective: vec![],
                objective_stride: 50,
                groups: vec![],
            },
            steps: (0..n_steps).map(|t| vec![[t as f64, 0.0, 1.0, 0.0]]).collect(),
        }
    }

    #[test]
    fn downsample_identity_and_stride() {
        let tr = toy_trace(10, 7);
        assert_eq!(downsample(&tr, 1), tr);
        let xs: Vec<f64> = downsample(&tr, 5).steps.iter().map(|s| s[0][0]).collect();
        assert_eq!(xs, vec![0.0, 5.0]);

        let tr = toy_trace(12, 7);
        let ds = downsample(&tr, 5);
        assert_eq!(ds.header.stride, 5);
        // Boundary at raw step 7 lands on downsampled step ceil(7/5) = 2.
        assert_eq!(ds.header.schedule[1].start, 2);
        assert_eq!(ds.header.schedule[0].end, 2);
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.jsonl");
        let tr = downsample(&toy_trace(12, 7), 3);
        tr.write_jsonl(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for key in ["n_agents", "bounds", "schedule", "seed", "dataset"] {
            assert!(header.get(key).is_some(), "header lacks {key}");
        }
        assert_eq!(header["schedule"][1], serde_json::json!([3, 4, "emergent"]));
        let second: serde_json::Value = serde_json::from_str(text.lines().nth(2).unwrap()).unwrap();
        assert_eq!(second["t"], 3);
        assert_eq!(AgentTrace::read_jsonl(&path).unwrap(), tr);
    }

    #[test]
    fn empty_trace_has_valid_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        let mut tr = toy_trace(0, 0);
        tr.header.schedule.clear();
        tr.write_jsonl(&path).unwrap();
        let back = AgentTrace::read_jsonl(&path).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.header, tr.header);
    }
}
