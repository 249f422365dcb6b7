use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent_detect::ScoreSeries;
use crate::dyngraph::{assign_region, build_region_grid, AgentTrace, Bounds, RegionGrid};
use crate::error::{Error, Result};

/// Region states `values[t][m]`: the summed scores of the agents inside
/// region `m` at step `t`, on an `n × n` grid over `bounds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSeries {
    pub n: usize,
    pub bounds: Bounds,
    pub values: Vec<Vec<f64>>,
}

impl RegionSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn n_regions(&self) -> usize {
        self.n * self.n
    }

    pub fn grid(&self) -> RegionGrid {
        build_region_grid(self.bounds, self.n)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(f);
        let io = |e| Error::io(path, e);
        let b = &self.bounds;
        writeln!(out, "# n={} bounds={},{},{},{}", self.n, b.min[0], b.min[1], b.max[0], b.max[1]).map_err(io)?;
        writeln!(out, "t,region_id,y").map_err(io)?;
        for (t, row) in self.values.iter().enumerate() {
            for (m, y) in row.iter().enumerate() {
                writeln!(out, "{t},{m},{y}").map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(f).lines();
        let bad = |what: &str| Error::Trace(format!("{}: {what}", path.display()));
        let head = lines
            .next()
            .ok_or_else(|| bad("empty file"))?
            .map_err(|e| Error::io(path, e))?;
        let (n, bounds) = parse_header(&head).ok_or_else(|| bad("missing grid header"))?;
        let m = n * n;
        let mut values: Vec<Vec<f64>> = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if k == 0 || line.is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let t: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("malformed row"))?;
            let r: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("malformed row"))?;
            let y: f64 = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("malformed row"))?;
            if r >= m || t > values.len() || (t == values.len()) != (r == 0) {
                return Err(bad("rows out of order"));
            }
            if t == values.len() {
                values.push(Vec::with_capacity(m));
            }
            if values[t].len() != r {
                return Err(bad("rows out of order"));
            }
            values[t].push(y);
        }
        if values.iter().any(|v| v.len() != m) {
            return Err(bad("incomplete step"));
        }
        Ok(RegionSeries { n, bounds, values })
    }
}

fn parse_header(line: &str) -> Option<(usize, Bounds)> {
    let rest = line.strip_prefix("# n=")?;
    let (n, b) = rest.split_once(" bounds=")?;
    let v: Vec<f64> = b.split(',').map(|x| x.parse().ok()).collect::<Option<_>>()?;
    if v.len() != 4 {
        return None;
    }
    Some((n.parse().ok()?, Bounds { min: [v[0], v[1]], max: [v[2], v[3]] }))
}

/// Sums each step's agent scores into the grid cell holding the agent.
pub fn coarse_grain(scores: &ScoreSeries, trace: &AgentTrace, n: usize) -> Result<RegionSeries> {
    if n == 0 {
        return Err(Error::Config("grid must have at least one region per side".into()));
    }
    if scores.len() != trace.len() || scores.n_agents != trace.n_agents() {
        return Err(Error::InputShape(format!(
            "scores are {} x {}, trace is {} x {}",
            scores.len(),
            scores.n_agents,
            trace.len(),
            trace.n_agents()
        )));
    }
    let grid = build_region_grid(trace.header.bounds, n);
    let values = scores
        .scores
        .iter()
        .zip(&trace.steps)
        .map(|(s, states)| {
            let mut y = vec![0.0; n * n];
            for (score, st) in s.iter().zip(states) {
                y[assign_region([st[0], st[1]], &grid)?] += score;
            }
            Ok(y)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionSeries { n, bounds: trace.header.bounds, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyngraph::{Dataset, TraceHeader};
    use proptest::prelude::*;

    fn trace(steps: Vec<Vec<[f64; 4]>>) -> AgentTrace {
        AgentTrace {
            header: TraceHeader {
                n_agents: steps[0].len(),
                bounds: Bounds::square(10.0),
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
    fn coarse_grain_examples() {
        let tr = trace(vec![vec![[1.0, 1.0, 0.0, 0.0], [2.0, 2.0, 0.0, 0.0], [3.0, 1.0, 0.0, 0.0], [9.0, 9.0, 0.0, 0.0]]]);
        let s = ScoreSeries { n_agents: 4, scores: vec![vec![0.2, 0.3, 0.5, 0.7]] };
        let r = coarse_grain(&s, &tr, 2).unwrap();
        assert_eq!(r.values[0], vec![1.0, 0.0, 0.0, 0.7]);
        assert!(coarse_grain(&s, &tr, 0).is_err());
        let short = ScoreSeries { n_agents: 4, scores: vec![] };
        assert!(coarse_grain(&short, &tr, 2).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let r = RegionSeries { n: 2, bounds: Bounds::square(5.0), values: vec![vec![0.0, 1.5, 0.25, 0.0], vec![1.0; 4]] };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        r.write_csv(&p).unwrap();
        assert_eq!(RegionSeries::read_csv(&p).unwrap(), r);
    }

    proptest! {
        /// Dyadic scores make floating-point sums exact in any order.
        #[test]
        fn mass_is_conserved(
            agents in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0, 0u32..=64), 1..40),
            n in 1usize..6,
        ) {
            let states: Vec<[f64; 4]> = agents.iter().map(|a| [a.0, a.1, 0.0, 0.0]).collect();
            let scores: Vec<f64> = agents.iter().map(|a| f64::from(a.2) / 64.0).collect();
            let total: f64 = scores.iter().sum();
            let s = ScoreSeries { n_agents: agents.len(), scores: vec![scores] };
            let r = coarse_grain(&s, &trace(vec![states]), n).unwrap();
            prop_assert_eq!(r.values[0].iter().sum::<f64>(), total);
            prop_assert!(r.values[0].iter().all(|&y| y >= 0.0));
        }
    }
}
