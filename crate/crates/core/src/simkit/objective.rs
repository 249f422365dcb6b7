use crate::dyngraph::{AgentTrace, Dataset, State};

fn patch(v: f64, world: usize) -> usize {
    (v.max(0.0).floor() as usize).min(world - 1)
}

/// Number of unit patches containing no agent.
pub fn empty_patches(states: &[State], world: usize) -> usize {
    let mut occupied = vec![false; world * world];
    for s in states {
        occupied[patch(s[1], world) * world + patch(s[0], world)] = true;
    }
    occupied.iter().filter(|&&o| !o).count()
}

/// Number of one-patch-high lateral bands whose occupants share a walking
/// direction in at least `threshold` of cases.
pub fn lane_count(states: &[State], groups: &[u8], world: usize, threshold: f64) -> usize {
    let mut counts = vec![[0usize; 2]; world];
    for (s, &g) in states.iter().zip(groups) {
        counts[patch(s[1], world)][usize::from(g.min(1))] += 1;
    }
    counts
        .iter()
        .filter(|c| {
            let total = c[0] + c[1];
            total > 0 && c[0].max(c[1]) as f64 >= threshold * total as f64
        })
        .count()
}

/// Objective measure sampled every `objective_stride` raw steps, computed
/// from the recorded states. The record stride must divide the objective
/// stride.
pub fn objective_measure(trace: &AgentTrace, threshold: f64) -> Vec<f64> {
    let h = &trace.header;
    assert_eq!(h.objective_stride % h.stride, 0, "record stride must divide objective stride");
    let every = h.objective_stride / h.stride;
    let world = h.bounds.width().round() as usize;
    trace
        .steps
        .iter()
        .step_by(every)
        .map(|s| match h.dataset {
            Dataset::Flock => empty_patches(s, world) as f64,
            Dataset::Pedestrian => lane_count(s, &h.groups, world, threshold) as f64,
        })
        .collect()
}
