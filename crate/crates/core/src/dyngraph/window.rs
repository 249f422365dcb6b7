use super::neighbors::DynamicGraph;
use super::trace::{AgentTrace, State};
use crate::error::{Error, Result};

/// The steps `[tau - w + 1, tau]` of a trace together with their
/// neighborhoods.
#[derive(Clone, Copy, Debug)]
pub struct WindowView<'a> {
    trace: &'a AgentTrace,
    graph: &'a DynamicGraph,
    tau: usize,
    w: usize,
}

impl<'a> WindowView<'a> {
    pub fn new(trace: &'a AgentTrace, graph: &'a DynamicGraph, tau: usize, w: usize) -> Result<Self> {
        if w == 0 {
            return Err(Error::Config("window length must be at least 1".into()));
        }
        if graph.len() != trace.len() {
            return Err(Error::InputShape(format!(
                "graph has {} steps, trace has {}",
                graph.len(),
                trace.len()
            )));
        }
        if tau >= trace.len() || tau + 1 < w {
            return Err(Error::InputShape(format!(
                "window [{}, {tau}] outside trace of length {}",
                (tau + 1) as isize - w as isize,
                trace.len()
            )));
        }
        Ok(WindowView { trace, graph, tau, w })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn w(&self) -> usize {
        self.w
    }

    /// First step of the window, `tau(w) = tau - w + 1`.
    pub fn start(&self) -> usize {
        self.tau + 1 - self.w
    }

    pub fn n_agents(&self) -> usize {
        self.trace.n_agents()
    }

    /// States at the `k`-th step of the window (`k = 0` is the oldest).
    pub fn states(&self, k: usize) -> &'a [State] {
        &self.trace.steps[self.start() + k]
    }

    pub fn neighbors(&self, k: usize) -> &'a [Vec<usize>] {
        self.graph.at(self.start() + k)
    }

    /// Agent `j`'s own state slice over the window.
    pub fn agent_states(&self, j: usize) -> Vec<State> {
        (0..self.w).map(|k| self.states(k)[j]).collect()
    }
}
