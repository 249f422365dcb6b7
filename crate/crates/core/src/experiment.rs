//! Whole-experiment driver: simulate train/validation/test runs, label
//! them, train both encoder levels, and evaluate the full detector, the
//! agent-only ablation, and the baseline on the test runs.

use std::time::Instant;

use ndarray::Axis;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent_detect::{score_trace, ScoreSeries};
use crate::agent_model::{train_agent, AgentHyper, AgentModel, TrainRecord};
use crate::baseline_detect::{calibrate_baseline, detect_global_baseline, feedback_counts, run_baseline, BaselineCalibration, BaselineConfig, BaselineRun};
use crate::dyngraph::{AgentTrace, DynamicGraph, WindowView};
use crate::error::{Error, Result};
use crate::evalkit::{label_offline, search_threshold, MetricsReport, RunMetrics, ThresholdChoice, ThresholdRun, TimeAxis};
use crate::simkit::{simulate, SimConfig};
use crate::system_model::{coarse_grain, detect_change_points, score_system, train_system, RegionSeries, SystemHyper};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        SplitSizes { train: 2, val: 2, test: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Simulator settings shared by every run; the seed is replaced per run.
    pub sim: SimConfig,
    #[serde(default)]
    pub runs: SplitSizes,
    /// Raw steps between recorded states fed to the detectors.
    #[serde(default = "default_detect_stride")]
    pub detect_stride: usize,
    #[serde(default)]
    pub agent: AgentHyper,
    #[serde(default)]
    pub system: SystemHyper,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub neighbor_budget: Option<usize>,
    #[serde(default = "default_theta")]
    pub theta: usize,
    #[serde(default)]
    pub baseline: BaselineConfig,
}

fn default_detect_stride() -> usize {
    5
}
fn default_grid() -> usize {
    20
}
fn default_alpha() -> f64 {
    0.05
}
fn default_theta() -> usize {
    20
}

impl ExperimentConfig {
    pub fn new(sim: SimConfig) -> Self {
        ExperimentConfig {
            sim,
            runs: SplitSizes::default(),
            detect_stride: default_detect_stride(),
            agent: AgentHyper::default(),
            system: SystemHyper::default(),
            grid: default_grid(),
            alpha: default_alpha(),
            neighbor_budget: None,
            theta: default_theta(),
            baseline: BaselineConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.agent.validate()?;
        self.system.validate()?;
        if self.detect_stride == 0 || self.sim.objective_stride % self.detect_stride != 0 {
            return Err(Error::Config(format!(
                "detect stride {} must divide the objective stride {}",
                self.detect_stride, self.sim.objective_stride
            )));
        }
        if self.runs.train == 0 || self.runs.val == 0 || self.runs.test == 0 {
            return Err(Error::Config("every split needs at least one run".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.grid == 0 {
            return Err(Error::Config("grid must be at least 1".into()));
        }
        Ok(())
    }

    pub fn axis(&self) -> TimeAxis {
        TimeAxis { detect_stride: self.detect_stride, eval_stride: self.sim.objective_stride }
    }

    /// Per-run simulator config for run `index` of an experiment seed.
    pub fn run_sim(&self, seed: u64, index: usize) -> SimConfig {
        let mut c = self.sim.clone();
        c.seed = seed.wrapping_mul(1_000).wrapping_add(index as u64);
        c.record_stride = self.detect_stride;
        c
    }

    pub fn splits(&self) -> Vec<Split> {
        let r = &self.runs;
        std::iter::repeat_n(Split::Train, r.train)
            .chain(std::iter::repeat_n(Split::Val, r.val))
            .chain(std::iter::repeat_n(Split::Test, r.test))
            .collect()
    }
}

/// A simulated run with its offline labels on the evaluation axis.
#[derive(Clone, Debug)]
pub struct LabeledRun {
    pub name: String,
    pub split: Split,
    pub trace: AgentTrace,
    pub truth: Vec<usize>,
    pub eval_len: usize,
}

/// Labels the objective measure with as many change points as the schedule
/// plants.
pub fn label_trace(trace: &AgentTrace) -> Result<Vec<usize>> {
    let k = trace.schedule_change_points().len();
    label_offline(&trace.header.objective, k)
}

pub fn simulate_runs(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<LabeledRun>> {
    cfg.validate()?;
    cfg.splits()
        .into_par_iter()
        .enumerate()
        .map(|(i, split)| {
            let trace = simulate(&cfg.run_sim(seed, i))?;
            let truth = label_trace(&trace)?;
            let eval_len = trace.header.objective.len();
            Ok(LabeledRun { name: format!("seed{seed}-run{i}"), split, trace, truth, eval_len })
        })
        .collect()
}

/// Average over representation dimensions of the standard deviation across
/// agents of window-pooled representations, averaged over `windows` evenly
/// spaced windows of the trace.
pub fn representation_spread(model: &AgentModel, trace: &AgentTrace, windows: usize) -> Result<f64> {
    let w = model.hyper.window;
    if trace.len() < w || windows == 0 {
        return Err(Error::InputShape("trace shorter than the window".into()));
    }
    let graph = DynamicGraph::build(trace, model.hyper.delta);
    let span = trace.len() - w;
    let mut total = 0.0;
    for k in 0..windows {
        let tau = w - 1 + span * k / windows.max(1);
        let h = model.represent(&WindowView::new(trace, &graph, tau, w)?)?;
        let pooled = h.mean_axis(Axis(1)).expect("window");
        total += pooled.std_axis(Axis(0), 0.0).mean().unwrap_or(0.0);
    }
    Ok(total / windows as f64)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub seed: u64,
    pub hstcl: MetricsReport,
    pub agent_only: MetricsReport,
    pub baseline: MetricsReport,
    pub system_threshold: ThresholdChoice,
    pub agent_threshold: ThresholdChoice,
    pub baseline_calibration: BaselineCalibration,
    /// Pooled-representation spread after training, on the first test run.
    pub representation_spread: f64,
    pub agent_log_tail: Vec<TrainRecord>,
    pub system_log_tail: Vec<TrainRecord>,
    pub test_series: Vec<RunSeries>,
    /// Wall-clock seconds per stage, in execution order.
    pub timings: Vec<(String, f64)>,
}

fn evaluate(
    method: &str,
    cfg: &ExperimentConfig,
    threshold: f64,
    runs: &[&LabeledRun],
    detections: &[Vec<usize>],
) -> Result<MetricsReport> {
    let metrics = runs
        .iter()
        .zip(detections)
        .map(|(r, det)| RunMetrics::evaluate(r.name.clone(), r.eval_len, &r.truth, det, cfg.theta))
        .collect::<Result<Vec<_>>>()?;
    let dataset = serde_json::to_value(cfg.sim.dataset)?.as_str().unwrap_or("").to_string();
    Ok(MetricsReport::new(method, dataset, cfg.theta, threshold, metrics))
}

/// Picks the threshold on validation runs and detects on the test series,
/// returning detections on the evaluation axis.
pub fn select_and_detect(
    val: &[ThresholdRun],
    test: &[(&[f64], usize)],
    axis: TimeAxis,
    theta: usize,
) -> Result<(ThresholdChoice, Vec<Vec<usize>>)> {
    let choice = search_threshold(val, axis, theta)?;
    let detected = test
        .iter()
        .map(|&(s, eval_len)| axis.map_points(&detect_change_points(s, choice.threshold), eval_len))
        .collect();
    Ok((choice, detected))
}

/// Calibrates the baseline on validation runs `(run, truth, eval_len)` and
/// detects on test runs `(run, eval_len)`.
pub fn calibrate_and_detect_baseline(
    val: &[(&BaselineRun, &[usize], usize)],
    test: &[(&BaselineRun, usize)],
    cfg: &ExperimentConfig,
    baseline: &BaselineConfig,
) -> Result<(BaselineCalibration, Vec<Vec<usize>>)> {
    let per_eval = cfg.sim.objective_stride / cfg.detect_stride;
    let calibration = calibrate_baseline(val, baseline, per_eval, cfg.theta)?;
    let detected = test
        .iter()
        .map(|&(b, eval_len)| {
            let counts = feedback_counts(b, calibration.feedback_threshold, per_eval);
            detect_global_baseline(&counts, baseline.rolling_window, calibration.z)
                .into_iter()
                .filter(|&p| p < eval_len)
                .collect()
        })
        .collect();
    Ok((calibration, detected))
}

/// Score series of one test run on the evaluation axis inputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSeries {
    pub name: String,
    pub truth: Vec<usize>,
    pub system: Vec<f64>,
    pub agent_mean: Vec<f64>,
}

/// Runs every stage for one experiment seed.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentOutcome> {
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str| {
        timings.push((name.to_string(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };
    let runs = simulate_runs(cfg, seed)?;
    lap("simulate");
    let of = |s: Split| runs.iter().filter(|r| r.split == s).collect::<Vec<_>>();
    let (train, val, test) = (of(Split::Train), of(Split::Val), of(Split::Test));
    let axis = cfg.axis();

    let agent_hyper = AgentHyper { seed, ..cfg.agent.clone() };
    let train_traces: Vec<AgentTrace> = train.iter().map(|r| r.trace.clone()).collect();
    let (agent, agent_log) = train_agent(&train_traces, &agent_hyper)?;
    lap("train_agent");

    let scores: Vec<ScoreSeries> = runs
        .par_iter()
        .enumerate()
        .map(|(i, r)| score_trace(&agent, &r.trace, cfg.alpha, cfg.neighbor_budget, seed ^ i as u64))
        .collect::<Result<_>>()?;
    lap("score_agents");
    let regions: Vec<RegionSeries> = runs
        .par_iter()
        .zip(&scores)
        .map(|(r, s)| coarse_grain(s, &r.trace, cfg.grid))
        .collect::<Result<_>>()?;
    let index = |r: &LabeledRun| runs.iter().position(|x| x.name == r.name).expect("own run");

    let system_hyper = SystemHyper { seed, ..cfg.system.clone() };
    let train_regions: Vec<RegionSeries> = train.iter().map(|r| regions[index(r)].clone()).collect();
    let (system, system_log) = train_system(&train_regions, &system_hyper)?;
    lap("train_system");

    let eval_runs: Vec<&LabeledRun> = val.iter().chain(&test).copied().collect();
    let system_scores: Vec<Vec<f64>> = eval_runs
        .par_iter()
        .map(|r| score_system(&system, &regions[index(r)]))
        .collect::<Result<_>>()?;
    let (val_sys, test_sys) = system_scores.split_at(val.len());
    lap("score_system");

    fn tune<'a>(runs: &[&'a LabeledRun], series: &'a [Vec<f64>]) -> Vec<ThresholdRun<'a>> {
        runs.iter()
            .zip(series)
            .map(|(r, s)| ThresholdRun { scores: s, truth: &r.truth, eval_len: r.eval_len })
            .collect()
    }
    fn apply<'a>(runs: &[&LabeledRun], series: &'a [Vec<f64>]) -> Vec<(&'a [f64], usize)> {
        series.iter().zip(runs).map(|(s, r)| (s.as_slice(), r.eval_len)).collect()
    }

    let (system_threshold, hstcl_det) = select_and_detect(&tune(&val, val_sys), &apply(&test, test_sys), axis, cfg.theta)?;
    let hstcl = evaluate("HSTCL", cfg, system_threshold.threshold, &test, &hstcl_det)?;

    let mean_scores: Vec<Vec<f64>> = eval_runs.iter().map(|r| scores[index(r)].mean_series()).collect();
    let (val_mean, test_mean) = mean_scores.split_at(val.len());
    let (agent_threshold, agent_det) = select_and_detect(&tune(&val, val_mean), &apply(&test, test_mean), axis, cfg.theta)?;
    let agent_only = evaluate("HSTCL_Agent", cfg, agent_threshold.threshold, &test, &agent_det)?;

    let baseline_cfg = BaselineConfig { seed, ..cfg.baseline.clone() };
    let baseline_runs: Vec<_> = eval_runs
        .par_iter()
        .map(|r| run_baseline(&r.trace, &baseline_cfg))
        .collect::<Result<_>>()?;
    let (val_b, test_b) = baseline_runs.split_at(val.len());
    let cal_input: Vec<_> = val_b.iter().zip(&val).map(|(b, r)| (b, r.truth.as_slice(), r.eval_len)).collect();
    let test_input: Vec<_> = test_b.iter().zip(&test).map(|(b, r)| (b, r.eval_len)).collect();
    let (calibration, baseline_det) = calibrate_and_detect_baseline(&cal_input, &test_input, cfg, &baseline_cfg)?;
    let baseline = evaluate("DETect", cfg, calibration.z, &test, &baseline_det)?;
    lap("baseline");

    let test_series = test
        .iter()
        .zip(test_sys.iter().zip(test_mean))
        .map(|(r, (sys, mean))| RunSeries {
            name: r.name.clone(),
            truth: r.truth.clone(),
            system: sys.clone(),
            agent_mean: mean.clone(),
        })
        .collect();
    let spread = representation_spread(&agent, &test[0].trace, 8)?;
    let tail = |log: &[TrainRecord]| log[log.len().saturating_sub(10)..].to_vec();
    Ok(ExperimentOutcome {
        seed,
        hstcl,
        agent_only,
        baseline,
        system_threshold,
        agent_threshold,
        baseline_calibration: calibration,
        representation_spread: spread,
        agent_log_tail: tail(&agent_log),
        system_log_tail: tail(&system_log),
        test_series,
        timings,
    })
}
