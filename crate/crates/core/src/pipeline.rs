//! File-based stage runner behind the command-line tool.
//!
//! Each seed gets its own directory under `out_dir`. A stage reads upstream
//! artifacts from there, writes its own, and leaves a manifest with the
//! SHA-256 of every input and output plus its wall time.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::agent_detect::{score_trace, ScoreSeries};
use crate::agent_model::{train_agent, write_train_log, AgentHyper, AgentModel};
use crate::baseline_detect::{run_baseline, BaselineConfig};
use crate::dyngraph::{AgentTrace, Dataset};
use crate::error::{Error, Result};
use crate::evalkit::{mean_std, MetricsReport, RunMetrics, ThresholdRun};
use crate::experiment::{calibrate_and_detect_baseline, label_trace, select_and_detect, ExperimentConfig, Split};
use crate::simkit::{simulate, SimConfig};
use crate::system_model::{coarse_grain, detect_change_points, score_system, train_system, RegionSeries, SystemHyper, SystemModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl PipelineConfig {
    pub fn preset(dataset: Dataset) -> Self {
        PipelineConfig {
            experiment: ExperimentConfig::new(SimConfig::preset(dataset, 0)),
            seeds: vec![0],
            out_dir: PathBuf::from("runs"),
        }
    }

    /// Builds a config from an optional (possibly partial) JSON file and
    /// `dotted.path=value` overrides, on top of the preset for the chosen
    /// dataset. Override values are parsed as JSON, falling back to a string.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut user = match path {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
            None => Value::Object(Default::default()),
        };
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut user, key, value)?;
        }
        let dataset: Dataset = match user.pointer("/sim/dataset") {
            Some(d) => serde_json::from_value(d.clone())?,
            None => Dataset::Flock,
        };
        let mut merged = serde_json::to_value(Self::preset(dataset))?;
        merge(&mut merged, user);
        let cfg: PipelineConfig = serde_json::from_value(merged)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        Ok(())
    }

    pub fn seed_dir(&self, seed: u64) -> PathBuf {
        self.out_dir.join(format!("seed-{seed}"))
    }

    fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }
}

fn set_path(root: &mut Value, dotted: &str, value: Value) -> Result<()> {
    let mut node = root;
    let keys: Vec<&str> = dotted.split('.').collect();
    for (i, k) in keys.iter().enumerate() {
        if k.is_empty() {
            return Err(Error::Config(format!("empty segment in override key `{dotted}`")));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("`{}` is not an object", keys[..i].join("."))))?;
        if i + 1 == keys.len() {
            obj.insert(k.to_string(), value);
            return Ok(());
        }
        node = obj.entry(k.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    Label,
    TrainAgent,
    ScoreAgents,
    CoarseGrain,
    TrainSystem,
    Detect,
    DetectBaseline,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Simulate,
        Stage::Label,
        Stage::TrainAgent,
        Stage::ScoreAgents,
        Stage::CoarseGrain,
        Stage::TrainSystem,
        Stage::Detect,
        Stage::DetectBaseline,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Label => "label",
            Stage::TrainAgent => "train-agent",
            Stage::ScoreAgents => "score-agents",
            Stage::CoarseGrain => "coarse-grain",
            Stage::TrainSystem => "train-system",
            Stage::Detect => "detect",
            Stage::DetectBaseline => "detect-baseline",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Relative path to SHA-256 for every file read.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub name: String,
    pub index: usize,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub name: String,
    pub split: Split,
    pub truth: Vec<usize>,
    pub eval_len: usize,
}

/// Detections of one method on the test runs, on the evaluation axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detections {
    pub method: String,
    pub threshold: f64,
    pub validation_f1: f64,
    pub runs: BTreeMap<String, Vec<usize>>,
    #[serde(default)]
    pub metadata: serde_json::Map<String, Value>,
}

const METHODS: [(&str, &str); 3] = [("HSTCL", "hstcl"), ("HSTCL_Agent", "hstcl_agent"), ("DETect", "detect")];

/// Tracks what a stage reads and writes inside one seed directory.
struct StageIo<'a> {
    dir: &'a Path,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl<'a> StageIo<'a> {
    fn new(dir: &'a Path) -> Self {
        StageIo { dir, inputs: Vec::new(), outputs: Vec::new() }
    }

    /// Path of an upstream artifact, which must exist.
    fn input(&mut self, rel: &str, producer: Stage) -> Result<PathBuf> {
        let path = self.dir.join(rel);
        if !path.is_file() {
            return Err(Error::Dependency { stage: producer.name(), path });
        }
        self.inputs.push(rel.to_string());
        Ok(path)
    }

    fn output(&mut self, rel: &str) -> Result<PathBuf> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.outputs.push(rel.to_string());
        Ok(path)
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&mut self, rel: &str, producer: Stage) -> Result<T> {
        let path = self.input(rel, producer)?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let path = self.output(rel)?;
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn finish(self, stage: Stage, seed: u64, config_sha256: String, started: Instant) -> Result<Manifest> {
        let digest = |names: &[String]| -> Result<BTreeMap<String, String>> {
            names
                .iter()
                .map(|rel| Ok((rel.clone(), file_sha256(&self.dir.join(rel))?)))
                .collect()
        };
        let manifest = Manifest {
            stage: stage.name().to_string(),
            seed,
            config_sha256,
            inputs: digest(&self.inputs)?,
            outputs: digest(&self.outputs)?,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        let path = self.dir.join("manifests").join(format!("{}.json", stage.name()));
        std::fs::create_dir_all(path.parent().expect("has parent")).map_err(|e| Error::io(&path, e))?;
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn trace_path(name: &str) -> String {
    format!("traces/{name}.jsonl")
}

/// Runs one stage for every configured seed.
pub fn run_stage(cfg: &PipelineConfig, stage: Stage) -> Result<Vec<Manifest>> {
    cfg.validate()?;
    let hash = cfg.hash()?;
    cfg.seeds
        .iter()
        .map(|&seed| {
            let dir = cfg.seed_dir(seed);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let started = Instant::now();
            let mut io = StageIo::new(&dir);
            match stage {
                Stage::Simulate => simulate_stage(cfg, seed, &mut io)?,
                Stage::Label => label_stage(&mut io)?,
                Stage::TrainAgent => train_agent_stage(cfg, seed, &mut io)?,
                Stage::ScoreAgents => score_agents_stage(cfg, seed, &mut io)?,
                Stage::CoarseGrain => coarse_grain_stage(cfg, &mut io)?,
                Stage::TrainSystem => train_system_stage(cfg, seed, &mut io)?,
                Stage::Detect => detect_stage(cfg, &mut io)?,
                Stage::DetectBaseline => detect_baseline_stage(cfg, seed, &mut io)?,
                Stage::Evaluate => evaluate_stage(cfg, &mut io)?,
            }
            io.finish(stage, seed, hash.clone(), started)
        })
        .collect()
}

/// Every stage in order.
pub fn run_all(cfg: &PipelineConfig) -> Result<Vec<Manifest>> {
    let mut out = Vec::new();
    for stage in Stage::ALL {
        out.extend(run_stage(cfg, stage)?);
    }
    Ok(out)
}

fn simulate_stage(cfg: &PipelineConfig, seed: u64, io: &mut StageIo) -> Result<()> {
    let exp = &cfg.experiment;
    let runs: Vec<RunEntry> = exp
        .splits()
        .into_iter()
        .enumerate()
        .map(|(index, split)| RunEntry { name: format!("{}-{index}", split_name(split)), index, split })
        .collect();
    let paths: Vec<PathBuf> = runs.iter().map(|r| io.output(&trace_path(&r.name))).collect::<Result<_>>()?;
    runs.par_iter().zip(&paths).try_for_each(|(r, path)| {
        simulate(&exp.run_sim(seed, r.index))?.write_jsonl(path)
    })?;
    io.write_json("runs.json", &runs)
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
    }
}

fn read_runs(io: &mut StageIo) -> Result<Vec<RunEntry>> {
    io.read_json("runs.json", Stage::Simulate)
}

fn read_traces(io: &mut StageIo, runs: &[&RunEntry]) -> Result<Vec<AgentTrace>> {
    let paths: Vec<PathBuf> = runs
        .iter()
        .map(|r| io.input(&trace_path(&r.name), Stage::Simulate))
        .collect::<Result<_>>()?;
    paths.par_iter().map(|p| AgentTrace::read_jsonl(p)).collect()
}

fn label_stage(io: &mut StageIo) -> Result<()> {
    let runs = read_runs(io)?;
    let traces = read_traces(io, &runs.iter().collect::<Vec<_>>())?;
    let labels: Vec<LabelEntry> = runs
        .iter()
        .zip(&traces)
        .map(|(r, t)| {
            Ok(LabelEntry {
                name: r.name.clone(),
                split: r.split,
                truth: label_trace(t)?,
                eval_len: t.header.objective.len(),
            })
        })
        .collect::<Result<_>>()?;
    io.write_json("labels.json", &labels)
}

fn of_split(runs: &[RunEntry], split: Split) -> Vec<&RunEntry> {
    runs.iter().filter(|r| r.split == split).collect()
}

fn train_agent_stage(cfg: &PipelineConfig, seed: u64, io: &mut StageIo) -> Result<()> {
    let runs = read_runs(io)?;
    let traces = read_traces(io, &of_split(&runs, Split::Train))?;
    let hyper = AgentHyper { seed, ..cfg.experiment.agent.clone() };
    let (model, log) = train_agent(&traces, &hyper)?;
    model.save(&io.output("agent/checkpoint.json")?)?;
    write_train_log(&io.output("agent/train_log.csv")?, &log, ["L_T", "L_S", "L_Agent"])
}

fn score_agents_stage(cfg: &PipelineConfig, seed: u64, io: &mut StageIo) -> Result<()> {
    let runs = read_runs(io)?;
    let model = AgentModel::load(&io.input("agent/checkpoint.json", Stage::TrainAgent)?)?;
    let traces = read_traces(io, &runs.iter().collect::<Vec<_>>())?;
    let exp = &cfg.experiment;
    let paths: Vec<PathBuf> = runs
        .iter()
        .map(|r| io.output(&format!("scores/{}.csv", r.name)))
        .collect::<Result<_>>()?;
    runs.par_iter().zip(&traces).zip(&paths).try_for_each(|((r, t), path)| {
        score_trace(&model, t, exp.alpha, exp.neighbor_budget, seed ^ r.index as u64)?.write_csv(path)
    })
}

fn coarse_grain_stage(cfg: &PipelineConfig, io: &mut StageIo) -> Result<()> {
    let runs = read_runs(io)?;
    let traces = read_traces(io, &runs.iter().collect::<Vec<_>>())?;
    for (r, t) in runs.iter().zip(&traces) {
        let scores = ScoreSeries::read_csv(&io.input(&format!("scores/{}.csv", r.name), Stage::ScoreAgents)?)?;
        coarse_grain(&scores, t, cfg.experiment.grid)?.write_csv(&io.output(&format!("regions/{}.csv", r.name))?)?;
    }
    Ok(())
}

fn read_regions(io: &mut StageIo, runs: &[&RunEntry]) -> Result<Vec<RegionSeries>> {
    runs.iter()
        .map(|r| RegionSeries::read_csv(&io.input(&format!("regions/{}.csv", r.name), Stage::CoarseGrain)?))
        .collect()
}

fn train_system_stage(cfg: &PipelineConfig, seed: u64, io: &mut StageIo) -> Result<()> {
    let runs = read_runs(io)?;
    let regions = read_regions(io, &of_split(&runs, Split::Train))?;
    let hyper = SystemHyper { seed, ..cfg.experiment.system.clone() };
    let (model, log) = train_system(&regions, &hyper)?;
    model.save(&io.output("system/checkpoint.json")?)?;
    write_train_log(&io.output("system/train_log.csv")?, &log, ["L_ST", "L_SS", "L_System"])
}

fn write_series(path: &Path, series: &[f64]) -> Result<()> {
    let mut out = String::from("t,score\n");
    for (t, s) in series.iter().enumerate() {
        out.push_str(&format!("{t},{s}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn read_series(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .nth(1)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::InputShape(format!("bad score row `{l}` in {}", path.display())))
        })
        .collect()
}

fn labels_by_name(io: &mut StageIo) -> Result<BTreeMap<String, LabelEntry>> {
    let labels: Vec<LabelEntry> = io.read_json("labels.json", Stage::Label)?;
    Ok(labels.into_iter().map(|l| (l.name.clone(), l)).collect())
}

fn label_of<'l>(labels: &'l BTreeMap<String, LabelEntry>, name: &str) -> Result<&'l LabelEntry> {
    labels
        .get(name)
        .ok_or_else(|| Error::Invariant(format!("run {name} has no label; rerun `label`")))
}

/// Thresholds a score series per run on validation and detects on test.
fn threshold_method(
    cfg: &PipelineConfig,
    method: &str,
    val: &[(&LabelEntry, Vec<f64>)],
    test: &[(&LabelEntry, Vec<f64>)],
) -> Result<Detections> {
    let tune: Vec<ThresholdRun> = val
        .iter()
        .map(|(l, s)| ThresholdRun { scores: s, truth: &l.truth, eval_len: l.eval_len })
        .collect();
    let apply: Vec<(&[f64], usize)> = test.iter().map(|(l, s)| (s.as_slice(), l.eval_len)).collect();
    let (choice, detected) = select_and_detect(&tune, &apply, cfg.experiment.axis(), cfg.experiment.theta)?;
    Ok(Detections {
        method: method.to_string(),
        threshold: choice.threshold,
        validation_f1: choice.mean_f1,
        runs: test.iter().zip(detected).map(|((l, _), d)| (l.name.clone(), d)).collect(),
        metadata: Default::default(),
    })
}

fn detect_stage(cfg: &PipelineConfig, io: &mut StageIo) -> Result<()> {
    let runs = read_runs(io)?;
    let labels = labels_by_name(io)?;
    let model = SystemModel::load(&io.input("system/checkpoint.json", Stage::TrainSystem)?)?;
    let eval: Vec<&RunEntry> = runs.iter().filter(|r| r.split != Split::Train).collect();
    let regions = read_regions(io, &eval)?;
    let system: Vec<Vec<f64>> = regions.par_iter().map(|r| score_system(&model, r)).collect::<Result<_>>()?;
    let agent_mean: Vec<Vec<f64>> = eval
        .iter()
        .map(|r| Ok(ScoreSeries::read_csv(&io.input(&format!("scores/{}.csv", r.name), Stage::ScoreAgents)?)?.mean_series()))
        .collect::<Result<_>>()?;

    for ((r, sys), mean) in eval.iter().zip(&system).zip(&agent_mean) {
        write_series(&io.output(&format!("detect/series/hstcl/{}.csv", r.name))?, sys)?;
        write_series(&io.output(&format!("detect/series/hstcl_agent/{}.csv", r.name))?, mean)?;
    }
    for ((method, file), series) in METHODS.iter().take(2).zip([&system, &agent_mean]) {
        let mut val = Vec::new();
        let mut test = Vec::new();
        for (r, s) in eval.iter().zip(series.iter()) {
            let entry = (label_of(&labels, &r.name)?, s.clone());
            if r.split == Split::Val { val.push(entry) } else { test.push(entry) }
        }
        let det = threshold_method(cfg, method, &val, &test)?;
        io.write_json(&format!("detect/{file}.json"), &det)?;
    }
    Ok(())
}

fn detect_baseline_stage(cfg: &PipelineConfig, seed: u64, io: &mut StageIo) -> Result<()> {
    let runs = read_runs(io)?;
    let labels = labels_by_name(io)?;
    let val_runs = of_split(&runs, Split::Val);
    let test_runs = of_split(&runs, Split::Test);
    let baseline_cfg = BaselineConfig { seed, ..cfg.experiment.baseline.clone() };
    let run = |io: &mut StageIo, set: &[&RunEntry]| -> Result<Vec<_>> {
        read_traces(io, set)?.par_iter().map(|t| run_baseline(t, &baseline_cfg)).collect()
    };
    let val_b = run(io, &val_runs)?;
    let test_b = run(io, &test_runs)?;
    let val_input = val_runs
        .iter()
        .zip(&val_b)
        .map(|(r, b)| label_of(&labels, &r.name).map(|l| (b, l.truth.as_slice(), l.eval_len)))
        .collect::<Result<Vec<_>>>()?;
    let test_input = test_runs
        .iter()
        .zip(&test_b)
        .map(|(r, b)| label_of(&labels, &r.name).map(|l| (b, l.eval_len)))
        .collect::<Result<Vec<_>>>()?;
    let (calibration, detected) = calibrate_and_detect_baseline(&val_input, &test_input, &cfg.experiment, &baseline_cfg)?;
    let mut metadata = serde_json::Map::new();
    metadata.insert("feedback_threshold".into(), calibration.feedback_threshold.into());
    metadata.insert("z".into(), calibration.z.into());
    let det = Detections {
        method: "DETect".into(),
        threshold: calibration.z,
        validation_f1: calibration.mean_f1,
        runs: test_runs.iter().zip(detected).map(|(r, d)| (r.name.clone(), d)).collect(),
        metadata,
    };
    io.write_json("detect/detect.json", &det)
}

fn evaluate_stage(cfg: &PipelineConfig, io: &mut StageIo) -> Result<()> {
    let labels = labels_by_name(io)?;
    let exp = &cfg.experiment;
    let dataset = serde_json::to_value(exp.sim.dataset)?.as_str().unwrap_or_default().to_string();
    let mut reports = Vec::new();
    for (_, file) in METHODS {
        let rel = format!("detect/{file}.json");
        if !io.dir.join(&rel).is_file() {
            continue;
        }
        let det: Detections = io.read_json(&rel, Stage::Detect)?;
        let runs = det
            .runs
            .iter()
            .map(|(name, points)| {
                let l = label_of(&labels, name)?;
                RunMetrics::evaluate(name.clone(), l.eval_len, &l.truth, points, exp.theta)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut report = MetricsReport::new(det.method.clone(), dataset.clone(), exp.theta, det.threshold, runs);
        report.metadata = det.metadata.clone();
        report.metadata.insert("validation_f1".into(), det.validation_f1.into());
        io.write_json(&format!("reports/{file}.json"), &report)?;
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(Error::Dependency { stage: Stage::Detect.name(), path: io.dir.join("detect/hstcl.json") });
    }
    io.write_json("reports/report.json", &reports)
}

/// One row of a comparison table: a method's per-seed means aggregated over
/// reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub reports: usize,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub covering_mean: f64,
    pub covering_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub dataset: String,
    pub theta: usize,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,reports,f1_mean,f1_std,covering_mean,covering_std\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.method, r.reports, r.f1_mean, r.f1_std, r.covering_mean, r.covering_std
            ));
        }
        out
    }
}

/// Groups reports by method, in first-seen order, and summarizes each
/// report's mean F1 and covering.
pub fn compare(reports: &[MetricsReport]) -> Result<Comparison> {
    let first = reports.first().ok_or(Error::EmptySet("reports to compare"))?;
    for r in reports {
        if r.theta != first.theta {
            return Err(Error::Config(format!("reports use θ = {} and {}", first.theta, r.theta)));
        }
        if r.dataset != first.dataset {
            return Err(Error::Config(format!("reports cover datasets {} and {}", first.dataset, r.dataset)));
        }
    }
    let mut methods: Vec<&str> = Vec::new();
    for r in reports {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let rows = methods
        .into_iter()
        .map(|m| {
            let group: Vec<&MetricsReport> = reports.iter().filter(|r| r.method == m).collect();
            let (f1_mean, f1_std) = mean_std(group.iter().map(|r| r.f1_mean));
            let (covering_mean, covering_std) = mean_std(group.iter().map(|r| r.covering_mean));
            ComparisonRow { method: m.to_string(), reports: group.len(), f1_mean, f1_std, covering_mean, covering_std }
        })
        .collect();
    Ok(Comparison { dataset: first.dataset.clone(), theta: first.theta, rows })
}

/// Reads report files holding either one report or a list of them.
pub fn read_reports(paths: &[PathBuf]) -> Result<Vec<MetricsReport>> {
    let mut out = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        match serde_json::from_str::<Value>(&text)? {
            Value::Array(items) => {
                for v in items {
                    out.push(serde_json::from_value(v)?);
                }
            }
            v => out.push(serde_json::from_value(v)?),
        }
    }
    Ok(out)
}

/// Writes `t,score,threshold,is_change_point` for one test run of a
/// thresholded method (`hstcl` or `hstcl_agent`), on the detection axis.
pub fn plot_csv(cfg: &PipelineConfig, seed: u64, run: &str, method: &str) -> Result<PathBuf> {
    if !METHODS.iter().take(2).any(|(_, f)| *f == method) {
        return Err(Error::Config(format!("no score series for method `{method}`; use hstcl or hstcl_agent")));
    }
    let dir = cfg.seed_dir(seed);
    let mut io = StageIo::new(&dir);
    let det: Detections = io.read_json(&format!("detect/{method}.json"), Stage::Detect)?;
    let series = read_series(&io.input(&format!("detect/series/{method}/{run}.csv"), Stage::Detect)?)?;
    let points = detect_change_points(&series, det.threshold);
    let path = io.output(&format!("plots/{method}-{run}.csv"))?;
    let mut out = String::from("t,score,threshold,is_change_point\n");
    for (t, s) in series.iter().enumerate() {
        let flag = u8::from(points.binary_search(&t).is_ok());
        out.push_str(&format!("{t},{s},{},{flag}\n", det.threshold));
    }
    std::fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
