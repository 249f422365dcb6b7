use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use emergence::pipeline::{compare, plot_csv, read_reports, run_all, run_stage, Manifest, PipelineConfig, Stage};
use emergence::{Error, Result};

/// Emergence detection pipeline: simulate, label, train, score, detect, evaluate.
#[derive(Parser)]
#[command(name = "emergence", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config; missing keys take the dataset preset.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set agent.dim=32` or `--set seeds=[0,1,2]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        PipelineConfig::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    Simulate(ConfigArgs),
    Label(ConfigArgs),
    TrainAgent(ConfigArgs),
    ScoreAgents(ConfigArgs),
    CoarseGrain(ConfigArgs),
    TrainSystem(ConfigArgs),
    Detect(ConfigArgs),
    DetectBaseline(ConfigArgs),
    Evaluate(ConfigArgs),
    /// Every stage in order.
    Run(ConfigArgs),
    /// Print the fully resolved config.
    ShowConfig(ConfigArgs),
    /// Aggregate reports into a method-by-metric table.
    Compare {
        /// Report files; defaults to every seed's report under the config's out_dir.
        reports: Vec<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        /// Directory for comparison.csv and comparison.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score series with threshold and detections for one test run.
    PlotCsv {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        run: String,
        #[arg(long, default_value = "hstcl")]
        method: String,
    },
}

fn print_manifests(manifests: &[Manifest]) -> Result<()> {
    for m in manifests {
        println!("{}", serde_json::to_string(m)?);
    }
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    let stage = |args: &ConfigArgs, stage: Stage| -> Result<()> { print_manifests(&run_stage(&args.load()?, stage)?) };
    match command {
        Command::Simulate(a) => stage(&a, Stage::Simulate),
        Command::Label(a) => stage(&a, Stage::Label),
        Command::TrainAgent(a) => stage(&a, Stage::TrainAgent),
        Command::ScoreAgents(a) => stage(&a, Stage::ScoreAgents),
        Command::CoarseGrain(a) => stage(&a, Stage::CoarseGrain),
        Command::TrainSystem(a) => stage(&a, Stage::TrainSystem),
        Command::Detect(a) => stage(&a, Stage::Detect),
        Command::DetectBaseline(a) => stage(&a, Stage::DetectBaseline),
        Command::Evaluate(a) => stage(&a, Stage::Evaluate),
        Command::Run(a) => print_manifests(&run_all(&a.load()?)?),
        Command::ShowConfig(a) => {
            println!("{}", serde_json::to_string_pretty(&a.load()?)?);
            Ok(())
        }
        Command::Compare { reports, config, out } => {
            let cfg = config.load()?;
            let paths = if reports.is_empty() {
                cfg.seeds.iter().map(|&s| cfg.seed_dir(s).join("reports/report.json")).collect()
            } else {
                reports
            };
            let table = compare(&read_reports(&paths)?)?;
            let out = out.unwrap_or_else(|| cfg.out_dir.clone());
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let csv = out.join("comparison.csv");
            std::fs::write(&csv, table.to_csv()).map_err(|e| Error::io(&csv, e))?;
            let json = out.join("comparison.json");
            std::fs::write(&json, serde_json::to_string_pretty(&table)?).map_err(|e| Error::io(&json, e))?;
            print!("{}", table.to_csv());
            Ok(())
        }
        Command::PlotCsv { config, seed, run, method } => {
            let path = plot_csv(&config.load()?, seed, &run, &method)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
