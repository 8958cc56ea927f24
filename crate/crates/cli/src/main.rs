//! `xcl`: runs the distillation studies and merges their rows into
//! `<out>/<experiment id>.csv`.
//!
//! Exit codes: 0 ok, 2 bad config or input file, 3 missing artifact,
//! 4 non-finite loss, 1 anything else (I/O).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use xcl_core::config::{ExperimentConfig, ExperimentKind, SweepAxis};
use xcl_core::experiments::{run, Ctx};
use xcl_core::results::{merge_into, to_csv, ResultRow};
use xcl_core::Error;

#[derive(Parser)]
#[command(name = "xcl", version, about = "Knowledge distillation with extended transfer-sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the teacher on split A and save it.
    TrainTeacher(Common),
    /// Distill a student from a saved teacher.
    Distill(Common),
    /// KD on the high- vs low-entropy halves of the held-out split.
    Observation1(Common),
    /// KD vs ERM on the samples the teacher gets wrong.
    Observation2(Common),
    /// Sweep one axis (temperature, label-smoothing, dataset-size, imbalance, sampler).
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Overrides `experiment.sweep_axis`.
        #[arg(long)]
        axis: Option<String>,
    },
    /// Predicted uncertainty versus the mixing coefficient (regression).
    CurveUncertainty(Common),
}

#[derive(Args)]
struct Common {
    /// Config file of `section.key = value` lines; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the rows as a JSON array instead of CSV.
    #[arg(long)]
    json: bool,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Shape(_) | Error::Data(_) => 2,
        Error::MissingArtifact(_) => 3,
        Error::Numeric(_) => 4,
        Error::Io(_) => 1,
    }
}

fn load_config(kind: ExperimentKind, common: &Common, axis: Option<&str>) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path, kind)?,
        None => ExperimentConfig::for_kind(kind),
    };
    if let Some(seed) = common.seed {
        cfg.experiment.seeds = vec![seed];
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.display().to_string();
    }
    if let Some(axis) = axis {
        cfg.experiment.sweep_axis = SweepAxis::parse(axis)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn to_json(rows: &[ResultRow]) -> String {
    let items: Vec<_> = rows
        .iter()
        .map(|r| {
            json!({
                "experiment": r.experiment,
                "seed": r.seed,
                "method": r.method,
                "metric": r.metric,
                "value": r.value,
                "config_hash": r.config_hash,
            })
        })
        .collect();
    serde_json::to_string_pretty(&items).expect("rows serialize")
}

fn execute(kind: ExperimentKind, common: &Common, axis: Option<&str>) -> Result<Vec<ResultRow>, Error> {
    let cfg = load_config(kind, common, axis)?;
    let threads = std::env::var("XCL_THREADS").ok().and_then(|v| v.parse().ok()).unwrap_or(1);
    let out = Path::new(&cfg.output_dir);
    let ctx = Ctx::new(&cfg, out, threads);
    let rows = run(&ctx)?;
    merge_into(&out.join(format!("{}.csv", cfg.experiment_id())), &rows, &ctx.hash)?;
    Ok(rows)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common, axis) = match &cli.command {
        Command::TrainTeacher(c) => (ExperimentKind::TrainTeacher, c, None),
        Command::Distill(c) => (ExperimentKind::Distill, c, None),
        Command::Observation1(c) => (ExperimentKind::Observation1, c, None),
        Command::Observation2(c) => (ExperimentKind::Observation2, c, None),
        Command::Sweep { common, axis } => (ExperimentKind::Sweep, common, axis.as_deref()),
        Command::CurveUncertainty(c) => (ExperimentKind::CurveUncertainty, c, None),
    };
    match execute(kind, common, axis) {
        Ok(rows) => {
            if common.json {
                println!("{}", to_json(&rows));
            } else {
                print!("{}", to_csv(&rows));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("xcl: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
