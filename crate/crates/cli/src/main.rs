//! `perftwin` — storage performance digital twins from fio-style
//! measurements: plan experiments, synthesize ground-truth data, train
//! conditional models, sample predicted performance clouds, and score them.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use perftwin_cli::commands;

#[derive(Parser)]
#[command(
    name = "perftwin",
    version,
    about = "Conditional models of storage performance: plan, train, sample, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Plan workload configurations with a low-discrepancy design
    Plan {
        /// Dataset family: cache_random|ssd_random|ssd_sequential|hdd_sequential
        #[arg(long)]
        kind: String,
        /// Number of distinct loads to plan
        #[arg(long)]
        loads: usize,
        /// Leading design points to skip
        #[arg(long, default_value_t = 1)]
        skip: usize,
        /// Plan CSV to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize ground-truth measurements for a plan
    Oracle {
        /// Plan CSV from `plan`
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        kind: String,
        /// Measurements per stream
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Log-space noise scale
        #[arg(long, default_value_t = 0.2)]
        noise: f64,
        /// Measurement CSV to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse a measurement CSV and print its shape
    IngestCheck {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        kind: String,
    },
    /// Train one model on the train split and write its artifact
    Train {
        /// key=value config file
        #[arg(long)]
        config: Option<PathBuf>,
        /// Config override, repeatable: --set key=value
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// knn|gaussian|flow
        #[arg(long)]
        model: String,
        /// Artifact JSON to write (a .log sidecar is written too)
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample predicted performance clouds from an artifact
    Sample {
        #[arg(long)]
        artifact: PathBuf,
        /// Workload parameter, repeatable: --param name=value
        #[arg(long = "param", value_name = "NAME=VALUE")]
        param: Vec<String>,
        /// Stream direction: read|write
        #[arg(long, default_value = "read")]
        io: String,
        /// Points per workload
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Vary one parameter: --sweep name=v1,v2,...
        #[arg(long, value_name = "NAME=V1,V2,...")]
        sweep: Option<String>,
        /// Sample CSV to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Train (or load) all models, score them on the test split, emit reports
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Pretrained artifact, repeatable; missing models train fresh
        #[arg(long = "artifact")]
        artifact: Vec<PathBuf>,
        /// Report directory (default: $PERFTWIN_OUT_DIR or ./perftwin-out)
        #[arg(long = "out-dir")]
        out_dir: Option<PathBuf>,
    },
    /// Re-evaluate on nested train subsets of growing size
    LearningCurve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Comma-separated train-load counts, e.g. 32,64,128
        #[arg(long)]
        sizes: String,
        /// Curve CSV to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a dataset against the queue-balance law
    Validate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        kind: String,
        /// Relative residual accepted as balanced
        #[arg(long, default_value_t = 0.3)]
        rel_tol: f64,
        /// Residual CSV to write (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.cmd {
        Cmd::Plan { kind, loads, skip, out } => commands::cmd_plan(kind, *loads, *skip, out),
        Cmd::Oracle { plan, kind, k, seed, noise, out } => {
            commands::cmd_oracle(plan, kind, *k, *seed, *noise, out)
        }
        Cmd::IngestCheck { data, kind } => commands::cmd_ingest_check(data, kind),
        Cmd::Train { config, set, model, out } => {
            commands::cmd_train(config.as_deref(), set, model, out)
        }
        Cmd::Sample { artifact, param, io, n, seed, sweep, out } => {
            commands::cmd_sample(artifact, param, io, *n, *seed, sweep.as_deref(), out)
        }
        Cmd::Evaluate { config, set, artifact, out_dir } => {
            commands::cmd_evaluate(config.as_deref(), set, artifact, out_dir.as_deref())
        }
        Cmd::LearningCurve { config, set, sizes, out } => {
            commands::cmd_learning_curve(config.as_deref(), set, sizes, out)
        }
        Cmd::Validate { data, kind, rel_tol, out } => {
            commands::cmd_validate(data, kind, *rel_tol, out.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
