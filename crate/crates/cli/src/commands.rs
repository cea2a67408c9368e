//! One function per subcommand. Each returns a [`CliError`] whose class
//! picks the process exit code; all console output goes through `println!`
//! so the binary stays a thin argument-parsing shell.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use perftwin_core::domain::{
    encode_features, validate_spec, DatasetKind, IoType, LoadGroup, RaidConfig, WorkloadSpec,
};
use perftwin_core::ingest::{
    dataset_to_csv, group_stats, parse_dataset, read_plan, write_dataset, write_plan, Dataset,
};
use perftwin_core::littlelaw::{dataset_little_records, reliability_filter};
use perftwin_core::oracle::{generate_measurements, OracleConfig};
use perftwin_core::sobol::{plan_workloads, ParameterSpace};

use crate::artifact::ModelArtifact;
use crate::config::RunConfig;
use crate::pipeline::{
    little_correlation, nested_train_subsets, prepare_data, run_evaluation, sample_model,
    train_model, EvalInputs, EvalOutcome, ModelChoice, TrainedModel, TrainedPayload,
};
use crate::{plots, report, write_atomic, CliError};

/// Environment variable supplying the default `evaluate` output directory.
pub const OUT_DIR_ENV: &str = "PERFTWIN_OUT_DIR";

fn parse_kind(s: &str) -> Result<DatasetKind, CliError> {
    s.parse().map_err(|e: String| CliError::Usage(e))
}

pub fn cmd_plan(kind: &str, loads: usize, skip: usize, out: &Path) -> Result<(), CliError> {
    let kind = parse_kind(kind)?;
    let plan = plan_workloads(&ParameterSpace::for_kind(kind), loads, skip)?;
    write_plan(&plan, out)?;
    println!("wrote {} planned streams ({} loads) to {}", plan.loads.len(), loads, out.display());
    Ok(())
}

pub fn cmd_oracle(
    plan: &Path,
    kind: &str,
    k: usize,
    seed: u64,
    noise: f64,
    out: &Path,
) -> Result<(), CliError> {
    let kind = parse_kind(kind)?;
    if !(noise > 0.0) {
        return Err(CliError::Usage(format!("--noise must be positive, got {noise}")));
    }
    let plan = read_plan(plan, kind)?;
    let cfg = OracleConfig { seed, noise_scale: noise, ..OracleConfig::default() };
    let ds = generate_measurements(&plan, k, &cfg)?;
    write_dataset(&ds, out)?;
    println!(
        "wrote {} rows ({} streams, {} loads) to {}",
        ds.n_rows(),
        ds.groups.len(),
        ds.load_ids().len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_ingest_check(data: &Path, kind: &str) -> Result<(), CliError> {
    let kind = parse_kind(kind)?;
    let ds = parse_dataset(data, kind)?;
    let (mut k_min, mut k_max) = (usize::MAX, 0usize);
    let (mut iops_lo, mut iops_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lat_lo, mut lat_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for g in &ds.groups {
        k_min = k_min.min(g.k());
        k_max = k_max.max(g.k());
        let s = group_stats(g)?;
        iops_lo = iops_lo.min(s.mean_iops);
        iops_hi = iops_hi.max(s.mean_iops);
        lat_lo = lat_lo.min(s.mean_latency);
        lat_hi = lat_hi.max(s.mean_latency);
    }
    println!("kind: {kind}");
    println!("rows: {}", ds.n_rows());
    println!("streams: {}", ds.groups.len());
    println!("loads: {}", ds.load_ids().len());
    match ds.latency_unit {
        Some(u) => println!("latency_unit: {u}"),
        None => println!("latency_unit: (not declared)"),
    }
    println!("samples_per_stream: {k_min}..{k_max}");
    println!("mean_iops: {iops_lo:.3}..{iops_hi:.3}");
    println!("mean_latency: {lat_lo:.6}..{lat_hi:.6}");
    Ok(())
}

pub fn cmd_train(
    config: Option<&Path>,
    sets: &[String],
    model: &str,
    out: &Path,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config, sets)?;
    let choice: ModelChoice = model.parse()?;
    let inputs = prepare_data(&cfg)?;
    let trained = train_model(choice, &inputs.train.groups, cfg.kind, &cfg)?;
    let artifact = ModelArtifact::new(
        &trained,
        cfg.kind,
        cfg.split_seed,
        cfg.split_test_loads,
        inputs.train.load_ids().len(),
        inputs.train.latency_unit,
    )?;
    artifact.save(out)?;
    write_atomic(&out.with_extension("log"), &train_log(&cfg, &trained, &inputs))?;
    println!(
        "trained {} on {} loads ({} streams); artifact {}",
        choice.as_str(),
        inputs.train.load_ids().len(),
        inputs.train.groups.len(),
        out.display()
    );
    Ok(())
}

fn train_log(cfg: &RunConfig, trained: &TrainedModel, inputs: &EvalInputs) -> String {
    let mut log = String::new();
    let _ = writeln!(log, "command = train");
    let _ = writeln!(log, "model = {}", trained.choice.as_str());
    let _ = writeln!(log, "train.loads = {}", inputs.train.load_ids().len());
    let _ = writeln!(log, "train.streams = {}", inputs.train.groups.len());
    let _ = writeln!(log, "train.rows = {}", inputs.train.n_rows());
    log.push_str(&cfg.resolved());
    match &trained.payload {
        TrainedPayload::Knn(m) => {
            let _ = writeln!(log, "knn.entries = {}", m.entries.len());
        }
        TrainedPayload::Gaussian(m, grid) => {
            for p in grid {
                let _ = writeln!(
                    log,
                    "grid depth={} rate={} val_loss={:.6}",
                    p.max_depth, p.learning_rate, p.val_loss
                );
            }
            let _ = writeln!(
                log,
                "chosen depth={} rate={}",
                m.ensemble.params.max_depth, m.ensemble.params.learning_rate
            );
            if let Some(loss) = m.ensemble.train_loss.last() {
                let _ = writeln!(log, "final_train_loss = {loss:.6}");
            }
        }
        TrainedPayload::Flow(m) => {
            if let Some(nll) = m.train_nll.last() {
                let _ = writeln!(log, "final_nll = {nll:.6}");
            }
        }
    }
    log
}

/// Workload parameters settable via `--param`/`--sweep`, per dataset family.
fn settable_params(kind: DatasetKind) -> &'static [&'static str] {
    if kind.has_raid() {
        &["read_fraction", "block_size_kb", "n_jobs", "queue_depth", "raid_k", "raid_m", "n_disks"]
    } else {
        &["read_fraction", "block_size_kb", "n_jobs", "queue_depth"]
    }
}

fn check_param_name(kind: DatasetKind, name: &str) -> Result<(), CliError> {
    if settable_params(kind).contains(&name) {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "unknown parameter `{name}` for {kind} (expected one of {})",
            settable_params(kind).join(", ")
        )))
    }
}

fn set_param(spec: &mut WorkloadSpec, kind: DatasetKind, name: &str, value: &str) -> Result<(), CliError> {
    check_param_name(kind, name)?;
    let as_u32 = |what: &str| -> Result<u32, CliError> {
        value.parse().map_err(|e| CliError::Usage(format!("parameter {what}={value}: {e}")))
    };
    let empty_raid = RaidConfig { k: 0, m: 0, n_disks: 0 };
    match name {
        "read_fraction" => {
            spec.read_fraction = value
                .parse()
                .map_err(|e| CliError::Usage(format!("parameter read_fraction={value}: {e}")))?;
        }
        "block_size_kb" => spec.block_size_kb = as_u32(name)?,
        "n_jobs" => spec.n_jobs = as_u32(name)?,
        "queue_depth" => spec.queue_depth = as_u32(name)?,
        "raid_k" => spec.raid.get_or_insert(empty_raid).k = as_u32(name)?,
        "raid_m" => spec.raid.get_or_insert(empty_raid).m = as_u32(name)?,
        "n_disks" => spec.raid.get_or_insert(empty_raid).n_disks = as_u32(name)?,
        _ => unreachable!("filtered above"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_sample(
    artifact_path: &Path,
    params: &[String],
    io: &str,
    n: usize,
    seed: u64,
    sweep: Option<&str>,
    out: &Path,
) -> Result<(), CliError> {
    let artifact = ModelArtifact::load(artifact_path)?;
    let model = artifact.decode()?;
    let kind = artifact.kind;

    let io_type = match io {
        "read" => IoType::Read,
        "write" => IoType::Write,
        other => return Err(CliError::Usage(format!("--io must be read|write, got `{other}`"))),
    };
    let mut spec = WorkloadSpec {
        load_type: kind.load_type(),
        io_type,
        read_fraction: 0.0,
        block_size_kb: 0,
        n_jobs: 0,
        queue_depth: 0,
        raid: None,
    };
    let mut given: Vec<&str> = Vec::new();
    for p in params {
        let (name, value) = p.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("--param expects name=value, got `{p}`"))
        })?;
        set_param(&mut spec, kind, name, value)?;
        given.push(name);
    }
    if let Some(name) = sweep_name(sweep) {
        check_param_name(kind, name)?;
    }
    let missing: Vec<&str> = settable_params(kind)
        .iter()
        .filter(|&&name| !given.contains(&name) && Some(name) != sweep_name(sweep))
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Usage(format!(
            "missing --param values for: {}",
            missing.join(", ")
        )));
    }

    // (load_id, fully specified workload) per emitted group.
    let mut cases: Vec<(String, WorkloadSpec)> = Vec::new();
    match sweep {
        None => cases.push(("sample".to_string(), spec.clone())),
        Some(sweep) => {
            let (name, list) = sweep.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("--sweep expects name=v1,v2,..., got `{sweep}`"))
            })?;
            for token in list.split(',') {
                let token = token.trim();
                if token.is_empty() {
                    return Err(CliError::Usage(format!("--sweep has an empty value: `{sweep}`")));
                }
                let mut case = spec.clone();
                set_param(&mut case, kind, name, token)?;
                cases.push((format!("{name}-{token}"), case));
            }
        }
    }

    let mut groups = Vec::new();
    for (i, (load_id, case)) in cases.iter().enumerate() {
        if let Err(violations) = validate_spec(case, kind) {
            let all = violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
            return Err(CliError::Usage(format!("workload `{load_id}` invalid: {all}")));
        }
        if n == 0 {
            continue;
        }
        let features = encode_features(case, kind);
        let points = sample_model(
            &model,
            &features,
            n,
            seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        )?;
        groups.push(LoadGroup { load_id: load_id.clone(), spec: case.clone(), points });
    }
    let ds = Dataset { kind, latency_unit: artifact.latency_unit, groups };
    write_atomic(out, &dataset_to_csv(&ds))?;
    println!(
        "wrote {} rows ({} workloads) sampled from {} to {}",
        ds.n_rows(),
        cases.len(),
        artifact.model,
        out.display()
    );
    Ok(())
}

fn sweep_name(sweep: Option<&str>) -> Option<&str> {
    sweep.and_then(|s| s.split_once('=')).map(|(name, _)| name)
}

pub fn cmd_evaluate(
    config: Option<&Path>,
    sets: &[String],
    artifact_paths: &[PathBuf],
    out_dir: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config, sets)?;
    let out_dir = match out_dir {
        Some(d) => d.to_path_buf(),
        None => PathBuf::from(
            std::env::var(OUT_DIR_ENV).unwrap_or_else(|_| "perftwin-out".to_string()),
        ),
    };

    let inputs = prepare_data(&cfg)?;
    let mut pretrained = Vec::new();
    for path in artifact_paths {
        let artifact = ModelArtifact::load(path)?;
        if artifact.kind != cfg.kind {
            return Err(CliError::Data(format!(
                "artifact {} was trained on {}, run is configured for {}",
                path.display(),
                artifact.kind,
                cfg.kind
            )));
        }
        if artifact.split_seed != cfg.split_seed
            || artifact.split_test_loads != cfg.split_test_loads
        {
            return Err(CliError::Data(format!(
                "artifact {} was trained against split seed={} test_loads={}, run uses seed={} \
                 test_loads={}; refusing to evaluate on a different split",
                path.display(),
                artifact.split_seed,
                artifact.split_test_loads,
                cfg.split_seed,
                cfg.split_test_loads
            )));
        }
        pretrained.push(artifact.decode()?);
    }

    let outcome = run_evaluation(&cfg, &inputs, pretrained)?;

    write_atomic(&out_dir.join("resolved.config"), &cfg.resolved())?;
    write_atomic(&out_dir.join("report.csv"), &report::report_csv(&outcome.evals))?;
    write_atomic(&out_dir.join("loads.csv"), &report::loads_csv(&outcome.evals))?;
    write_atomic(&out_dir.join("little.csv"), &report::little_csv(&outcome))?;
    for eval in &outcome.evals {
        write_atomic(
            &out_dir.join(format!("clouds_{}.svg", eval.choice.as_str())),
            &cloud_plot(&outcome, eval),
        )?;
    }
    write_atomic(&out_dir.join("little.svg"), &little_plot(&outcome))?;

    for eval in &outcome.evals {
        println!(
            "{}: pem_iops={:.2}% pem_latency={:.2}% pes_iops={:.2}% pes_latency={:.2}% \
             fd={:.4} mmd={:.4} little={:.4}",
            eval.choice.as_str(),
            eval.summaries[0].mean,
            eval.summaries[1].mean,
            eval.summaries[2].mean,
            eval.summaries[3].mean,
            eval.summaries[4].mean,
            eval.summaries[5].mean,
            eval.little_correlation
        );
    }
    println!("observed little correlation: {:.4}", outcome.observed_little);
    println!("reports written to {}", out_dir.display());
    Ok(())
}

/// Observed vs predicted clouds for the first few test streams, log-log.
fn cloud_plot(outcome: &EvalOutcome, eval: &crate::pipeline::ModelEval) -> String {
    const STREAMS: usize = 6;
    const POINTS: usize = 80;
    let log_points = |pts: &[perftwin_core::domain::PerfPoint]| -> Vec<[f64; 2]> {
        pts.iter().take(POINTS).map(|p| [p.iops.log10(), p.latency.log10()]).collect()
    };
    let mut series = Vec::new();
    for (i, g) in outcome.test.groups.iter().take(STREAMS).enumerate() {
        series.push(plots::Series {
            label: format!("{} {} observed", g.load_id, g.spec.io_type),
            color: "#bbbbbb",
            points: log_points(&g.points),
        });
        series.push(plots::Series {
            label: format!("{} {} predicted", g.load_id, g.spec.io_type),
            color: plots::PALETTE[i % plots::PALETTE.len()],
            points: log_points(&eval.clouds[i]),
        });
    }
    plots::scatter_svg(
        &format!("{} predictions vs observations", eval.choice.as_str()),
        "log10(IOPS)",
        "log10(latency)",
        &series,
        false,
    )
}

/// Queue occupancy against the per-load IOPS×latency estimate, with the y=x
/// line the law predicts.
fn little_plot(outcome: &EvalOutcome) -> String {
    let to_points = |records: &[perftwin_core::littlelaw::LittleRecord]| -> Vec<[f64; 2]> {
        records.iter().map(|r| [r.occupancy, r.estimate]).collect()
    };
    let mut series = vec![plots::Series {
        label: "observed".to_string(),
        color: "#bbbbbb",
        points: to_points(&outcome.observed_records),
    }];
    for (i, eval) in outcome.evals.iter().enumerate() {
        series.push(plots::Series {
            label: eval.choice.as_str().to_string(),
            color: plots::PALETTE[i],
            points: to_points(&eval.little_records),
        });
    }
    plots::scatter_svg(
        "queue balance: occupancy vs IOPS x latency",
        "queue occupancy Q x J",
        "predicted IOPS x latency",
        &series,
        true,
    )
}

pub fn cmd_learning_curve(
    config: Option<&Path>,
    sets: &[String],
    sizes: &str,
    out: &Path,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config, sets)?;
    let sizes: Vec<usize> = sizes
        .split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|e| CliError::Usage(format!("--sizes entry `{t}`: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if sizes.is_empty() {
        return Err(CliError::Usage("--sizes must list at least one train size".into()));
    }

    let inputs = prepare_data(&cfg)?;
    let subsets = nested_train_subsets(&inputs.train, &sizes)?;
    let mut points = Vec::with_capacity(sizes.len());
    for (&size, subset) in sizes.iter().zip(subsets) {
        let step = EvalInputs { train: subset, test: inputs.test.clone() };
        let outcome = run_evaluation(&cfg, &step, Vec::new())?;
        println!(
            "train_loads={size}: gaussian pem_iops={:.2}% flow pem_iops={:.2}%",
            outcome.evals[1].summaries[0].mean,
            outcome.evals[2].summaries[0].mean
        );
        points.push((size, outcome.evals));
    }
    write_atomic(out, &report::curve_csv(&points))?;
    write_atomic(&out.with_extension("config"), &cfg.resolved())?;
    println!("wrote learning curve ({} sizes) to {}", sizes.len(), out.display());
    Ok(())
}

pub fn cmd_validate(
    data: &Path,
    kind: &str,
    rel_tol: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let kind = parse_kind(kind)?;
    if !(rel_tol > 0.0) {
        return Err(CliError::Usage(format!("--rel-tol must be positive, got {rel_tol}")));
    }
    let ds = parse_dataset(data, kind)?;
    let records = dataset_little_records(&ds)?;
    let correlation = little_correlation(&records)?;
    let accepted = reliability_filter(&records, rel_tol).len();
    let csv = report::validate_csv(&records, rel_tol);
    match out {
        Some(path) => write_atomic(path, &csv)?,
        None => print!("{csv}"),
    }
    println!(
        "little_correlation = {correlation:.6} ({} loads, {accepted} accepted at rel_tol {rel_tol})",
        records.len()
    );
    Ok(())
}
