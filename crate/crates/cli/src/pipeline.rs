//! The train/evaluate engine behind the CLI commands.
//!
//! Training functions only ever receive the train split, so test
//! measurements cannot leak into a model; `evaluate` additionally refuses
//! artifacts whose recorded split disagrees with the one it builds.

use perftwin_core::boosting::GridPoint;
use perftwin_core::domain::{encode_features, DatasetKind, IoType, LoadGroup, PerfPoint};
use perftwin_core::flow::{fit_flow, sample_flow, FlowModel};
use perftwin_core::gaussian::{
    fit_gaussian_model, grid_fit_gaussian, sample_performance, GaussianModel,
};
use perftwin_core::ingest::{parse_dataset, split_train_test, Dataset};
use perftwin_core::knn::{fit_knn, predict_knn, KnnModel};
use perftwin_core::littlelaw::{dataset_little_records, little_record, LittleRecord};
use perftwin_core::metrics::{
    bootstrap_summary, load_metrics, pearson, BootstrapSummary, LoadMetrics, Pair,
};
use perftwin_core::oracle::generate_measurements;
use perftwin_core::sobol::{plan_workloads, ParameterSpace};

use crate::config::{RunConfig, GRID_DEPTHS, GRID_RATES};
use crate::CliError;

/// The three model families, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    Knn,
    Gaussian,
    Flow,
}

impl ModelChoice {
    pub const ALL: [ModelChoice; 3] = [ModelChoice::Knn, ModelChoice::Gaussian, ModelChoice::Flow];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelChoice::Knn => "knn",
            ModelChoice::Gaussian => "gaussian",
            ModelChoice::Flow => "flow",
        }
    }
}

impl std::str::FromStr for ModelChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "knn" => Ok(ModelChoice::Knn),
            "gaussian" => Ok(ModelChoice::Gaussian),
            "flow" => Ok(ModelChoice::Flow),
            other => {
                Err(CliError::Usage(format!("unknown model `{other}` (knn|gaussian|flow)")))
            }
        }
    }
}

/// Per-load scalar metrics emitted by evaluation, in report order.
pub const METRIC_NAMES: [&str; 6] =
    ["pem_iops", "pem_latency", "pes_iops", "pes_latency", "fd", "mmd"];

pub fn metric_value(m: &LoadMetrics, idx: usize) -> f64 {
    match idx {
        0 => m.pem[0],
        1 => m.pem[1],
        2 => m.pes[0],
        3 => m.pes[1],
        4 => m.fd,
        5 => m.mmd,
        _ => unreachable!("metric index out of range"),
    }
}

#[derive(Debug, Clone)]
pub enum TrainedPayload {
    Knn(KnnModel),
    /// Model plus the validation-loss table when grid search chose it.
    Gaussian(GaussianModel, Vec<GridPoint>),
    Flow(FlowModel),
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub choice: ModelChoice,
    pub payload: TrainedPayload,
}

/// Loads the configured measurement CSV, or synthesizes one from the oracle
/// when no `data.path` is set.
pub fn acquire_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    match &cfg.data_path {
        Some(path) => Ok(parse_dataset(path, cfg.kind)?),
        None => {
            let space = ParameterSpace::for_kind(cfg.kind);
            let plan = plan_workloads(&space, cfg.oracle_loads, cfg.oracle_skip)?;
            Ok(generate_measurements(&plan, cfg.oracle_k, &cfg.oracle_config())?)
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalInputs {
    pub train: Dataset,
    pub test: Dataset,
}

pub fn prepare_data(cfg: &RunConfig) -> Result<EvalInputs, CliError> {
    let full = acquire_dataset(cfg)?;
    let (train, test) = split_train_test(&full, cfg.split_test_loads, cfg.split_seed)?;
    Ok(EvalInputs { train, test })
}

pub fn train_model(
    choice: ModelChoice,
    train_groups: &[LoadGroup],
    kind: DatasetKind,
    cfg: &RunConfig,
) -> Result<TrainedModel, CliError> {
    let payload = match choice {
        ModelChoice::Knn => TrainedPayload::Knn(fit_knn(train_groups, kind)?),
        ModelChoice::Gaussian => {
            let base = cfg.boost_params();
            if cfg.gaussian_grid {
                let (model, grid) = grid_fit_gaussian(
                    train_groups,
                    kind,
                    &base,
                    &GRID_DEPTHS,
                    &GRID_RATES,
                    cfg.gaussian_val_fraction,
                )?;
                TrainedPayload::Gaussian(model, grid)
            } else {
                TrainedPayload::Gaussian(fit_gaussian_model(train_groups, kind, &base)?, Vec::new())
            }
        }
        ModelChoice::Flow => TrainedPayload::Flow(fit_flow(train_groups, kind, &cfg.flow_config())?),
    };
    Ok(TrainedModel { choice, payload })
}

/// Draws a predicted performance cloud for one workload. The kNN baseline
/// replays its nearest stored stream verbatim, so `n` and `seed` only affect
/// the generative models.
pub fn sample_model(
    model: &TrainedModel,
    features: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<PerfPoint>, CliError> {
    match &model.payload {
        TrainedPayload::Knn(m) => Ok(predict_knn(m, features)?.points.clone()),
        TrainedPayload::Gaussian(m, _) => Ok(sample_performance(m, features, n, seed)?),
        TrainedPayload::Flow(m) => Ok(sample_flow(m, features, n, seed)?),
    }
}

/// Seed for the prediction cloud of one (model, test stream) cell; distinct
/// odd multipliers keep the two indices from aliasing.
pub fn sample_seed(eval_seed: u64, model_idx: usize, group_idx: usize) -> u64 {
    eval_seed
        .wrapping_add((model_idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((group_idx as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9))
}

fn bootstrap_seed(eval_seed: u64, model_idx: usize, metric_idx: usize) -> u64 {
    let cell = (model_idx * METRIC_NAMES.len() + metric_idx + 1) as u64;
    eval_seed.wrapping_add(cell.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// One evaluated model: bootstrap summaries per metric (report order),
/// per-stream metric rows, queue-balance records built from its predictions,
/// and the sampled clouds themselves (aligned with `test.groups`).
#[derive(Debug, Clone)]
pub struct ModelEval {
    pub choice: ModelChoice,
    pub summaries: [BootstrapSummary; 6],
    pub per_stream: Vec<(String, IoType, LoadMetrics)>,
    pub little_records: Vec<LittleRecord>,
    pub little_correlation: f64,
    pub clouds: Vec<Vec<PerfPoint>>,
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub trained: Vec<TrainedModel>,
    pub evals: Vec<ModelEval>,
    pub observed_records: Vec<LittleRecord>,
    pub observed_little: f64,
    pub test: Dataset,
}

/// Scores every model on the test split: per test stream, draw a prediction
/// cloud and compute the metric suite against the observed cloud, then
/// bootstrap each metric across streams and correlate occupancy against the
/// model's queue-balance estimates.
///
/// `pretrained` entries (from artifacts) substitute for training; any model
/// without one is trained on the train split here. Each family may appear at
/// most once.
pub fn run_evaluation(
    cfg: &RunConfig,
    inputs: &EvalInputs,
    pretrained: Vec<TrainedModel>,
) -> Result<EvalOutcome, CliError> {
    for (i, m) in pretrained.iter().enumerate() {
        if pretrained[..i].iter().any(|p| p.choice == m.choice) {
            return Err(CliError::Usage(format!(
                "model `{}` supplied more than once",
                m.choice.as_str()
            )));
        }
    }

    let observed = dataset_little_records(&inputs.test)?;
    let observed_little = little_correlation(&observed)?;

    let mut pretrained = pretrained;
    let mut trained = Vec::new();
    let mut evals = Vec::new();
    for (model_idx, choice) in ModelChoice::ALL.into_iter().enumerate() {
        let model = match pretrained.iter().position(|m| m.choice == choice) {
            Some(i) => pretrained.swap_remove(i),
            None => train_model(choice, &inputs.train.groups, inputs.test.kind, cfg)?,
        };

        let mut clouds = Vec::with_capacity(inputs.test.groups.len());
        let mut per_stream = Vec::with_capacity(inputs.test.groups.len());
        for (group_idx, g) in inputs.test.groups.iter().enumerate() {
            let features = encode_features(&g.spec, inputs.test.kind);
            let cloud = sample_model(
                &model,
                &features,
                cfg.eval_samples,
                sample_seed(cfg.eval_seed, model_idx, group_idx),
            )?;
            let obs: Vec<Pair> = g.points.iter().map(|p| [p.iops, p.latency]).collect();
            let pred: Vec<Pair> = cloud.iter().map(|p| [p.iops, p.latency]).collect();
            per_stream.push((g.load_id.clone(), g.spec.io_type, load_metrics(&obs, &pred)?));
            clouds.push(cloud);
        }

        let mut summaries = [BootstrapSummary { mean: 0.0, std: 0.0, rounds: 0 }; 6];
        for (metric_idx, summary) in summaries.iter_mut().enumerate() {
            let values: Vec<f64> =
                per_stream.iter().map(|(_, _, m)| metric_value(m, metric_idx)).collect();
            *summary = bootstrap_summary(
                &values,
                cfg.eval_bootstrap,
                bootstrap_seed(cfg.eval_seed, model_idx, metric_idx),
            )?;
        }

        let little_records = predicted_little_records(&inputs.test, &clouds)?;
        let little = little_correlation(&little_records)?;

        evals.push(ModelEval {
            choice,
            summaries,
            per_stream,
            little_records,
            little_correlation: little,
            clouds,
        });
        trained.push(model);
    }

    Ok(EvalOutcome {
        trained,
        evals,
        observed_records: observed,
        observed_little,
        test: inputs.test.clone(),
    })
}

/// Queue-balance records where each stream's measurements are replaced by
/// its predicted cloud (`clouds` aligned with `test.groups`).
fn predicted_little_records(
    test: &Dataset,
    clouds: &[Vec<PerfPoint>],
) -> Result<Vec<LittleRecord>, CliError> {
    let substitute = |idx: usize| {
        let g = &test.groups[idx];
        LoadGroup { load_id: g.load_id.clone(), spec: g.spec.clone(), points: clouds[idx].clone() }
    };
    let mut records = Vec::new();
    for id in test.load_ids() {
        let index_of = |io: IoType| {
            test.groups.iter().position(|g| g.load_id == id && g.spec.io_type == io)
        };
        let read = index_of(IoType::Read).map(substitute);
        let write = index_of(IoType::Write).map(substitute);
        records.push(little_record(read.as_ref(), write.as_ref(), test.latency_unit)?);
    }
    Ok(records)
}

pub fn little_correlation(records: &[LittleRecord]) -> Result<f64, CliError> {
    let lhs: Vec<f64> = records.iter().map(|r| r.occupancy).collect();
    let rhs: Vec<f64> = records.iter().map(|r| r.estimate).collect();
    Ok(pearson(&lhs, &rhs)?)
}

/// Nested train subsets for learning curves: one seeded shuffle of the train
/// load ids, then each size takes a prefix, so smaller sets are subsets of
/// larger ones. Sizes beyond the available loads are a usage error.
pub fn nested_train_subsets(
    train: &Dataset,
    sizes: &[usize],
) -> Result<Vec<Dataset>, CliError> {
    use rand::{Rng, SeedableRng};
    let ids: Vec<String> = train.load_ids().into_iter().map(str::to_string).collect();
    if let Some(&too_big) = sizes.iter().find(|&&s| s == 0 || s > ids.len()) {
        return Err(CliError::Usage(format!(
            "learning-curve size {too_big} outside 1..={} available train loads",
            ids.len()
        )));
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xC2B2_AE3D_27D4_EB4F);
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut out = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let keep: std::collections::HashSet<&str> =
            order[..size].iter().map(|&i| ids[i].as_str()).collect();
        let groups: Vec<LoadGroup> =
            train.groups.iter().filter(|g| keep.contains(g.load_id.as_str())).cloned().collect();
        out.push(Dataset { kind: train.kind, latency_unit: train.latency_unit, groups });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> RunConfig {
        RunConfig::load(
            None,
            &[
                "oracle.loads=8".into(),
                "oracle.k=6".into(),
                "split.test_loads=3".into(),
                "gaussian.grid=false".into(),
                "gaussian.iterations=40".into(),
                "flow.epochs=1".into(),
                "eval.samples=30".into(),
                "eval.bootstrap=50".into(),
            ]
            .to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn model_names_round_trip_and_reject_unknowns() {
        for choice in ModelChoice::ALL {
            assert_eq!(choice.as_str().parse::<ModelChoice>().unwrap(), choice);
        }
        assert!(matches!("catboost".parse::<ModelChoice>(), Err(CliError::Usage(_))));
    }

    #[test]
    fn prepare_data_is_deterministic_and_splits_by_load() {
        let cfg = tiny_cfg();
        let a = prepare_data(&cfg).unwrap();
        let b = prepare_data(&cfg).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_eq!(a.test.load_ids().len(), 3);
        for id in a.test.load_ids() {
            assert!(!a.train.load_ids().contains(&id));
        }
    }

    #[test]
    fn evaluation_covers_every_model_and_stream() {
        let cfg = tiny_cfg();
        let inputs = prepare_data(&cfg).unwrap();
        let out = run_evaluation(&cfg, &inputs, Vec::new()).unwrap();
        assert_eq!(out.evals.len(), 3);
        for eval in &out.evals {
            assert_eq!(eval.per_stream.len(), inputs.test.groups.len());
            assert_eq!(eval.clouds.len(), inputs.test.groups.len());
            assert!(eval.little_correlation.is_finite());
            for s in &eval.summaries {
                assert!(s.mean.is_finite() && s.std.is_finite());
            }
        }
        assert_eq!(out.observed_records.len(), 3);
        // Generative models honor the requested cloud size; knn replays its
        // nearest stored stream.
        assert_eq!(out.evals[1].clouds[0].len(), cfg.eval_samples);
        assert_eq!(out.evals[2].clouds[0].len(), cfg.eval_samples);
        assert_eq!(out.evals[0].clouds[0].len(), cfg.oracle_k);
    }

    #[test]
    fn evaluation_is_deterministic_for_a_fixed_config() {
        let cfg = tiny_cfg();
        let inputs = prepare_data(&cfg).unwrap();
        let a = run_evaluation(&cfg, &inputs, Vec::new()).unwrap();
        let b = run_evaluation(&cfg, &inputs, Vec::new()).unwrap();
        for (x, y) in a.evals.iter().zip(&b.evals) {
            assert_eq!(x.per_stream, y.per_stream);
            assert_eq!(x.summaries, y.summaries);
            assert_eq!(x.little_correlation, y.little_correlation);
        }
    }

    #[test]
    fn duplicate_pretrained_models_are_rejected() {
        let cfg = tiny_cfg();
        let inputs = prepare_data(&cfg).unwrap();
        let knn = train_model(ModelChoice::Knn, &inputs.train.groups, cfg.kind, &cfg).unwrap();
        let err = run_evaluation(&cfg, &inputs, vec![knn.clone(), knn]).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)), "{err}");
    }

    #[test]
    fn sample_seeds_differ_across_models_and_groups() {
        let mut seen = std::collections::HashSet::new();
        for model in 0..3 {
            for group in 0..200 {
                assert!(seen.insert(sample_seed(101, model, group)));
            }
        }
    }

    #[test]
    fn nested_subsets_are_nested_and_bounded() {
        let cfg = tiny_cfg();
        let inputs = prepare_data(&cfg).unwrap();
        let subsets = nested_train_subsets(&inputs.train, &[2, 4]).unwrap();
        let small: Vec<&str> = subsets[0].load_ids();
        let large: Vec<&str> = subsets[1].load_ids();
        assert_eq!(small.len(), 2);
        assert_eq!(large.len(), 4);
        for id in small {
            assert!(large.contains(&id));
        }
        assert!(matches!(
            nested_train_subsets(&inputs.train, &[6]),
            Err(CliError::Usage(_))
        ));
    }
}
