//! Parametric conditional model: a 2D Gaussian over (log IOPS, log latency)
//! whose five parameters are regressed from workload features by one
//! multi-output boosted ensemble.
//!
//! Per training group the targets are the log-space mean and the lower
//! Cholesky factor L of the inverse covariance (precision), so any predicted
//! output decodes to a symmetric positive definite covariance. The diagonal
//! of L is regressed in log parametrization; sampling draws from
//! N(mu, Sigma) and exponentiates.

use crate::boosting::{fit_ensemble, BoostError, BoostParams, GridPoint, TreeEnsemble};
use crate::domain::{encode_features, feature_dim, DatasetKind, LoadGroup, PerfPoint};
use crate::mat2::{self, Mat2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum GaussianError {
    #[error("load {load_id} has {k} measurement(s); at least 2 required")]
    DegenerateGroup { load_id: String, k: usize },
    #[error("no training groups")]
    EmptyTrainingSet,
    #[error(transparent)]
    Boost(#[from] BoostError),
    #[error("model deserialization failed: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("predicted precision factor is not invertible")]
    SingularPrecision,
}

/// Log-space moment targets of one group: mean and the lower Cholesky factor
/// of the precision matrix (Sigma^-1 = L L^T).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTargets {
    pub mu: [f64; 2],
    pub chol_precision: Mat2,
}

/// Jitter added to the log-space covariance diagonal before inversion:
/// 1e-9 * max(diag, 1). A constant group therefore yields Sigma = eps * I.
pub fn covariance_jitter(cov: &Mat2) -> f64 {
    1e-9 * cov[0][0].max(cov[1][1]).max(1.0)
}

/// Computes the regression targets of one group from its log measurements.
pub fn prepare_targets(group: &LoadGroup) -> Result<GaussianTargets, GaussianError> {
    let k = group.k();
    if k < 2 {
        return Err(GaussianError::DegenerateGroup { load_id: group.load_id.clone(), k });
    }
    let logs: Vec<[f64; 2]> =
        group.points.iter().map(|p| [p.iops.ln(), p.latency.ln()]).collect();
    let n = k as f64;
    let mut mu = [0.0, 0.0];
    for z in &logs {
        mu[0] += z[0];
        mu[1] += z[1];
    }
    mu[0] /= n;
    mu[1] /= n;

    let mut cov = [[0.0; 2]; 2];
    for z in &logs {
        let d = [z[0] - mu[0], z[1] - mu[1]];
        cov[0][0] += d[0] * d[0];
        cov[0][1] += d[0] * d[1];
        cov[1][1] += d[1] * d[1];
    }
    cov[0][0] /= n - 1.0;
    cov[0][1] /= n - 1.0;
    cov[1][1] /= n - 1.0;
    cov[1][0] = cov[0][1];

    let eps = covariance_jitter(&cov);
    cov[0][0] += eps;
    cov[1][1] += eps;

    let precision = mat2::inverse(&cov).expect("jittered covariance is positive definite");
    let chol = mat2::cholesky_lower(&precision).expect("precision of SPD matrix is SPD");
    Ok(GaussianTargets { mu, chol_precision: chol })
}

/// Flattens targets for the ensemble: (mu0, mu1, ln L11, L21, ln L22).
pub fn to_regression(t: &GaussianTargets) -> [f64; 5] {
    [
        t.mu[0],
        t.mu[1],
        t.chol_precision[0][0].ln(),
        t.chol_precision[1][0],
        t.chol_precision[1][1].ln(),
    ]
}

/// Decodes an ensemble output vector to (mu, Sigma). The log parametrization
/// of the diagonal makes Sigma positive definite for any real outputs; the
/// all-zero vector decodes to mu = 0, Sigma = I.
pub fn from_regression(out: &[f64]) -> Result<([f64; 2], Mat2), GaussianError> {
    let mu = [out[0], out[1]];
    let l = [[out[2].exp(), 0.0], [out[3], out[4].exp()]];
    let precision = mat2::matmul(&l, &mat2::transpose(&l));
    let sigma = mat2::inverse(&precision).ok_or(GaussianError::SingularPrecision)?;
    Ok((mu, sigma))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    pub format_version: u32,
    pub kind: DatasetKind,
    pub feature_dim: usize,
    pub ensemble: TreeEnsemble,
}

pub fn fit_gaussian_model(
    groups: &[LoadGroup],
    kind: DatasetKind,
    params: &BoostParams,
) -> Result<GaussianModel, GaussianError> {
    if groups.is_empty() {
        return Err(GaussianError::EmptyTrainingSet);
    }
    let mut x = Vec::with_capacity(groups.len());
    let mut y = Vec::with_capacity(groups.len());
    for g in groups {
        x.push(encode_features(&g.spec, kind));
        y.push(to_regression(&prepare_targets(g)?).to_vec());
    }
    let ensemble = fit_ensemble(&x, &y, params)?;
    Ok(GaussianModel { format_version: 1, kind, feature_dim: feature_dim(kind), ensemble })
}

/// Fits with hyperparameters chosen by grid search over tree depth and
/// learning rate. The validation slice is drawn at the *load* level (seeded
/// shuffle of distinct load ids, `val_fraction` of them), so the read and
/// write streams of one load never straddle the train/validation boundary —
/// row-level slicing would leak each validation load's sibling stream into
/// training and reward memorization. The returned model is refitted on all
/// groups with the winning parameters.
pub fn grid_fit_gaussian(
    groups: &[LoadGroup],
    kind: DatasetKind,
    base: &BoostParams,
    depths: &[usize],
    learning_rates: &[f64],
    val_fraction: f64,
) -> Result<(GaussianModel, Vec<GridPoint>), GaussianError> {
    use rand::Rng;
    if groups.is_empty() {
        return Err(GaussianError::EmptyTrainingSet);
    }
    let mut ids: Vec<&str> = Vec::new();
    for g in groups {
        if !ids.contains(&g.load_id.as_str()) {
            ids.push(&g.load_id);
        }
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(base.seed);
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let n_val = ((ids.len() as f64 * val_fraction).ceil() as usize).clamp(1, ids.len() - 1);
    let val_ids: std::collections::HashSet<&str> =
        order[..n_val].iter().map(|&i| ids[i]).collect();

    let mut train_x = Vec::new();
    let mut train_y = Vec::new();
    let mut val_x = Vec::new();
    let mut val_y = Vec::new();
    for g in groups {
        let x = encode_features(&g.spec, kind);
        let y = to_regression(&prepare_targets(g)?).to_vec();
        if val_ids.contains(g.load_id.as_str()) {
            val_x.push(x);
            val_y.push(y);
        } else {
            train_x.push(x);
            train_y.push(y);
        }
    }

    let mut table = Vec::new();
    let mut best: Option<(f64, BoostParams)> = None;
    for &depth in depths {
        for &lr in learning_rates {
            let params =
                BoostParams { max_depth: depth, learning_rate: lr, ..base.clone() };
            let ensemble = fit_ensemble(&train_x, &train_y, &params)?;
            let mut sse = 0.0;
            for (x, y) in val_x.iter().zip(&val_y) {
                let p = ensemble.predict(x);
                sse += p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
            let val_loss = sse / val_x.len() as f64;
            table.push(GridPoint { max_depth: depth, learning_rate: lr, val_loss });
            if best.as_ref().map_or(true, |(b, _)| val_loss < *b) {
                best = Some((val_loss, params));
            }
        }
    }
    let (_, chosen) = best.expect("grid is non-empty");
    let model = fit_gaussian_model(groups, kind, &chosen)?;
    Ok((model, table))
}

/// Predicted log-space distribution for a feature vector.
pub fn predict_gaussian(
    model: &GaussianModel,
    features: &[f64],
) -> Result<([f64; 2], Mat2), GaussianError> {
    from_regression(&model.ensemble.predict(features))
}

/// Draws `n` performance points: z ~ N(mu, Sigma) in log space via the
/// Cholesky factor of Sigma, then exponentiated per dimension.
pub fn sample_performance(
    model: &GaussianModel,
    features: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<PerfPoint>, GaussianError> {
    let (mu, sigma) = predict_gaussian(model, features)?;
    let a = mat2::cholesky_lower(&sigma).ok_or(GaussianError::SingularPrecision)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let e0: f64 = StandardNormal.sample(&mut rng);
        let e1: f64 = StandardNormal.sample(&mut rng);
        let z0 = mu[0] + a[0][0] * e0;
        let z1 = mu[1] + a[1][0] * e0 + a[1][1] * e1;
        out.push(PerfPoint { iops: z0.exp(), latency: z1.exp() });
    }
    Ok(out)
}

impl GaussianModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, GaussianError> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{IoType, LoadType, WorkloadSpec};
    use approx::assert_relative_eq;

    fn group_from(points: Vec<PerfPoint>) -> LoadGroup {
        LoadGroup {
            load_id: "g".into(),
            spec: WorkloadSpec {
                load_type: LoadType::Random,
                io_type: IoType::Read,
                read_fraction: 50.0,
                block_size_kb: 8,
                n_jobs: 2,
                queue_depth: 2,
                raid: None,
            },
            points,
        }
    }

    #[test]
    fn constant_group_yields_jitter_covariance() {
        let g = group_from(vec![PerfPoint { iops: 100.0, latency: 0.5 }; 4]);
        let t = prepare_targets(&g).unwrap();
        // Sigma = eps * I with eps = 1e-9, so L = I / sqrt(eps)
        let expected = 1.0 / 1e-9f64.sqrt();
        assert_relative_eq!(t.chol_precision[0][0], expected, max_relative = 1e-9);
        assert_relative_eq!(t.chol_precision[1][1], expected, max_relative = 1e-9);
        assert_relative_eq!(t.chol_precision[1][0], 0.0, epsilon = 1e-6);
        assert_relative_eq!(t.mu[0], 100.0f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(t.mu[1], 0.5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn targets_round_trip_to_moments() {
        let g = group_from(vec![
            PerfPoint { iops: 90.0, latency: 0.4 },
            PerfPoint { iops: 130.0, latency: 0.3 },
            PerfPoint { iops: 105.0, latency: 0.45 },
            PerfPoint { iops: 118.0, latency: 0.33 },
            PerfPoint { iops: 97.0, latency: 0.41 },
        ]);
        let t = prepare_targets(&g).unwrap();
        let (mu, sigma) = from_regression(&to_regression(&t)).unwrap();
        assert_relative_eq!(mu[0], t.mu[0], epsilon = 1e-12);
        assert_relative_eq!(mu[1], t.mu[1], epsilon = 1e-12);

        // Sigma must reproduce the jittered log covariance
        let logs: Vec<[f64; 2]> = g.points.iter().map(|p| [p.iops.ln(), p.latency.ln()]).collect();
        let n = logs.len() as f64;
        let m = [logs.iter().map(|z| z[0]).sum::<f64>() / n, logs.iter().map(|z| z[1]).sum::<f64>() / n];
        let mut cov = [[0.0; 2]; 2];
        for z in &logs {
            cov[0][0] += (z[0] - m[0]).powi(2);
            cov[0][1] += (z[0] - m[0]) * (z[1] - m[1]);
            cov[1][1] += (z[1] - m[1]).powi(2);
        }
        cov[0][0] /= n - 1.0;
        cov[0][1] /= n - 1.0;
        cov[1][1] /= n - 1.0;
        let eps = covariance_jitter(&cov);
        assert_relative_eq!(sigma[0][0], cov[0][0] + eps, max_relative = 1e-9);
        assert_relative_eq!(sigma[0][1], cov[0][1], max_relative = 1e-9, epsilon = 1e-12);
        assert_relative_eq!(sigma[1][1], cov[1][1] + eps, max_relative = 1e-9);
    }

    #[test]
    fn zero_outputs_decode_to_standard_normal() {
        let (mu, sigma) = from_regression(&[0.0; 5]).unwrap();
        assert_eq!(mu, [0.0, 0.0]);
        assert_eq!(sigma, [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn sampling_matches_predicted_moments() {
        // hand-built model: no trees, base prediction encodes mu and L
        let mu = [2.0, -1.0];
        let sigma = [[0.09, -0.048], [-0.048, 0.04]]; // corr -0.8, stds 0.3 / 0.2
        let prec = mat2::inverse(&sigma).unwrap();
        let l = mat2::cholesky_lower(&prec).unwrap();
        let base = vec![mu[0], mu[1], l[0][0].ln(), l[1][0], l[1][1].ln()];
        let model = GaussianModel {
            format_version: 1,
            kind: DatasetKind::CacheRandom,
            feature_dim: 7,
            ensemble: TreeEnsemble {
                params: BoostParams { n_iterations: 0, ..Default::default() },
                n_features: 7,
                n_outputs: 5,
                base_prediction: base,
                trees: vec![],
                train_loss: vec![0.0],
            },
        };
        let feats = vec![0.0; 7];
        let n = 100_000;
        let pts = sample_performance(&model, &feats, n, 99).unwrap();
        assert_eq!(pts.len(), n);
        let logs: Vec<[f64; 2]> = pts.iter().map(|p| [p.iops.ln(), p.latency.ln()]).collect();
        let nf = n as f64;
        let m = [
            logs.iter().map(|z| z[0]).sum::<f64>() / nf,
            logs.iter().map(|z| z[1]).sum::<f64>() / nf,
        ];
        let mut cov = [[0.0; 2]; 2];
        for z in &logs {
            cov[0][0] += (z[0] - m[0]).powi(2);
            cov[0][1] += (z[0] - m[0]) * (z[1] - m[1]);
            cov[1][1] += (z[1] - m[1]).powi(2);
        }
        cov[0][0] /= nf - 1.0;
        cov[0][1] /= nf - 1.0;
        cov[1][1] /= nf - 1.0;
        // within 5% relative or 1e-3 absolute
        let close = |a: f64, b: f64| (a - b).abs() <= (0.05 * b.abs()).max(1e-3);
        assert!(close(m[0], mu[0]), "mean0 {} vs {}", m[0], mu[0]);
        assert!(close(m[1], mu[1]), "mean1 {} vs {}", m[1], mu[1]);
        assert!(close(cov[0][0], sigma[0][0]), "var0 {} vs {}", cov[0][0], sigma[0][0]);
        assert!(close(cov[1][1], sigma[1][1]), "var1 {} vs {}", cov[1][1], sigma[1][1]);
        assert!(close(cov[0][1], sigma[0][1]), "cov {} vs {}", cov[0][1], sigma[0][1]);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let g = group_from(vec![
            PerfPoint { iops: 90.0, latency: 0.4 },
            PerfPoint { iops: 130.0, latency: 0.3 },
            PerfPoint { iops: 100.0, latency: 0.35 },
        ]);
        let params = BoostParams { n_iterations: 5, ..Default::default() };
        let model = fit_gaussian_model(&[g.clone()], DatasetKind::CacheRandom, &params).unwrap();
        let f = encode_features(&g.spec, DatasetKind::CacheRandom);
        let a = sample_performance(&model, &f, 16, 5).unwrap();
        let b = sample_performance(&model, &f, 16, 5).unwrap();
        let c = sample_performance(&model, &f, 16, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for p in &a {
            assert!(p.iops > 0.0 && p.latency > 0.0);
        }
    }

    #[test]
    fn save_load_round_trips_bit_exact() {
        let g = group_from(vec![
            PerfPoint { iops: 90.0, latency: 0.4 },
            PerfPoint { iops: 130.0, latency: 0.3 },
            PerfPoint { iops: 100.0, latency: 0.35 },
        ]);
        let params = BoostParams { n_iterations: 3, ..Default::default() };
        let model = fit_gaussian_model(&[g.clone()], DatasetKind::CacheRandom, &params).unwrap();
        let back = GaussianModel::from_json(&model.to_json()).unwrap();
        assert_eq!(model, back);
        let f = encode_features(&g.spec, DatasetKind::CacheRandom);
        assert_eq!(
            sample_performance(&model, &f, 8, 1).unwrap(),
            sample_performance(&back, &f, 8, 1).unwrap()
        );
    }

    #[test]
    fn grid_fit_evaluates_every_combination_and_refits_on_all_loads() {
        use crate::domain::{IoType, LoadType, WorkloadSpec};
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut groups = Vec::new();
        for i in 0..12 {
            let jobs = 1 + (i % 6) as u32 * 3;
            let spec = WorkloadSpec {
                load_type: LoadType::Random,
                io_type: if i % 2 == 0 { IoType::Read } else { IoType::Write },
                read_fraction: 40.0,
                block_size_kb: 16,
                n_jobs: jobs,
                queue_depth: 4,
                raid: None,
            };
            let mu = 4.0 + 0.5 * f64::from(jobs).ln();
            let points = (0..8)
                .map(|_| {
                    let e0: f64 = StandardNormal.sample(&mut rng);
                    let e1: f64 = StandardNormal.sample(&mut rng);
                    PerfPoint { iops: (mu + 0.1 * e0).exp(), latency: (-mu + 0.1 * e1).exp() }
                })
                .collect();
            groups.push(LoadGroup { load_id: format!("load-{}", i / 2), spec, points });
        }
        let base = BoostParams { n_iterations: 50, ..Default::default() };
        let (model, table) =
            grid_fit_gaussian(&groups, DatasetKind::CacheRandom, &base, &[2, 4], &[0.05, 0.1], 0.25)
                .unwrap();
        assert_eq!(table.len(), 4);
        assert!(table.iter().all(|p| p.val_loss.is_finite()));
        let best = table
            .iter()
            .fold(f64::INFINITY, |acc, p| acc.min(p.val_loss));
        let chosen = &model.ensemble.params;
        let chosen_point = table
            .iter()
            .find(|p| p.max_depth == chosen.max_depth && p.learning_rate == chosen.learning_rate)
            .unwrap();
        assert_eq!(chosen_point.val_loss, best);
        // refit uses every group: prediction at a training load is tight
        let f = encode_features(&groups[0].spec, DatasetKind::CacheRandom);
        let (mu, _) = predict_gaussian(&model, &f).unwrap();
        let emp: f64 =
            groups[0].points.iter().map(|p| p.iops.ln()).sum::<f64>() / groups[0].points.len() as f64;
        assert!((mu[0] - emp).abs() < 0.5, "refit prediction {mu:?} vs empirical {emp}");
    }
}
