//! Distribution comparison metrics for predicted versus observed performance
//! clouds: percent errors of mean and spread, Frechet distance under Gaussian
//! moment estimates, RBF-kernel MMD, plus bootstrap summaries and Pearson
//! correlation.
//!
//! Mean/spread errors work on raw values (they are relative); FD and MMD are
//! computed after z-scoring both clouds with a scaler fitted on the observed
//! one, so dimensions with different physical scales weigh equally.

use crate::mat2::{self, Mat2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Pair = [f64; 2];

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("sample too small: need at least {needed} points, got {got}")]
    DegenerateSample { needed: usize, got: usize },
    #[error("observed mean is zero in dimension {dim}; percent error undefined")]
    ZeroMean { dim: usize },
    #[error("observed spread is zero in dimension {dim}; percent error undefined")]
    ZeroSpread { dim: usize },
    #[error("kernel bandwidth is zero (median pairwise distance vanishes)")]
    ZeroBandwidth,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

fn mean2(sample: &[Pair]) -> Pair {
    let n = sample.len() as f64;
    let mut m = [0.0, 0.0];
    for p in sample {
        m[0] += p[0];
        m[1] += p[1];
    }
    [m[0] / n, m[1] / n]
}

/// Bessel (k-1) standard deviation per dimension.
fn std2(sample: &[Pair], mean: Pair) -> Pair {
    let n = sample.len() as f64;
    let mut v = [0.0, 0.0];
    for p in sample {
        v[0] += (p[0] - mean[0]).powi(2);
        v[1] += (p[1] - mean[1]).powi(2);
    }
    [(v[0] / (n - 1.0)).sqrt(), (v[1] / (n - 1.0)).sqrt()]
}

/// Percent error of the mean per dimension:
/// |mean(pred) - mean(obs)| / |mean(obs)| * 100.
pub fn pem(obs: &[Pair], pred: &[Pair]) -> Result<Pair, MetricError> {
    if obs.is_empty() || pred.is_empty() {
        return Err(MetricError::DegenerateSample { needed: 1, got: 0 });
    }
    let mo = mean2(obs);
    let mp = mean2(pred);
    let mut out = [0.0, 0.0];
    for d in 0..2 {
        if mo[d] == 0.0 {
            return Err(MetricError::ZeroMean { dim: d });
        }
        out[d] = (mp[d] - mo[d]).abs() / mo[d].abs() * 100.0;
    }
    Ok(out)
}

/// Percent error of the spread per dimension, with Bessel standard
/// deviations: |std(pred) - std(obs)| / std(obs) * 100.
pub fn pes(obs: &[Pair], pred: &[Pair]) -> Result<Pair, MetricError> {
    if obs.len() < 2 {
        return Err(MetricError::DegenerateSample { needed: 2, got: obs.len() });
    }
    if pred.len() < 2 {
        return Err(MetricError::DegenerateSample { needed: 2, got: pred.len() });
    }
    let so = std2(obs, mean2(obs));
    let sp = std2(pred, mean2(pred));
    let mut out = [0.0, 0.0];
    for d in 0..2 {
        if so[d] == 0.0 {
            return Err(MetricError::ZeroSpread { dim: d });
        }
        out[d] = (sp[d] - so[d]).abs() / so[d] * 100.0;
    }
    Ok(out)
}

/// Per-dimension z-score transform. Standard deviations use the Bessel (k-1)
/// convention; zero-spread dimensions only center (scale 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Scaler, MetricError> {
        if rows.len() < 2 {
            return Err(MetricError::DegenerateSample { needed: 2, got: rows.len() });
        }
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += *v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (*v - *m) * (*v - *m);
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / (n - 1.0)).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Scaler { mean, std })
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn inverse(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| v * s + m).collect()
    }

    pub fn transform_pair(&self, p: Pair) -> Pair {
        [(p[0] - self.mean[0]) / self.std[0], (p[1] - self.mean[1]) / self.std[1]]
    }
}

/// Convenience: fit a scaler on 2-d pairs.
pub fn fit_scaler(obs: &[Pair]) -> Result<Scaler, MetricError> {
    Scaler::fit(&obs.iter().map(|p| p.to_vec()).collect::<Vec<_>>())
}

/// Frechet distance between two Gaussians:
/// ||mu1 - mu2||^2 + tr(S1 + S2 - 2 (S1 S2)^(1/2)).
///
/// The matrix square root uses the symmetrized product
/// S1^(1/2) S2 S1^(1/2), whose root has the same trace as (S1 S2)^(1/2).
pub fn frechet_gaussian(mu1: Pair, cov1: &Mat2, mu2: Pair, cov2: &Mat2) -> f64 {
    let d0 = mu1[0] - mu2[0];
    let d1 = mu1[1] - mu2[1];
    let root1 = mat2::sym_sqrt(cov1);
    let inner = mat2::matmul(&mat2::matmul(&root1, cov2), &root1);
    let cross = mat2::sym_sqrt(&inner);
    d0 * d0 + d1 * d1 + mat2::trace(cov1) + mat2::trace(cov2) - 2.0 * mat2::trace(&cross)
}

fn moments(sample: &[Pair]) -> (Pair, Mat2) {
    let m = mean2(sample);
    let n = sample.len() as f64;
    let mut c = [[0.0; 2]; 2];
    for p in sample {
        let d = [p[0] - m[0], p[1] - m[1]];
        c[0][0] += d[0] * d[0];
        c[0][1] += d[0] * d[1];
        c[1][1] += d[1] * d[1];
    }
    c[0][0] /= n - 1.0;
    c[0][1] /= n - 1.0;
    c[1][1] /= n - 1.0;
    c[1][0] = c[0][1];
    (m, c)
}

/// Frechet distance between the Gaussian moment estimates (mean and Bessel
/// covariance) of two point clouds.
pub fn frechet_distance(obs: &[Pair], pred: &[Pair]) -> Result<f64, MetricError> {
    if obs.len() < 2 || pred.len() < 2 {
        return Err(MetricError::DegenerateSample { needed: 2, got: obs.len().min(pred.len()) });
    }
    let (mo, co) = moments(obs);
    let (mp, cp) = moments(pred);
    Ok(frechet_gaussian(mo, &co, mp, &cp))
}

/// Squared maximum mean discrepancy (V-statistic) with an RBF kernel
/// K(u, v) = exp(-|u - v|^2 / (2 sigma^2)), where sigma is the median
/// pairwise distance over the combined sample (even count: mean of the two
/// central order statistics). Identical samples give exactly 0.
pub fn mmd_rbf(obs: &[Pair], pred: &[Pair]) -> Result<f64, MetricError> {
    if obs.is_empty() || pred.is_empty() {
        return Err(MetricError::DegenerateSample { needed: 1, got: 0 });
    }
    let combined: Vec<Pair> = obs.iter().chain(pred).copied().collect();
    if combined.len() < 2 {
        return Err(MetricError::DegenerateSample { needed: 2, got: combined.len() });
    }
    let mut dists = Vec::with_capacity(combined.len() * (combined.len() - 1) / 2);
    for i in 0..combined.len() {
        for j in i + 1..combined.len() {
            dists.push(dist(combined[i], combined[j]));
        }
    }
    dists.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let mid = dists.len() / 2;
    let sigma = if dists.len() % 2 == 1 { dists[mid] } else { 0.5 * (dists[mid - 1] + dists[mid]) };
    if sigma == 0.0 {
        return Err(MetricError::ZeroBandwidth);
    }
    let gamma = 1.0 / (2.0 * sigma * sigma);

    // Full double loops in identical order keep MMD(A, A) exactly zero.
    let term = |a: &[Pair], b: &[Pair]| -> f64 {
        let mut s = 0.0;
        for u in a {
            for v in b {
                s += (-gamma * sq_dist(*u, *v)).exp();
            }
        }
        s / (a.len() as f64 * b.len() as f64)
    };
    Ok(term(obs, obs) + term(pred, pred) - 2.0 * term(obs, pred))
}

fn sq_dist(a: Pair, b: Pair) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn dist(a: Pair, b: Pair) -> f64 {
    sq_dist(a, b).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapSummary {
    pub mean: f64,
    pub std: f64,
    pub rounds: usize,
}

/// Resamples `values` to its own size `rounds` times (with replacement,
/// ChaCha8 seeded), takes the mean of each round, and reports the mean and
/// population standard deviation of the round means.
pub fn bootstrap_summary(
    values: &[f64],
    rounds: usize,
    seed: u64,
) -> Result<BootstrapSummary, MetricError> {
    if values.is_empty() {
        return Err(MetricError::DegenerateSample { needed: 1, got: 0 });
    }
    if rounds == 0 {
        return Err(MetricError::DegenerateInput("bootstrap rounds must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut round_means = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let mut s = 0.0;
        for _ in 0..n {
            s += values[rng.gen_range(0..n)];
        }
        round_means.push(s / n as f64);
    }
    let mean = round_means.iter().sum::<f64>() / rounds as f64;
    let var = round_means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / rounds as f64;
    Ok(BootstrapSummary { mean, std: var.sqrt(), rounds })
}

/// Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::DegenerateInput(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(MetricError::DegenerateSample { needed: 2, got: a.len() });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(MetricError::DegenerateInput("zero variance input".into()));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// All per-load metrics between an observed and a predicted cloud: percent
/// errors on raw values, FD and MMD on clouds z-scored by the observed
/// cloud's scaler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadMetrics {
    pub pem: Pair,
    pub pes: Pair,
    pub fd: f64,
    pub mmd: f64,
}

pub fn load_metrics(obs: &[Pair], pred: &[Pair]) -> Result<LoadMetrics, MetricError> {
    let pem = pem(obs, pred)?;
    let pes = pes(obs, pred)?;
    let scaler = fit_scaler(obs)?;
    let obs_s: Vec<Pair> = obs.iter().map(|p| scaler.transform_pair(*p)).collect();
    let pred_s: Vec<Pair> = pred.iter().map(|p| scaler.transform_pair(*p)).collect();
    let fd = frechet_distance(&obs_s, &pred_s)?;
    let mmd = mmd_rbf(&obs_s, &pred_s)?;
    Ok(LoadMetrics { pem, pes, fd, mmd })
}
