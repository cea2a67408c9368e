//! Synthetic measurement generator with known ground truth.
//!
//! Each workload gets a log-normal (IOPS, latency) law whose parameters
//! follow simple storage heuristics: throughput grows sublinearly with
//! outstanding requests and disk count, shrinks with block size, and writes
//! pay a redundancy penalty. The latency mean is then solved from the
//! queueing balance so that `E[IOPS] * E[latency]` summed over a load's
//! streams equals `queue_depth * n_jobs` exactly, which makes generated data
//! pass the balance check by construction and gives closed-form moments to
//! test model recovery against.

use crate::domain::{IoType, LoadType, PerfPoint, WorkloadSpec};
use crate::ingest::{Dataset, LatencyUnit};
use crate::mat2::Mat2;
use crate::sobol::WorkloadPlan;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub seed: u64,
    /// Log-space standard deviation of both IOPS and latency.
    pub noise_scale: f64,
    /// Log-space IOPS/latency correlation; negative, as bursts of high
    /// throughput coincide with low latency.
    pub log_correlation: f64,
    pub iops_base: f64,
    pub qd_gain: f64,
    pub qd_scale: f64,
    pub block_exponent: f64,
    pub write_penalty: f64,
    pub disk_gain: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            seed: 42,
            noise_scale: 0.2,
            log_correlation: -0.8,
            iops_base: 20_000f64.ln(),
            qd_gain: 0.5,
            qd_scale: 4.0,
            block_exponent: 0.3,
            write_penalty: 0.15,
            disk_gain: 0.2,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("need at least 2 samples per load, got {k}")]
    TooFewSamples { k: usize },
}

/// Ground-truth law of one stream: log-space Gaussian parameters and the
/// implied arithmetic means.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMoments {
    pub log_mean: [f64; 2],
    pub log_cov: Mat2,
    pub mean_iops: f64,
    pub mean_latency: f64,
}

/// Fraction of the load's outstanding requests carried by this stream.
/// Random loads split between their read and write streams; the affine map
/// keeps both streams active at the read-fraction extremes and the two
/// shares always sum to one. Sequential loads run a single stream.
fn stream_share(spec: &WorkloadSpec) -> f64 {
    match spec.load_type {
        LoadType::Sequential => 1.0,
        LoadType::Random => {
            let read_share = 0.25 + 0.5 * spec.read_fraction / 100.0;
            match spec.io_type {
                IoType::Read => read_share,
                IoType::Write => 1.0 - read_share,
            }
        }
    }
}

pub fn oracle_moments(spec: &WorkloadSpec, cfg: &OracleConfig) -> OracleMoments {
    let occupancy = spec.queue_occupancy();
    let n_disks = spec.raid.map_or(1, |r| r.n_disks);
    let raid_m = spec.raid.map_or(0, |r| r.m);
    let mut mu_iops = cfg.iops_base + cfg.qd_gain * (1.0 + occupancy / cfg.qd_scale).ln()
        - cfg.block_exponent * f64::from(spec.block_size_kb).ln()
        + cfg.disk_gain * f64::from(n_disks).ln();
    if spec.io_type == IoType::Write {
        mu_iops -= cfg.write_penalty * f64::from(1 + raid_m);
    }
    let var = cfg.noise_scale * cfg.noise_scale;
    // solve the latency mean from E[IOPS] * E[latency] = occupancy * share,
    // with E[exp(z)] = exp(mu + var / 2) for each log-normal marginal
    let mu_lat = (occupancy * stream_share(spec)).ln() - mu_iops - var;
    let off = cfg.log_correlation * var;
    OracleMoments {
        log_mean: [mu_iops, mu_lat],
        log_cov: [[var, off], [off, var]],
        mean_iops: (mu_iops + var / 2.0).exp(),
        mean_latency: (mu_lat + var / 2.0).exp(),
    }
}

/// Draws `k` correlated log-normal points for one stream.
pub fn oracle_points(
    spec: &WorkloadSpec,
    k: usize,
    cfg: &OracleConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<PerfPoint> {
    let m = oracle_moments(spec, cfg);
    let rho = cfg.log_correlation;
    let cross = (1.0 - rho * rho).sqrt();
    (0..k)
        .map(|_| {
            let e0: f64 = StandardNormal.sample(rng);
            let e1: f64 = StandardNormal.sample(rng);
            let z0 = m.log_mean[0] + cfg.noise_scale * e0;
            let z1 = m.log_mean[1] + cfg.noise_scale * (rho * e0 + cross * e1);
            PerfPoint { iops: z0.exp(), latency: z1.exp() }
        })
        .collect()
}

/// Synthesizes `k` repetitions for every stream of the plan. Each stream gets
/// its own deterministic generator, so the data for a given stream index does
/// not depend on `k` ordering elsewhere. Latencies are in seconds.
pub fn generate_measurements(
    plan: &WorkloadPlan,
    k: usize,
    cfg: &OracleConfig,
) -> Result<Dataset, OracleError> {
    if k < 2 {
        return Err(OracleError::TooFewSamples { k });
    }
    let mut groups = Vec::with_capacity(plan.loads.len());
    for (i, load) in plan.loads.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(
            cfg.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        groups.push(crate::domain::LoadGroup {
            load_id: load.load_id.clone(),
            spec: load.spec.clone(),
            points: oracle_points(&load.spec, k, cfg, &mut rng),
        });
    }
    Ok(Dataset { kind: plan.kind, latency_unit: Some(LatencyUnit::Seconds), groups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DatasetKind, RaidConfig};
    use crate::littlelaw::{dataset_little_records, reliability_filter};
    use crate::sobol::{plan_workloads, ParameterSpace, PlannedLoad};

    fn spec(io: IoType, rf: f64, jobs: u32, depth: u32, block: u32) -> WorkloadSpec {
        WorkloadSpec {
            load_type: LoadType::Random,
            io_type: io,
            read_fraction: rf,
            block_size_kb: block,
            n_jobs: jobs,
            queue_depth: depth,
            raid: Some(RaidConfig { k: 4, m: 2, n_disks: 12 }),
        }
    }

    #[test]
    fn zero_noise_satisfies_queue_balance_exactly() {
        let cfg = OracleConfig { noise_scale: 0.0, ..Default::default() };
        let plan = WorkloadPlan {
            kind: DatasetKind::SsdRandom,
            loads: vec![
                PlannedLoad { load_id: "l1".into(), spec: spec(IoType::Read, 70.0, 4, 8, 16) },
                PlannedLoad { load_id: "l1".into(), spec: spec(IoType::Write, 70.0, 4, 8, 16) },
            ],
        };
        let ds = generate_measurements(&plan, 3, &cfg).unwrap();
        let recs = dataset_little_records(&ds).unwrap();
        assert_eq!(recs.len(), 1);
        assert!((recs[0].estimate - recs[0].occupancy).abs() < 1e-9 * recs[0].occupancy);
    }

    #[test]
    fn stream_shares_sum_to_one_and_stay_active_at_extremes() {
        let r = stream_share(&spec(IoType::Read, 0.0, 1, 1, 4));
        let w = stream_share(&spec(IoType::Write, 0.0, 1, 1, 4));
        assert!((r - 0.25).abs() < 1e-12);
        assert!((w - 0.75).abs() < 1e-12);
        let r = stream_share(&spec(IoType::Read, 70.0, 1, 1, 4));
        let w = stream_share(&spec(IoType::Write, 70.0, 1, 1, 4));
        assert!((r - 0.6).abs() < 1e-12);
        assert!((r + w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_data_mostly_passes_reliability_filter() {
        let plan = plan_workloads(&ParameterSpace::for_kind(DatasetKind::SsdRandom), 40, 1).unwrap();
        let ds = generate_measurements(&plan, 30, &OracleConfig::default()).unwrap();
        let recs = dataset_little_records(&ds).unwrap();
        let kept = reliability_filter(&recs, 0.3);
        assert!(kept.len() * 10 >= recs.len() * 9, "{} of {}", kept.len(), recs.len());
    }

    #[test]
    fn sample_moments_match_ground_truth() {
        let cfg = OracleConfig::default();
        let s = spec(IoType::Read, 60.0, 8, 16, 32);
        let truth = oracle_moments(&s, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let pts = oracle_points(&s, 40_000, &cfg, &mut rng);
        let n = pts.len() as f64;
        let logs: Vec<[f64; 2]> = pts.iter().map(|p| [p.iops.ln(), p.latency.ln()]).collect();
        let mean = [
            logs.iter().map(|l| l[0]).sum::<f64>() / n,
            logs.iter().map(|l| l[1]).sum::<f64>() / n,
        ];
        assert!((mean[0] - truth.log_mean[0]).abs() < 0.01);
        assert!((mean[1] - truth.log_mean[1]).abs() < 0.01);
        let mut cov = [[0.0; 2]; 2];
        for l in &logs {
            let d = [l[0] - mean[0], l[1] - mean[1]];
            for (i, di) in d.iter().enumerate() {
                for (j, dj) in d.iter().enumerate() {
                    cov[i][j] += di * dj / (n - 1.0);
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (cov[i][j] - truth.log_cov[i][j]).abs() < 0.05 * cfg.noise_scale.powi(2),
                    "cov[{i}][{j}] = {} vs {}",
                    cov[i][j],
                    truth.log_cov[i][j]
                );
            }
        }
        let mean_iops = pts.iter().map(|p| p.iops).sum::<f64>() / n;
        assert!((mean_iops - truth.mean_iops).abs() < 0.02 * truth.mean_iops);
    }

    #[test]
    fn throughput_heuristics_hold() {
        let cfg = OracleConfig::default();
        let shallow = oracle_moments(&spec(IoType::Read, 50.0, 1, 2, 16), &cfg);
        let deep = oracle_moments(&spec(IoType::Read, 50.0, 8, 16, 16), &cfg);
        assert!(deep.mean_iops > shallow.mean_iops);

        let small = oracle_moments(&spec(IoType::Read, 50.0, 4, 8, 4), &cfg);
        let large = oracle_moments(&spec(IoType::Read, 50.0, 4, 8, 64), &cfg);
        assert!(small.mean_iops > large.mean_iops);

        let read = oracle_moments(&spec(IoType::Read, 50.0, 4, 8, 16), &cfg);
        let write = oracle_moments(&spec(IoType::Write, 50.0, 4, 8, 16), &cfg);
        assert!(read.mean_iops > write.mean_iops);
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let plan = plan_workloads(&ParameterSpace::for_kind(DatasetKind::CacheRandom), 10, 1).unwrap();
        let cfg = OracleConfig::default();
        let a = generate_measurements(&plan, 5, &cfg).unwrap();
        let b = generate_measurements(&plan, 5, &cfg).unwrap();
        assert_eq!(a.groups, b.groups);
        let c = generate_measurements(&plan, 5, &OracleConfig { seed: 7, ..cfg }).unwrap();
        assert_ne!(a.groups, c.groups);
    }

    #[test]
    fn log_correlation_is_negative_in_samples() {
        let cfg = OracleConfig::default();
        let s = spec(IoType::Read, 50.0, 4, 8, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts = oracle_points(&s, 5000, &cfg, &mut rng);
        let logs: Vec<[f64; 2]> = pts.iter().map(|p| [p.iops.ln(), p.latency.ln()]).collect();
        let xs: Vec<f64> = logs.iter().map(|l| l[0]).collect();
        let ys: Vec<f64> = logs.iter().map(|l| l[1]).collect();
        let r = crate::metrics::pearson(&xs, &ys).unwrap();
        assert!((r - cfg.log_correlation).abs() < 0.05, "r = {r}");
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let plan = plan_workloads(&ParameterSpace::for_kind(DatasetKind::CacheRandom), 2, 1).unwrap();
        assert!(matches!(
            generate_measurements(&plan, 1, &OracleConfig::default()),
            Err(OracleError::TooFewSamples { k: 1 })
        ));
    }

    #[test]
    fn generated_csv_round_trips_through_ingest() {
        let plan = plan_workloads(&ParameterSpace::for_kind(DatasetKind::HddSequential), 6, 1).unwrap();
        let ds = generate_measurements(&plan, 4, &OracleConfig::default()).unwrap();
        let csv = crate::ingest::dataset_to_csv(&ds);
        let back = crate::ingest::parse_dataset_str(&csv, ds.kind).unwrap();
        assert_eq!(back.groups.len(), ds.groups.len());
        assert_eq!(back.latency_unit, Some(LatencyUnit::Seconds));
    }
}
