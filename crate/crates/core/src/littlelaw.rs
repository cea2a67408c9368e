//! Queueing-balance check on measured or sampled load groups.
//!
//! For a steady-state load, outstanding requests equal throughput times
//! latency summed over the read and write streams:
//! `queue_depth * n_jobs = mean_iops_r * mean_lat_r + mean_iops_w * mean_lat_w`
//! (latencies in seconds). Loads violating the balance beyond a relative
//! tolerance are unreliable measurements and can be filtered out before
//! training.

use crate::domain::{IoType, LoadGroup};
use crate::ingest::{Dataset, LatencyUnit};
use serde::{Deserialize, Serialize};

pub const DEFAULT_REL_TOL: f64 = 0.3;

#[derive(Debug, thiserror::Error)]
pub enum LittleError {
    #[error("load {load_id}: read/write groups disagree on identity or queueing parameters")]
    MismatchedPair { load_id: String },
    #[error("load {load_id}: stream passed as {expected} has io_type {got}")]
    WrongStream { load_id: String, expected: IoType, got: IoType },
    #[error("latency unit unknown; dataset carries no `# latency_unit=` header")]
    UnitUnknown,
    #[error("no streams given")]
    NoStreams,
}

/// Both sides of the balance for one load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LittleRecord {
    pub load_id: String,
    /// queue_depth * n_jobs
    pub occupancy: f64,
    /// sum over streams of mean IOPS * mean latency (seconds)
    pub estimate: f64,
}

impl LittleRecord {
    pub fn relative_residual(&self) -> f64 {
        (self.estimate - self.occupancy) / self.occupancy
    }
}

/// Builds the balance record for one load from its read and/or write stream.
pub fn little_record(
    read: Option<&LoadGroup>,
    write: Option<&LoadGroup>,
    unit: Option<LatencyUnit>,
) -> Result<LittleRecord, LittleError> {
    let unit = unit.ok_or(LittleError::UnitUnknown)?;
    let first = read.or(write).ok_or(LittleError::NoStreams)?;
    for (g, expected) in [(read, IoType::Read), (write, IoType::Write)] {
        if let Some(g) = g {
            if g.spec.io_type != expected {
                return Err(LittleError::WrongStream {
                    load_id: g.load_id.clone(),
                    expected,
                    got: g.spec.io_type,
                });
            }
        }
    }
    if let (Some(r), Some(w)) = (read, write) {
        if r.load_id != w.load_id || r.spec.queue_occupancy() != w.spec.queue_occupancy() {
            return Err(LittleError::MismatchedPair { load_id: r.load_id.clone() });
        }
    }
    let mut estimate = 0.0;
    for g in [read, write].into_iter().flatten() {
        let k = g.points.len() as f64;
        let mean_iops: f64 = g.points.iter().map(|p| p.iops).sum::<f64>() / k;
        let mean_lat: f64 = g.points.iter().map(|p| p.latency).sum::<f64>() / k;
        estimate += mean_iops * mean_lat * unit.to_seconds();
    }
    Ok(LittleRecord {
        load_id: first.load_id.clone(),
        occupancy: first.spec.queue_occupancy(),
        estimate,
    })
}

/// Balance records for every load of a dataset, pairing read/write streams
/// by load id, in first-appearance order.
pub fn dataset_little_records(dataset: &Dataset) -> Result<Vec<LittleRecord>, LittleError> {
    let mut out = Vec::new();
    for id in dataset.load_ids() {
        let read = dataset
            .groups
            .iter()
            .find(|g| g.load_id == id && g.spec.io_type == IoType::Read);
        let write = dataset
            .groups
            .iter()
            .find(|g| g.load_id == id && g.spec.io_type == IoType::Write);
        out.push(little_record(read, write, dataset.latency_unit)?);
    }
    Ok(out)
}

/// Keeps records whose estimate stays within `rel_tol` of the occupancy;
/// order is preserved.
pub fn reliability_filter(records: &[LittleRecord], rel_tol: f64) -> Vec<LittleRecord> {
    records
        .iter()
        .filter(|r| (r.estimate - r.occupancy).abs() <= rel_tol * r.occupancy)
        .cloned()
        .collect()
}
