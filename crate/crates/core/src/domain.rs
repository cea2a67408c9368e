//! Domain types for storage workloads and performance measurements.
//!
//! A *load* is one workload configuration applied to a storage system. Every
//! load is measured once per second for a fixed duration, separately for its
//! read and write streams; the set of measurements sharing one spec (same
//! `load_id` and `io_type`) forms a [`LoadGroup`], the unit every model in
//! this toolkit trains on and predicts for.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Access pattern of a load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadType {
    Random,
    Sequential,
}

/// Direction of the measured I/O stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IoType {
    Read,
    Write,
}

/// The four supported dataset families. Each fixes an access pattern and a
/// parameter range table; see [`RangeTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    CacheRandom,
    SsdRandom,
    SsdSequential,
    HddSequential,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] = [
        DatasetKind::CacheRandom,
        DatasetKind::SsdRandom,
        DatasetKind::SsdSequential,
        DatasetKind::HddSequential,
    ];

    pub fn load_type(self) -> LoadType {
        match self {
            DatasetKind::CacheRandom | DatasetKind::SsdRandom => LoadType::Random,
            DatasetKind::SsdSequential | DatasetKind::HddSequential => LoadType::Sequential,
        }
    }

    /// Pool datasets carry RAID geometry; the cache dataset does not.
    pub fn has_raid(self) -> bool {
        !matches!(self, DatasetKind::CacheRandom)
    }

    pub fn range_table(self) -> &'static RangeTable {
        match self {
            DatasetKind::CacheRandom => &CACHE_RANDOM_RANGES,
            DatasetKind::SsdRandom => &SSD_RANDOM_RANGES,
            DatasetKind::SsdSequential => &SSD_SEQUENTIAL_RANGES,
            DatasetKind::HddSequential => &HDD_SEQUENTIAL_RANGES,
        }
    }
}

impl fmt::Display for LoadType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LoadType::Random => "random",
            LoadType::Sequential => "sequential",
        })
    }
}

impl FromStr for LoadType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(LoadType::Random),
            "sequential" => Ok(LoadType::Sequential),
            other => Err(format!("unknown load_type {other:?} (expected random|sequential)")),
        }
    }
}

impl fmt::Display for IoType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IoType::Read => "read",
            IoType::Write => "write",
        })
    }
}

impl FromStr for IoType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "read" => Ok(IoType::Read),
            "write" => Ok(IoType::Write),
            other => Err(format!("unknown io_type {other:?} (expected read|write)")),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::CacheRandom => "cache_random",
            DatasetKind::SsdRandom => "ssd_random",
            DatasetKind::SsdSequential => "ssd_sequential",
            DatasetKind::HddSequential => "hdd_sequential",
        })
    }
}

impl FromStr for DatasetKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cache_random" => Ok(DatasetKind::CacheRandom),
            "ssd_random" => Ok(DatasetKind::SsdRandom),
            "ssd_sequential" => Ok(DatasetKind::SsdSequential),
            "hdd_sequential" => Ok(DatasetKind::HddSequential),
            other => Err(format!(
                "unknown dataset kind {other:?} (expected cache_random|ssd_random|ssd_sequential|hdd_sequential)"
            )),
        }
    }
}

/// RAID geometry of a pool load: K data disks, M parity disks, and the total
/// disk count of the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RaidConfig {
    pub k: u32,
    pub m: u32,
    pub n_disks: u32,
}

impl RaidConfig {
    /// Smallest pool that can hold one stripe plus a full set of spares.
    pub fn min_disks(&self) -> u32 {
        self.k + 2 * self.m
    }
}

/// Complete description of one measured I/O stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub load_type: LoadType,
    pub io_type: IoType,
    /// Share of read operations in percent, 0..=100.
    pub read_fraction: f64,
    pub block_size_kb: u32,
    pub n_jobs: u32,
    pub queue_depth: u32,
    /// Present exactly for pool datasets, absent for the cache dataset.
    pub raid: Option<RaidConfig>,
}

impl WorkloadSpec {
    /// Total queue occupancy Q*J of the load.
    pub fn queue_occupancy(&self) -> f64 {
        f64::from(self.n_jobs) * f64::from(self.queue_depth)
    }
}

/// One per-second measurement of a stream. Both values are strictly positive;
/// ingest rejects rows violating this.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfPoint {
    /// I/O operations per second.
    pub iops: f64,
    /// Mean latency over the second, in the dataset's latency unit.
    pub latency: f64,
}

/// All measurements of one (load_id, io_type) stream, in file order.
/// Invariant: `points.len() >= 2` and all points share `spec`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadGroup {
    pub load_id: String,
    pub spec: WorkloadSpec,
    pub points: Vec<PerfPoint>,
}

impl LoadGroup {
    pub fn k(&self) -> usize {
        self.points.len()
    }
}

/// Legal parameter ranges for one dataset kind.
#[derive(Debug)]
pub struct RangeTable {
    pub load_type: LoadType,
    pub block_sizes_kb: &'static [u32],
    /// Legal read fractions: either any value in a closed interval (random
    /// kinds) or one of a fixed set (sequential kinds).
    pub read_fraction: ReadFractionRange,
    pub n_jobs: (u32, u32),
    pub queue_depth: (u32, u32),
    /// Legal (K, M) schemes, or None when RAID fields must be absent.
    pub raid_schemes: Option<&'static [(u32, u32)]>,
    pub max_disks: u32,
}

#[derive(Debug)]
pub enum ReadFractionRange {
    Interval(f64, f64),
    Set(&'static [f64]),
}

impl ReadFractionRange {
    fn contains(&self, v: f64) -> bool {
        match self {
            ReadFractionRange::Interval(lo, hi) => v >= *lo && v <= *hi,
            ReadFractionRange::Set(vals) => vals.iter().any(|x| *x == v),
        }
    }

    fn describe(&self) -> String {
        match self {
            ReadFractionRange::Interval(lo, hi) => format!("[{lo}, {hi}]"),
            ReadFractionRange::Set(vals) => format!("{vals:?}"),
        }
    }
}

pub const POOL_RAID_SCHEMES: [(u32, u32); 6] = [(1, 1), (2, 1), (2, 2), (4, 1), (4, 2), (8, 2)];

pub static CACHE_RANDOM_RANGES: RangeTable = RangeTable {
    load_type: LoadType::Random,
    block_sizes_kb: &[4, 8, 16, 32, 64, 128, 256],
    read_fraction: ReadFractionRange::Interval(0.0, 100.0),
    n_jobs: (1, 64),
    queue_depth: (1, 16),
    raid_schemes: None,
    max_disks: 0,
};

pub static SSD_RANDOM_RANGES: RangeTable = RangeTable {
    load_type: LoadType::Random,
    block_sizes_kb: &[4, 8, 16, 32, 64],
    read_fraction: ReadFractionRange::Interval(0.0, 100.0),
    n_jobs: (1, 32),
    queue_depth: (1, 32),
    raid_schemes: Some(&POOL_RAID_SCHEMES),
    max_disks: 24,
};

pub static SSD_SEQUENTIAL_RANGES: RangeTable = RangeTable {
    load_type: LoadType::Sequential,
    block_sizes_kb: &[128, 256, 512, 1024],
    read_fraction: ReadFractionRange::Set(&[0.0]),
    n_jobs: (1, 20),
    queue_depth: (1, 32),
    raid_schemes: Some(&POOL_RAID_SCHEMES),
    max_disks: 24,
};

pub static HDD_SEQUENTIAL_RANGES: RangeTable = RangeTable {
    load_type: LoadType::Sequential,
    block_sizes_kb: &[128, 256, 512, 1024],
    read_fraction: ReadFractionRange::Set(&[0.0, 100.0]),
    n_jobs: (1, 20),
    queue_depth: (1, 32),
    raid_schemes: Some(&POOL_RAID_SCHEMES),
    max_disks: 24,
};

/// One violated constraint found by [`validate_spec`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecViolation {
    #[error("{field} = {value} outside legal range {legal}")]
    RangeViolation {
        field: &'static str,
        value: String,
        legal: String,
    },
    #[error("missing required field {field}")]
    MissingField { field: &'static str },
    #[error("field {field} must be absent for this dataset kind")]
    UnexpectedField { field: &'static str },
}

/// Checks every field of `spec` against the range table of `kind` and returns
/// all violations, not just the first.
pub fn validate_spec(spec: &WorkloadSpec, kind: DatasetKind) -> Result<(), Vec<SpecViolation>> {
    let table = kind.range_table();
    let mut violations = Vec::new();

    if spec.load_type != table.load_type {
        violations.push(SpecViolation::RangeViolation {
            field: "load_type",
            value: spec.load_type.to_string(),
            legal: table.load_type.to_string(),
        });
    }
    if !table.block_sizes_kb.contains(&spec.block_size_kb) {
        violations.push(SpecViolation::RangeViolation {
            field: "block_size_kb",
            value: spec.block_size_kb.to_string(),
            legal: format!("{:?}", table.block_sizes_kb),
        });
    }
    if !spec.read_fraction.is_finite() || !table.read_fraction.contains(spec.read_fraction) {
        violations.push(SpecViolation::RangeViolation {
            field: "read_fraction",
            value: spec.read_fraction.to_string(),
            legal: table.read_fraction.describe(),
        });
    } else if table.load_type == LoadType::Sequential {
        // Sequential loads are pure, so the measured stream is fixed by the
        // read fraction: 100% -> read, 0% -> write.
        let expected = if spec.read_fraction == 100.0 { IoType::Read } else { IoType::Write };
        if spec.io_type != expected {
            violations.push(SpecViolation::RangeViolation {
                field: "io_type",
                value: spec.io_type.to_string(),
                legal: format!("{expected} (read_fraction = {})", spec.read_fraction),
            });
        }
    }
    check_int_range(&mut violations, "n_jobs", spec.n_jobs, table.n_jobs);
    check_int_range(&mut violations, "queue_depth", spec.queue_depth, table.queue_depth);

    match (table.raid_schemes, spec.raid) {
        (None, None) => {}
        (None, Some(_)) => violations.push(SpecViolation::UnexpectedField { field: "raid_k/raid_m/n_disks" }),
        (Some(_), None) => violations.push(SpecViolation::MissingField { field: "raid_k/raid_m/n_disks" }),
        (Some(schemes), Some(raid)) => {
            if !schemes.contains(&(raid.k, raid.m)) {
                violations.push(SpecViolation::RangeViolation {
                    field: "raid_k+raid_m",
                    value: format!("{}+{}", raid.k, raid.m),
                    legal: format!("{schemes:?}"),
                });
            } else {
                let (lo, hi) = (raid.min_disks(), table.max_disks);
                if raid.n_disks < lo || raid.n_disks > hi {
                    violations.push(SpecViolation::RangeViolation {
                        field: "n_disks",
                        value: raid.n_disks.to_string(),
                        legal: format!("[{lo}, {hi}] for raid {}+{}", raid.k, raid.m),
                    });
                }
            }
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

fn check_int_range(out: &mut Vec<SpecViolation>, field: &'static str, value: u32, range: (u32, u32)) {
    if value < range.0 || value > range.1 {
        out.push(SpecViolation::RangeViolation {
            field,
            value: value.to_string(),
            legal: format!("[{}, {}]", range.0, range.1),
        });
    }
}

/// Feature names for pool datasets, in encoding order.
pub const POOL_FEATURE_NAMES: [&str; 10] = [
    "load_type",
    "io_type",
    "read_fraction",
    "block_size_kb",
    "n_jobs",
    "queue_depth",
    "jobs_times_depth",
    "raid_k",
    "raid_m",
    "n_disks",
];

/// Feature names for the cache dataset: the pool list minus the RAID columns.
pub const CACHE_FEATURE_NAMES: [&str; 7] = [
    "load_type",
    "io_type",
    "read_fraction",
    "block_size_kb",
    "n_jobs",
    "queue_depth",
    "jobs_times_depth",
];

pub fn feature_dim(kind: DatasetKind) -> usize {
    if kind.has_raid() {
        POOL_FEATURE_NAMES.len()
    } else {
        CACHE_FEATURE_NAMES.len()
    }
}

pub fn feature_names(kind: DatasetKind) -> &'static [&'static str] {
    if kind.has_raid() {
        &POOL_FEATURE_NAMES
    } else {
        &CACHE_FEATURE_NAMES
    }
}

/// Encodes a previously validated spec as an ordered numeric feature vector.
///
/// Enums encode as random=0/sequential=1 and read=0/write=1; the derived
/// `jobs_times_depth` feature is n_jobs * queue_depth. Pool specs yield 10
/// features, cache specs 7.
///
/// Panics if a pool spec lacks RAID fields (callers must validate first).
pub fn encode_features(spec: &WorkloadSpec, kind: DatasetKind) -> Vec<f64> {
    let mut features = vec![
        match spec.load_type {
            LoadType::Random => 0.0,
            LoadType::Sequential => 1.0,
        },
        match spec.io_type {
            IoType::Read => 0.0,
            IoType::Write => 1.0,
        },
        spec.read_fraction,
        f64::from(spec.block_size_kb),
        f64::from(spec.n_jobs),
        f64::from(spec.queue_depth),
        spec.queue_occupancy(),
    ];
    if kind.has_raid() {
        let raid = spec.raid.expect("pool spec validated without RAID fields");
        features.push(f64::from(raid.k));
        features.push(f64::from(raid.m));
        features.push(f64::from(raid.n_disks));
    }
    features
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cache_spec() -> WorkloadSpec {
        WorkloadSpec {
            load_type: LoadType::Random,
            io_type: IoType::Read,
            read_fraction: 75.0,
            block_size_kb: 16,
            n_jobs: 8,
            queue_depth: 4,
            raid: None,
        }
    }

    fn pool_spec() -> WorkloadSpec {
        WorkloadSpec {
            load_type: LoadType::Random,
            io_type: IoType::Write,
            read_fraction: 30.0,
            block_size_kb: 8,
            n_jobs: 16,
            queue_depth: 8,
            raid: Some(RaidConfig { k: 4, m: 2, n_disks: 12 }),
        }
    }

    #[test]
    fn valid_specs_pass() {
        assert!(validate_spec(&cache_spec(), DatasetKind::CacheRandom).is_ok());
        assert!(validate_spec(&pool_spec(), DatasetKind::SsdRandom).is_ok());
    }

    #[test]
    fn raid_4_2_with_7_disks_violates_min() {
        let mut spec = pool_spec();
        spec.raid = Some(RaidConfig { k: 4, m: 2, n_disks: 7 });
        let violations = validate_spec(&spec, DatasetKind::SsdRandom).unwrap_err();
        assert_eq!(violations.len(), 1);
        match &violations[0] {
            SpecViolation::RangeViolation { field, legal, .. } => {
                assert_eq!(*field, "n_disks");
                assert!(legal.contains("[8, 24]"), "got {legal}");
            }
            other => panic!("unexpected violation {other:?}"),
        }
    }

    #[test]
    fn pool_spec_without_raid_is_missing_field() {
        let mut spec = pool_spec();
        spec.raid = None;
        let violations = validate_spec(&spec, DatasetKind::SsdRandom).unwrap_err();
        assert!(matches!(violations[0], SpecViolation::MissingField { .. }));
    }

    #[test]
    fn cache_spec_with_raid_is_unexpected_field() {
        let mut spec = cache_spec();
        spec.raid = Some(RaidConfig { k: 1, m: 1, n_disks: 4 });
        let violations = validate_spec(&spec, DatasetKind::CacheRandom).unwrap_err();
        assert!(matches!(violations[0], SpecViolation::UnexpectedField { .. }));
    }

    #[test]
    fn all_violations_reported_together() {
        let spec = WorkloadSpec {
            load_type: LoadType::Sequential,
            io_type: IoType::Read,
            read_fraction: 42.0,
            block_size_kb: 3,
            n_jobs: 0,
            queue_depth: 99,
            raid: None,
        };
        let violations = validate_spec(&spec, DatasetKind::CacheRandom).unwrap_err();
        // load_type, block_size, read_fraction ok (42 in [0,100]), n_jobs, queue_depth
        assert_eq!(violations.len(), 4);
    }

    #[test]
    fn sequential_io_type_must_match_read_fraction() {
        let spec = WorkloadSpec {
            load_type: LoadType::Sequential,
            io_type: IoType::Read,
            read_fraction: 0.0,
            block_size_kb: 256,
            n_jobs: 4,
            queue_depth: 2,
            raid: Some(RaidConfig { k: 2, m: 1, n_disks: 10 }),
        };
        let violations = validate_spec(&spec, DatasetKind::HddSequential).unwrap_err();
        assert_eq!(violations.len(), 1);
        assert!(violations[0].to_string().contains("io_type"));
    }

    #[test]
    fn encode_dimensions_and_order() {
        let cache = encode_features(&cache_spec(), DatasetKind::CacheRandom);
        assert_eq!(cache.len(), CACHE_FEATURE_NAMES.len());
        assert_eq!(cache, vec![0.0, 0.0, 75.0, 16.0, 8.0, 4.0, 32.0]);

        let pool = encode_features(&pool_spec(), DatasetKind::SsdRandom);
        assert_eq!(pool.len(), POOL_FEATURE_NAMES.len());
        assert_eq!(pool, vec![0.0, 1.0, 30.0, 8.0, 16.0, 8.0, 128.0, 4.0, 2.0, 12.0]);
    }

    proptest! {
        #[test]
        fn jobs_times_depth_is_product(jobs in 1u32..=64, depth in 1u32..=32) {
            let mut spec = cache_spec();
            spec.n_jobs = jobs;
            spec.queue_depth = depth;
            let f = encode_features(&spec, DatasetKind::CacheRandom);
            prop_assert_eq!(f[6], f[4] * f[5]);
            prop_assert_eq!(f[6], f64::from(jobs) * f64::from(depth));
        }
    }
}
