//! Dataset ingest: the on-disk CSV schema, grouping, validation, train/test
//! splitting and per-group summary statistics.
//!
//! A dataset file is UTF-8 CSV with an exact header
//! `load_id,load_type,io_type,read_fraction,block_size_kb,n_jobs,queue_depth,raid_k,raid_m,n_disks,second,iops,latency`,
//! optionally preceded by comment lines starting with `#`. The comment
//! `# latency_unit=<s|ms|us|ns>` declares the unit of the latency column;
//! Little's-law validation refuses to run without it. Rows are grouped by
//! `(load_id, io_type)` preserving file order, and every group must agree on
//! its workload parameters.

use crate::domain::{
    validate_spec, DatasetKind, IoType, LoadGroup, LoadType, PerfPoint, RaidConfig, SpecViolation,
    WorkloadSpec,
};
use crate::sobol::{PlannedLoad, WorkloadPlan};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

pub const CSV_HEADER: &str = "load_id,load_type,io_type,read_fraction,block_size_kb,n_jobs,queue_depth,raid_k,raid_m,n_disks,second,iops,latency";

/// Unit of the latency column, declared via the `# latency_unit=` comment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyUnit {
    Seconds,
    Milliseconds,
    Microseconds,
    Nanoseconds,
}

impl LatencyUnit {
    /// Multiplier converting a latency value in this unit to seconds.
    pub fn to_seconds(self) -> f64 {
        match self {
            LatencyUnit::Seconds => 1.0,
            LatencyUnit::Milliseconds => 1e-3,
            LatencyUnit::Microseconds => 1e-6,
            LatencyUnit::Nanoseconds => 1e-9,
        }
    }
}

impl fmt::Display for LatencyUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LatencyUnit::Seconds => "s",
            LatencyUnit::Milliseconds => "ms",
            LatencyUnit::Microseconds => "us",
            LatencyUnit::Nanoseconds => "ns",
        })
    }
}

impl FromStr for LatencyUnit {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "s" => Ok(LatencyUnit::Seconds),
            "ms" => Ok(LatencyUnit::Milliseconds),
            "us" => Ok(LatencyUnit::Microseconds),
            "ns" => Ok(LatencyUnit::Nanoseconds),
            other => Err(format!("unknown latency unit {other:?} (expected s|ms|us|ns)")),
        }
    }
}

/// A parsed dataset: validated groups in file order plus file-level metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub latency_unit: Option<LatencyUnit>,
    pub groups: Vec<LoadGroup>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.groups.iter().map(LoadGroup::k).sum()
    }

    /// Distinct load_ids in first-appearance order.
    pub fn load_ids(&self) -> Vec<&str> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for g in &self.groups {
            if seen.insert(g.load_id.as_str(), ()).is_none() {
                out.push(g.load_id.as_str());
            }
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("load {load_id} ({io_type}): {}", format_violations(.violations))]
    Validation {
        load_id: String,
        io_type: IoType,
        violations: Vec<SpecViolation>,
    },
    #[error("load {load_id} ({io_type}) has {k} measurement(s); at least 2 required")]
    DegenerateGroup {
        load_id: String,
        io_type: IoType,
        k: usize,
    },
    #[error("dataset has {available} distinct loads, cannot hold out {requested}")]
    TooFewLoads { available: usize, requested: usize },
}

fn format_violations(violations: &[SpecViolation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

pub fn parse_dataset(path: &Path, kind: DatasetKind) -> Result<Dataset, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset_str(&text, kind)
}

pub fn parse_dataset_str(text: &str, kind: DatasetKind) -> Result<Dataset, IngestError> {
    let (latency_unit, body, comment_lines) = strip_leading_comments(text)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(body.as_bytes());

    check_header(reader.headers().map_err(csv_reader_error)?)?;

    let mut groups: Vec<LoadGroup> = Vec::new();
    let mut index: HashMap<(String, IoType), usize> = HashMap::new();

    for record in reader.records() {
        let record = record.map_err(csv_reader_error)?;
        let line = comment_lines
            + record
                .position()
                .map(|p| p.line())
                .unwrap_or_default();
        let row = parse_row(&record, line)?;

        let key = (row.load_id.clone(), row.spec.io_type);
        match index.get(&key) {
            Some(&i) => {
                if groups[i].spec != row.spec {
                    return Err(IngestError::Parse {
                        line,
                        reason: format!(
                            "workload parameters differ from earlier rows of load {} ({})",
                            row.load_id, row.spec.io_type
                        ),
                    });
                }
                groups[i].points.push(row.point);
            }
            None => {
                index.insert(key, groups.len());
                groups.push(LoadGroup {
                    load_id: row.load_id,
                    spec: row.spec,
                    points: vec![row.point],
                });
            }
        }
    }

    for g in &groups {
        if let Err(violations) = validate_spec(&g.spec, kind) {
            return Err(IngestError::Validation {
                load_id: g.load_id.clone(),
                io_type: g.spec.io_type,
                violations,
            });
        }
        if g.k() < 2 {
            return Err(IngestError::DegenerateGroup {
                load_id: g.load_id.clone(),
                io_type: g.spec.io_type,
                k: g.k(),
            });
        }
    }

    Ok(Dataset { kind, latency_unit, groups })
}

/// Splits off leading `#` comment lines, returning the recognized latency
/// unit, the remaining CSV body and the number of lines consumed.
fn strip_leading_comments(text: &str) -> Result<(Option<LatencyUnit>, &str, u64), IngestError> {
    let mut latency_unit = None;
    let mut rest = text;
    let mut consumed = 0u64;
    while rest.starts_with('#') {
        let (line, tail) = match rest.split_once('\n') {
            Some((l, t)) => (l, t),
            None => (rest, ""),
        };
        let comment = line.trim_start_matches('#').trim();
        if let Some((key, value)) = comment.split_once('=') {
            if key.trim() == "latency_unit" {
                let unit = value.trim().parse::<LatencyUnit>().map_err(|reason| {
                    IngestError::Parse { line: consumed + 1, reason }
                })?;
                latency_unit = Some(unit);
            }
        }
        rest = tail;
        consumed += 1;
    }
    Ok((latency_unit, rest, consumed))
}

fn check_header(headers: &csv::StringRecord) -> Result<(), IngestError> {
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(IngestError::Schema(format!(
            "header mismatch: expected {expected:?}, got {got:?}"
        )));
    }
    Ok(())
}

fn csv_reader_error(e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line()).unwrap_or_default();
    IngestError::Parse { line, reason: e.to_string() }
}

struct Row {
    load_id: String,
    spec: WorkloadSpec,
    point: PerfPoint,
}

fn parse_row(record: &csv::StringRecord, line: u64) -> Result<Row, IngestError> {
    let field = |i: usize| record.get(i).unwrap_or("");
    let err = |reason: String| IngestError::Parse { line, reason };

    let load_id = field(0).to_string();
    if load_id.is_empty() {
        return Err(err("empty load_id".into()));
    }
    let load_type: LoadType = field(1).parse().map_err(err)?;
    let io_type: IoType = field(2).parse().map_err(err)?;
    let read_fraction = parse_f64(field(3), "read_fraction", line)?;
    let block_size_kb = parse_u32(field(4), "block_size_kb", line)?;
    let n_jobs = parse_u32(field(5), "n_jobs", line)?;
    let queue_depth = parse_u32(field(6), "queue_depth", line)?;

    let raid = match (field(7).is_empty(), field(8).is_empty(), field(9).is_empty()) {
        (true, true, true) => None,
        (false, false, false) => Some(RaidConfig {
            k: parse_u32(field(7), "raid_k", line)?,
            m: parse_u32(field(8), "raid_m", line)?,
            n_disks: parse_u32(field(9), "n_disks", line)?,
        }),
        _ => {
            return Err(err("raid_k, raid_m and n_disks must be all present or all empty".into()))
        }
    };

    let second = parse_u32(field(10), "second", line)?;
    if second < 1 {
        return Err(err("second must be >= 1".into()));
    }
    let iops = parse_f64(field(11), "iops", line)?;
    let latency = parse_f64(field(12), "latency", line)?;
    if !(iops > 0.0) {
        return Err(err(format!("iops must be positive, got {iops}")));
    }
    if !(latency > 0.0) {
        return Err(err(format!("latency must be positive, got {latency}")));
    }

    Ok(Row {
        load_id,
        spec: WorkloadSpec {
            load_type,
            io_type,
            read_fraction,
            block_size_kb,
            n_jobs,
            queue_depth,
            raid,
        },
        point: PerfPoint { iops, latency },
    })
}

fn parse_f64(s: &str, name: &str, line: u64) -> Result<f64, IngestError> {
    let v: f64 = s
        .parse()
        .map_err(|_| IngestError::Parse { line, reason: format!("{name}: invalid number {s:?}") })?;
    if !v.is_finite() {
        return Err(IngestError::Parse { line, reason: format!("{name}: non-finite value {s:?}") });
    }
    Ok(v)
}

fn parse_u32(s: &str, name: &str, line: u64) -> Result<u32, IngestError> {
    s.parse()
        .map_err(|_| IngestError::Parse { line, reason: format!("{name}: invalid integer {s:?}") })
}

/// Serializes a dataset back to the ingest schema. The `second` column is
/// regenerated as 1..=k per group; parse -> write -> parse is the identity on
/// groups and latency unit.
pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<(), IngestError> {
    let text = dataset_to_csv(ds);
    std::fs::write(path, text).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn dataset_to_csv(ds: &Dataset) -> String {
    let mut out = String::new();
    if let Some(unit) = ds.latency_unit {
        let _ = writeln!(out, "# latency_unit={unit}");
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for g in &ds.groups {
        for (i, p) in g.points.iter().enumerate() {
            write_spec_fields(&mut out, &g.load_id, &g.spec);
            let _ = writeln!(out, ",{},{},{}", i + 1, p.iops, p.latency);
        }
    }
    out
}

fn write_spec_fields(out: &mut String, load_id: &str, spec: &WorkloadSpec) {
    let _ = write!(
        out,
        "{},{},{},{},{},{},{}",
        load_id,
        spec.load_type,
        spec.io_type,
        spec.read_fraction,
        spec.block_size_kb,
        spec.n_jobs,
        spec.queue_depth
    );
    match spec.raid {
        Some(r) => {
            let _ = write!(out, ",{},{},{}", r.k, r.m, r.n_disks);
        }
        None => out.push_str(",,,"),
    }
}

/// Writes a workload plan as an ingest-schema CSV with empty measurement
/// columns (one row per planned stream).
pub fn write_plan(plan: &WorkloadPlan, path: &Path) -> Result<(), IngestError> {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for pl in &plan.loads {
        write_spec_fields(&mut out, &pl.load_id, &pl.spec);
        out.push_str(",,,\n");
    }
    std::fs::write(path, out).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a plan written by [`write_plan`] (measurement columns must be empty).
pub fn read_plan(path: &Path, kind: DatasetKind) -> Result<WorkloadPlan, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let (_, body, comment_lines) = strip_leading_comments(&text)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    check_header(reader.headers().map_err(csv_reader_error)?)?;

    let mut loads = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_reader_error)?;
        let line = comment_lines + record.position().map(|p| p.line()).unwrap_or_default();
        for (i, name) in [(10, "second"), (11, "iops"), (12, "latency")] {
            if !record.get(i).unwrap_or("").is_empty() {
                return Err(IngestError::Parse {
                    line,
                    reason: format!("plan rows must leave {name} empty"),
                });
            }
        }
        // Reuse the row parser with placeholder measurements.
        let mut patched = csv::StringRecord::new();
        for f in record.iter().take(10) {
            patched.push_field(f);
        }
        patched.push_field("1");
        patched.push_field("1");
        patched.push_field("1");
        let row = parse_row(&patched, line)?;
        if let Err(violations) = validate_spec(&row.spec, kind) {
            return Err(IngestError::Validation {
                load_id: row.load_id,
                io_type: row.spec.io_type,
                violations,
            });
        }
        loads.push(PlannedLoad { load_id: row.load_id, spec: row.spec });
    }
    Ok(WorkloadPlan { kind, loads })
}

/// Deterministic train/test split by whole load configuration: every group of
/// a held-out `load_id` (both io types) lands in the test set.
///
/// The distinct load_id list (first-appearance order) is shuffled with a
/// Fisher-Yates pass driven by ChaCha8 seeded from `seed`, and the first
/// `n_test_loads` ids become the test set. Group order within each side
/// follows the input dataset.
pub fn split_train_test(
    ds: &Dataset,
    n_test_loads: usize,
    seed: u64,
) -> Result<(Dataset, Dataset), IngestError> {
    let ids: Vec<&str> = ds.load_ids();
    if n_test_loads > ids.len() {
        return Err(IngestError::TooFewLoads { available: ids.len(), requested: n_test_loads });
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let test_ids: std::collections::HashSet<&str> =
        order[..n_test_loads].iter().map(|&i| ids[i]).collect();

    let mut train = Dataset { kind: ds.kind, latency_unit: ds.latency_unit, groups: Vec::new() };
    let mut test = Dataset { kind: ds.kind, latency_unit: ds.latency_unit, groups: Vec::new() };
    for g in &ds.groups {
        if test_ids.contains(g.load_id.as_str()) {
            test.groups.push(g.clone());
        } else {
            train.groups.push(g.clone());
        }
    }
    Ok((train, test))
}

/// Per-dimension mean and Bessel (k-1) standard deviation of a group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    pub mean_iops: f64,
    pub mean_latency: f64,
    pub std_iops: f64,
    pub std_latency: f64,
}

pub fn group_stats(group: &LoadGroup) -> Result<GroupStats, IngestError> {
    let k = group.k();
    if k < 2 {
        return Err(IngestError::DegenerateGroup {
            load_id: group.load_id.clone(),
            io_type: group.spec.io_type,
            k,
        });
    }
    let n = k as f64;
    let (mut mi, mut ml) = (0.0, 0.0);
    for p in &group.points {
        mi += p.iops;
        ml += p.latency;
    }
    mi /= n;
    ml /= n;
    let (mut vi, mut vl) = (0.0, 0.0);
    for p in &group.points {
        vi += (p.iops - mi).powi(2);
        vl += (p.latency - ml).powi(2);
    }
    Ok(GroupStats {
        mean_iops: mi,
        mean_latency: ml,
        std_iops: (vi / (n - 1.0)).sqrt(),
        std_latency: (vl / (n - 1.0)).sqrt(),
    })
}
