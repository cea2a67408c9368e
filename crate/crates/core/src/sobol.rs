//! Low-discrepancy workload planning: a Sobol sequence generator and the
//! mapping from unit-cube points onto the legal parameter ranges of each
//! dataset kind.
//!
//! Direction numbers are the first 16 dimensions of the Joe & Kuo
//! "new-joe-kuo-6.21201" table (https://web.maths.unsw.edu.au/~fkuo/sobol/).
//! Points are produced in Gray-code order; index 0 of the underlying sequence
//! is the all-zero point, and the default `skip = 1` drops it.

use crate::domain::{
    DatasetKind, IoType, LoadType, RaidConfig, ReadFractionRange, WorkloadSpec,
};
use serde::{Deserialize, Serialize};

pub const MAX_DIMENSIONS: usize = 16;
const BITS: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum SobolError {
    #[error("sobol dimension {dim} unsupported (1..={max})")]
    DimensionUnsupported { dim: usize, max: usize },
    #[error("requested {requested} points (skip included); limit is 2^32 - 1")]
    TooManyPoints { requested: u64 },
}

/// Primitive polynomial (encoded as in Joe & Kuo: interior coefficient bits)
/// and initial direction numbers for one dimension beyond the first.
struct DirectionRow {
    a: u32,
    m: &'static [u32],
}

/// Rows for dimensions 2..=16 of the published table; dimension 1 is the
/// van der Corput sequence and needs no row.
const JOE_KUO: [DirectionRow; 15] = [
    DirectionRow { a: 0, m: &[1] },
    DirectionRow { a: 1, m: &[1, 3] },
    DirectionRow { a: 1, m: &[1, 3, 1] },
    DirectionRow { a: 2, m: &[1, 1, 1] },
    DirectionRow { a: 1, m: &[1, 1, 3, 3] },
    DirectionRow { a: 4, m: &[1, 3, 5, 13] },
    DirectionRow { a: 2, m: &[1, 1, 5, 5, 17] },
    DirectionRow { a: 4, m: &[1, 1, 5, 5, 5] },
    DirectionRow { a: 7, m: &[1, 1, 7, 11, 19] },
    DirectionRow { a: 11, m: &[1, 1, 5, 1, 1] },
    DirectionRow { a: 13, m: &[1, 1, 1, 3, 11] },
    DirectionRow { a: 14, m: &[1, 3, 5, 5, 31] },
    DirectionRow { a: 1, m: &[1, 3, 3, 9, 7, 49] },
    DirectionRow { a: 13, m: &[1, 1, 1, 15, 21, 21] },
    DirectionRow { a: 16, m: &[1, 3, 1, 13, 27, 49] },
];

/// Direction vectors v_1..v_32 for one dimension, scaled so bit 31 is the
/// leading binary digit.
fn direction_vectors(dim_index: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim_index == 0 {
        for (j, slot) in v.iter_mut().enumerate() {
            *slot = 1 << (31 - j);
        }
        return v;
    }
    let row = &JOE_KUO[dim_index - 1];
    let s = row.m.len();
    for (j, &m) in row.m.iter().enumerate() {
        v[j] = m << (31 - j);
    }
    for j in s..BITS {
        let prev = v[j - s];
        v[j] = prev ^ (prev >> s);
        for k in 0..s - 1 {
            if (row.a >> k) & 1 == 1 {
                v[j] ^= v[j - s + 1 + k];
            }
        }
    }
    v
}

/// Generates `n` points of dimension `dim` in [0,1)^dim after dropping the
/// first `skip` points of the sequence.
pub fn sobol_points(dim: usize, n: usize, skip: usize) -> Result<Vec<Vec<f64>>, SobolError> {
    if dim == 0 || dim > MAX_DIMENSIONS {
        return Err(SobolError::DimensionUnsupported { dim, max: MAX_DIMENSIONS });
    }
    let total = skip as u64 + n as u64;
    if total > u32::MAX as u64 {
        return Err(SobolError::TooManyPoints { requested: total });
    }

    let vectors: Vec<[u32; BITS]> = (0..dim).map(direction_vectors).collect();
    let mut state = vec![0u32; dim];
    let mut out = Vec::with_capacity(n);
    const SCALE: f64 = 1.0 / 4294967296.0; // 2^-32

    for index in 0..total {
        if index >= skip as u64 {
            out.push(state.iter().map(|&x| f64::from(x) * SCALE).collect());
        }
        // Advance to the next Gray-code point: flip the direction vector at
        // the index of the lowest set bit of (index + 1).
        let flip = (index + 1).trailing_zeros() as usize;
        if flip < BITS {
            for (x, v) in state.iter_mut().zip(&vectors) {
                *x ^= v[flip];
            }
        }
    }
    Ok(out)
}

/// One planned measurement stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedLoad {
    pub load_id: String,
    pub spec: WorkloadSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadPlan {
    pub kind: DatasetKind,
    pub loads: Vec<PlannedLoad>,
}

impl WorkloadPlan {
    /// Distinct planned load ids, in order.
    pub fn n_load_ids(&self) -> usize {
        let mut n = 0;
        let mut last: Option<&str> = None;
        for l in &self.loads {
            if last != Some(l.load_id.as_str()) {
                n += 1;
                last = Some(l.load_id.as_str());
            }
        }
        n
    }
}

/// Sampling axes of one dataset kind, in documented order. Pool kinds couple
/// the last two axes: a RAID scheme is chosen categorically first, then the
/// disk count comes from that scheme's five-value grid.
#[derive(Debug)]
pub struct ParameterSpace {
    pub kind: DatasetKind,
    axes: Vec<Axis>,
}

#[derive(Debug)]
enum Axis {
    /// Inclusive integer range, affine map + round half-up.
    Integer { lo: u32, hi: u32 },
    /// Fixed value set, floor(u * len) pick.
    CategoricalU32(Vec<u32>),
    CategoricalF64(Vec<f64>),
    RaidScheme(Vec<(u32, u32)>),
    /// Five-value grid derived from the scheme chosen by the previous axis.
    DiskCount,
}

impl ParameterSpace {
    pub fn for_kind(kind: DatasetKind) -> Self {
        let table = kind.range_table();
        let mut axes = vec![
            Axis::CategoricalU32(table.block_sizes_kb.to_vec()),
            match table.read_fraction {
                ReadFractionRange::Interval(lo, hi) => {
                    Axis::Integer { lo: lo as u32, hi: hi as u32 }
                }
                ReadFractionRange::Set(vals) => Axis::CategoricalF64(vals.to_vec()),
            },
            Axis::Integer { lo: table.n_jobs.0, hi: table.n_jobs.1 },
            Axis::Integer { lo: table.queue_depth.0, hi: table.queue_depth.1 },
        ];
        if let Some(schemes) = table.raid_schemes {
            axes.push(Axis::RaidScheme(schemes.to_vec()));
            axes.push(Axis::DiskCount);
        }
        ParameterSpace { kind, axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }
}

/// Disk-count grid for scheme (k, m): the minimum K+2M, the maximum 24, and
/// three evenly spaced interior values (round half-up).
pub fn disk_grid(k: u32, m: u32) -> [u32; 5] {
    let lo = f64::from(k + 2 * m);
    let hi = 24.0;
    let mut grid = [0u32; 5];
    for (i, slot) in grid.iter_mut().enumerate() {
        *slot = (lo + (hi - lo) * i as f64 / 4.0).round() as u32;
    }
    grid
}

fn map_integer(u: f64, lo: u32, hi: u32) -> u32 {
    let v = (f64::from(lo) + u * f64::from(hi - lo)).round() as i64;
    (v.clamp(i64::from(lo), i64::from(hi))) as u32
}

fn map_index(u: f64, len: usize) -> usize {
    ((u * len as f64) as usize).min(len - 1)
}

/// Plans `n_loads` workload configurations by mapping a Sobol point onto the
/// space's axes. Random kinds yield two streams per load (read and write);
/// sequential kinds yield one, its direction fixed by the read fraction.
pub fn plan_workloads(
    space: &ParameterSpace,
    n_loads: usize,
    skip: usize,
) -> Result<WorkloadPlan, SobolError> {
    let points = sobol_points(space.dim(), n_loads, skip)?;
    let load_type = space.kind.load_type();
    let mut loads = Vec::new();

    for (i, point) in points.iter().enumerate() {
        let load_id = format!("load-{:05}", i + 1);
        let mut block_size_kb = 0u32;
        let mut read_fraction = 0.0f64;
        let mut n_jobs = 0u32;
        let mut queue_depth = 0u32;
        let mut scheme: Option<(u32, u32)> = None;
        let mut raid: Option<RaidConfig> = None;

        for (axis_idx, (axis, &u)) in space.axes.iter().zip(point).enumerate() {
            match axis {
                Axis::CategoricalU32(values) => {
                    let v = values[map_index(u, values.len())];
                    debug_assert_eq!(axis_idx, 0);
                    block_size_kb = v;
                }
                Axis::CategoricalF64(values) => read_fraction = values[map_index(u, values.len())],
                Axis::Integer { lo, hi } => {
                    let v = map_integer(u, *lo, *hi);
                    match axis_idx {
                        1 => read_fraction = f64::from(v),
                        2 => n_jobs = v,
                        3 => queue_depth = v,
                        _ => unreachable!("integer axis at unexpected position"),
                    }
                }
                Axis::RaidScheme(schemes) => scheme = Some(schemes[map_index(u, schemes.len())]),
                Axis::DiskCount => {
                    let (k, m) = scheme.expect("disk-count axis preceded by scheme axis");
                    let grid = disk_grid(k, m);
                    raid = Some(RaidConfig { k, m, n_disks: grid[map_index(u, grid.len())] });
                }
            }
        }

        let base = WorkloadSpec {
            load_type,
            io_type: IoType::Read,
            read_fraction,
            block_size_kb,
            n_jobs,
            queue_depth,
            raid,
        };
        match load_type {
            LoadType::Random => {
                loads.push(PlannedLoad { load_id: load_id.clone(), spec: base.clone() });
                loads.push(PlannedLoad {
                    load_id,
                    spec: WorkloadSpec { io_type: IoType::Write, ..base },
                });
            }
            LoadType::Sequential => {
                let io_type = if read_fraction == 100.0 { IoType::Read } else { IoType::Write };
                loads.push(PlannedLoad { load_id, spec: WorkloadSpec { io_type, ..base } });
            }
        }
    }
    Ok(WorkloadPlan { kind: space.kind, loads })
}
