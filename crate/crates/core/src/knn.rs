//! Nearest-neighbour baseline: memorizes the training groups and answers a
//! query with the measurement set of the closest group, verbatim.
//!
//! Distance is Euclidean over z-scored feature vectors (the scaler is fitted
//! on the distinct training feature vectors). Groups with identical feature
//! vectors collapse into one entry whose point sets are concatenated, so the
//! returned sample is everything ever measured at that configuration.

use crate::domain::{encode_features, feature_dim, DatasetKind, LoadGroup, PerfPoint};
use crate::metrics::Scaler;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum KnnError {
    #[error("no training groups")]
    EmptyTrainingSet,
    #[error("feature dimension mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate training features: {0}")]
    DegenerateFeatures(String),
    #[error("model deserialization failed: {0}")]
    Serde(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnEntry {
    pub features: Vec<f64>,
    pub points: Vec<PerfPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub format_version: u32,
    pub kind: DatasetKind,
    pub feature_scaler: Scaler,
    pub entries: Vec<KnnEntry>,
}

impl KnnModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, KnnError> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn fit_knn(groups: &[LoadGroup], kind: DatasetKind) -> Result<KnnModel, KnnError> {
    if groups.is_empty() {
        return Err(KnnError::EmptyTrainingSet);
    }
    let mut entries: Vec<KnnEntry> = Vec::new();
    for g in groups {
        let f = encode_features(&g.spec, kind);
        match entries.iter_mut().find(|e| e.features == f) {
            Some(e) => e.points.extend(g.points.iter().copied()),
            None => entries.push(KnnEntry { features: f, points: g.points.clone() }),
        }
    }
    let distinct: Vec<Vec<f64>> = entries.iter().map(|e| e.features.clone()).collect();
    // a single-configuration model has no spread to normalize by
    let feature_scaler = if distinct.len() == 1 {
        Scaler { mean: distinct[0].clone(), std: vec![1.0; distinct[0].len()] }
    } else {
        Scaler::fit(&distinct).map_err(|e| KnnError::DegenerateFeatures(e.to_string()))?
    };
    Ok(KnnModel { format_version: 1, kind, feature_scaler, entries })
}

/// Returns the entry nearest to `features` (squared Euclidean distance over
/// z-scored vectors); exact ties keep the earliest training entry.
pub fn predict_knn<'a>(model: &'a KnnModel, features: &[f64]) -> Result<&'a KnnEntry, KnnError> {
    let expected = feature_dim(model.kind);
    if features.len() != expected {
        return Err(KnnError::DimensionMismatch { expected, got: features.len() });
    }
    let q = model.feature_scaler.transform(features);
    let mut best: Option<(f64, &KnnEntry)> = None;
    for e in &model.entries {
        let v = model.feature_scaler.transform(&e.features);
        let d: f64 = q.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
        match best {
            Some((bd, _)) if d >= bd => {}
            _ => best = Some((d, e)),
        }
    }
    best.map(|(_, e)| e).ok_or(KnnError::EmptyTrainingSet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{IoType, LoadType, WorkloadSpec};

    fn spec(jobs: u32, depth: u32, block: u32, io: IoType) -> WorkloadSpec {
        WorkloadSpec {
            load_type: LoadType::Random,
            io_type: io,
            read_fraction: 50.0,
            block_size_kb: block,
            n_jobs: jobs,
            queue_depth: depth,
            raid: None,
        }
    }

    fn group(id: &str, s: WorkloadSpec, base: f64) -> LoadGroup {
        let points =
            (0..3).map(|i| PerfPoint { iops: base + i as f64, latency: 0.1 }).collect();
        LoadGroup { load_id: id.into(), spec: s, points }
    }

    #[test]
    fn exact_match_returns_training_points_verbatim() {
        let groups = vec![
            group("a", spec(1, 1, 4, IoType::Read), 100.0),
            group("b", spec(8, 4, 64, IoType::Read), 500.0),
            group("c", spec(32, 16, 256, IoType::Read), 900.0),
        ];
        let model = fit_knn(&groups, DatasetKind::CacheRandom).unwrap();
        let f = encode_features(&groups[1].spec, DatasetKind::CacheRandom);
        let e = predict_knn(&model, &f).unwrap();
        assert_eq!(e.points, groups[1].points);
    }

    #[test]
    fn duplicate_feature_vectors_collapse_and_concatenate() {
        // same spec, different io_type keeps them distinct; identical spec merges
        let groups = vec![
            group("a", spec(2, 2, 8, IoType::Read), 10.0),
            group("b", spec(2, 2, 8, IoType::Read), 20.0),
            group("c", spec(2, 2, 8, IoType::Write), 30.0),
        ];
        let model = fit_knn(&groups, DatasetKind::CacheRandom).unwrap();
        assert_eq!(model.entries.len(), 2);
        assert_eq!(model.entries[0].points.len(), 6);
        let f = encode_features(&groups[0].spec, DatasetKind::CacheRandom);
        let e = predict_knn(&model, &f).unwrap();
        assert_eq!(e.points.len(), 6);
        assert_eq!(e.points[3].iops, 20.0);
    }

    #[test]
    fn distance_uses_scaled_features() {
        // Raw Euclidean distance would let block size (spread 4..256) drown
        // out the jobs axis (spread 1..2): a query at (jobs=2, block=20) is
        // raw-closer to (1, 4) but z-scored-closer to (2, 256).
        let groups = vec![
            group("a", spec(1, 1, 4, IoType::Read), 1.0),
            group("b", spec(2, 1, 256, IoType::Read), 2.0),
        ];
        let model = fit_knn(&groups, DatasetKind::CacheRandom).unwrap();
        let q = spec(2, 1, 20, IoType::Read);
        let f = encode_features(&q, DatasetKind::CacheRandom);
        let e = predict_knn(&model, &f).unwrap();
        assert_eq!(e.points[0].iops, 2.0);
    }

    #[test]
    fn ties_keep_earliest_entry() {
        let groups = vec![
            group("a", spec(1, 1, 4, IoType::Read), 1.0),
            group("b", spec(3, 1, 4, IoType::Read), 2.0),
        ];
        let model = fit_knn(&groups, DatasetKind::CacheRandom).unwrap();
        let q = spec(2, 1, 4, IoType::Read); // equidistant in every metric
        let f = encode_features(&q, DatasetKind::CacheRandom);
        let e = predict_knn(&model, &f).unwrap();
        assert_eq!(e.points[0].iops, 1.0);
    }

    #[test]
    fn empty_training_set_is_an_error() {
        assert!(matches!(
            fit_knn(&[], DatasetKind::CacheRandom),
            Err(KnnError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let groups = vec![group("a", spec(1, 1, 4, IoType::Read), 1.0)];
        let model = fit_knn(&groups, DatasetKind::CacheRandom).unwrap();
        assert!(matches!(
            predict_knn(&model, &[1.0, 2.0]),
            Err(KnnError::DimensionMismatch { expected: 7, got: 2 })
        ));
    }

    #[test]
    fn serialization_round_trips() {
        let groups = vec![
            group("a", spec(1, 1, 4, IoType::Read), 1.0),
            group("b", spec(3, 2, 16, IoType::Write), 2.0),
        ];
        let model = fit_knn(&groups, DatasetKind::CacheRandom).unwrap();
        let back = KnnModel::from_json(&model.to_json()).unwrap();
        assert_eq!(model, back);
    }
}
