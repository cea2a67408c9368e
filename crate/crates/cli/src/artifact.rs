//! Serialized model artifacts.
//!
//! An artifact records which split produced its training data, so `evaluate`
//! can refuse artifacts trained against a different split than the one it is
//! about to score (the test loads would otherwise leak into training).

use std::path::Path;

use perftwin_core::domain::DatasetKind;
use perftwin_core::ingest::LatencyUnit;
use serde::{Deserialize, Serialize};

use crate::pipeline::{ModelChoice, TrainedModel, TrainedPayload};
use crate::CliError;

pub const ARTIFACT_FORMAT: &str = "perftwin-model";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub version: u32,
    pub model: String,
    pub kind: DatasetKind,
    pub split_seed: u64,
    pub split_test_loads: usize,
    pub n_train_loads: usize,
    /// Latency unit of the training data; sampled outputs inherit it.
    pub latency_unit: Option<LatencyUnit>,
    pub payload: serde_json::Value,
}

impl ModelArtifact {
    pub fn new(
        trained: &TrainedModel,
        kind: DatasetKind,
        split_seed: u64,
        split_test_loads: usize,
        n_train_loads: usize,
        latency_unit: Option<LatencyUnit>,
    ) -> Result<ModelArtifact, CliError> {
        let payload = match &trained.payload {
            TrainedPayload::Knn(m) => serde_json::to_value(m),
            TrainedPayload::Gaussian(m, _) => serde_json::to_value(m),
            TrainedPayload::Flow(m) => serde_json::to_value(m),
        }
        .map_err(|e| CliError::Data(format!("cannot encode model payload: {e}")))?;
        Ok(ModelArtifact {
            format: ARTIFACT_FORMAT.to_string(),
            version: ARTIFACT_VERSION,
            model: trained.choice.as_str().to_string(),
            kind,
            split_seed,
            split_test_loads,
            n_train_loads,
            latency_unit,
            payload,
        })
    }

    /// Decodes the payload back into a usable model.
    pub fn decode(&self) -> Result<TrainedModel, CliError> {
        let choice: ModelChoice = self.model.parse()?;
        let bad = |e: serde_json::Error| {
            CliError::Data(format!("artifact payload for `{}` is invalid: {e}", self.model))
        };
        let payload = match choice {
            ModelChoice::Knn => {
                TrainedPayload::Knn(serde_json::from_value(self.payload.clone()).map_err(bad)?)
            }
            ModelChoice::Gaussian => TrainedPayload::Gaussian(
                serde_json::from_value(self.payload.clone()).map_err(bad)?,
                Vec::new(),
            ),
            ModelChoice::Flow => {
                TrainedPayload::Flow(serde_json::from_value(self.payload.clone()).map_err(bad)?)
            }
        };
        Ok(TrainedModel { choice, payload })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Data(format!("cannot encode artifact: {e}")))?;
        crate::write_atomic(path, &text)
    }

    pub fn load(path: &Path) -> Result<ModelArtifact, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read artifact {}: {e}", path.display())))?;
        let artifact: ModelArtifact = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("artifact {}: {e}", path.display())))?;
        if artifact.format != ARTIFACT_FORMAT {
            return Err(CliError::Data(format!(
                "artifact {}: format `{}` is not `{ARTIFACT_FORMAT}`",
                path.display(),
                artifact.format
            )));
        }
        if artifact.version != ARTIFACT_VERSION {
            return Err(CliError::Data(format!(
                "artifact {}: version {} unsupported (expected {ARTIFACT_VERSION})",
                path.display(),
                artifact.version
            )));
        }
        Ok(artifact)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use perftwin_core::domain::{IoType, LoadGroup, LoadType, PerfPoint, WorkloadSpec};
    use perftwin_core::knn::{fit_knn, predict_knn};

    fn tiny_groups() -> Vec<LoadGroup> {
        let spec = |jobs: u32, io| WorkloadSpec {
            load_type: LoadType::Random,
            io_type: io,
            read_fraction: 50.0,
            block_size_kb: 16,
            n_jobs: jobs,
            queue_depth: 4,
            raid: None,
        };
        (1..=3)
            .map(|j| LoadGroup {
                load_id: format!("load-{j:05}"),
                spec: spec(j, IoType::Read),
                points: vec![
                    PerfPoint { iops: 1000.0 * j as f64, latency: 0.001 },
                    PerfPoint { iops: 1100.0 * j as f64, latency: 0.0012 },
                ],
            })
            .collect()
    }

    #[test]
    fn knn_artifact_round_trips_and_predicts_identically() {
        let kind = DatasetKind::CacheRandom;
        let groups = tiny_groups();
        let model = fit_knn(&groups, kind).unwrap();
        let trained =
            TrainedModel { choice: ModelChoice::Knn, payload: TrainedPayload::Knn(model.clone()) };
        let artifact =
            ModelArtifact::new(&trained, kind, 7, 1, 2, Some(LatencyUnit::Seconds)).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("knn.json");
        artifact.save(&path).unwrap();
        let loaded = ModelArtifact::load(&path).unwrap();
        assert_eq!(loaded, artifact);

        let features = perftwin_core::domain::encode_features(&groups[1].spec, kind);
        let reloaded = match loaded.decode().unwrap().payload {
            TrainedPayload::Knn(m) => m,
            _ => unreachable!(),
        };
        assert_eq!(
            predict_knn(&reloaded, &features).unwrap().points,
            predict_knn(&model, &features).unwrap().points
        );
    }

    #[test]
    fn foreign_format_and_version_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        let mut value = serde_json::json!({
            "format": "other",
            "version": 1,
            "model": "knn",
            "kind": "cache_random",
            "split_seed": 7,
            "split_test_loads": 1,
            "n_train_loads": 2,
            "latency_unit": null,
            "payload": {},
        });
        std::fs::write(&path, value.to_string()).unwrap();
        assert!(matches!(ModelArtifact::load(&path), Err(CliError::Data(_))));

        value["format"] = "perftwin-model".into();
        value["version"] = 99.into();
        std::fs::write(&path, value.to_string()).unwrap();
        assert!(matches!(ModelArtifact::load(&path), Err(CliError::Data(_))));
    }
}
