//! Library half of the `perftwin` binary: configuration, model artifacts,
//! the train/evaluate pipeline, report formatting, and SVG plotting.
//!
//! Everything the binary does goes through this crate so that integration
//! tests can drive the exact production code paths in-process.

use std::io;
use std::path::Path;

pub mod artifact;
pub mod commands;
pub mod config;
pub mod pipeline;
pub mod plots;
pub mod report;

/// Command failure with the process exit code it maps to: configuration and
/// request problems exit 1, unreadable or inconsistent data exits 2, and
/// numeric failures inside model fitting or metric computation exit 3.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<perftwin_core::ingest::IngestError> for CliError {
    fn from(e: perftwin_core::ingest::IngestError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<perftwin_core::sobol::SobolError> for CliError {
    fn from(e: perftwin_core::sobol::SobolError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<perftwin_core::oracle::OracleError> for CliError {
    fn from(e: perftwin_core::oracle::OracleError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<perftwin_core::boosting::BoostError> for CliError {
    fn from(e: perftwin_core::boosting::BoostError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<perftwin_core::gaussian::GaussianError> for CliError {
    fn from(e: perftwin_core::gaussian::GaussianError) -> Self {
        use perftwin_core::gaussian::GaussianError as E;
        match e {
            E::SingularPrecision => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<perftwin_core::flow::FlowError> for CliError {
    fn from(e: perftwin_core::flow::FlowError) -> Self {
        use perftwin_core::flow::FlowError as E;
        match e {
            E::NumericFailure { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<perftwin_core::knn::KnnError> for CliError {
    fn from(e: perftwin_core::knn::KnnError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<perftwin_core::metrics::MetricError> for CliError {
    fn from(e: perftwin_core::metrics::MetricError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<perftwin_core::littlelaw::LittleError> for CliError {
    fn from(e: perftwin_core::littlelaw::LittleError) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Writes `contents` via a sibling `.tmp` file and an atomic rename, creating
/// parent directories as needed, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let describe = |what: &str, e: io::Error| {
        CliError::Data(format!("cannot {what} {}: {e}", path.display()))
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| describe("create directory for", e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| describe("write", e))?;
    std::fs::rename(&tmp, path).map_err(|e| describe("finalize", e))
}
