//! Flat key=value run configuration shared by `train`, `evaluate`, and
//! `learning-curve`.
//!
//! A config file is line-oriented: blank lines and `#` comments are ignored,
//! every other line must be `key = value`. Command-line `--set key=value`
//! flags override file values, and every run writes the fully resolved
//! configuration next to its outputs so any table or figure can be rebuilt
//! from the emitted directory alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use perftwin_core::boosting::BoostParams;
use perftwin_core::domain::DatasetKind;
use perftwin_core::flow::FlowTrainConfig;
use perftwin_core::oracle::OracleConfig;

use crate::CliError;

/// Hyperparameter grid scanned when `gaussian.grid` is on.
pub const GRID_DEPTHS: [usize; 4] = [2, 4, 6, 8];
pub const GRID_RATES: [f64; 3] = [0.01, 0.05, 0.1];

/// Everything a pipeline run needs, with one field per config key.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Measurement CSV to load; when absent the oracle synthesizes data.
    pub data_path: Option<PathBuf>,
    pub kind: DatasetKind,
    pub oracle_loads: usize,
    pub oracle_skip: usize,
    pub oracle_k: usize,
    pub oracle_seed: u64,
    pub oracle_noise: f64,
    pub split_seed: u64,
    pub split_test_loads: usize,
    pub gaussian_iterations: usize,
    pub gaussian_depth: usize,
    pub gaussian_rate: f64,
    /// Grid-search depth and rate instead of taking them from the config.
    pub gaussian_grid: bool,
    pub gaussian_val_fraction: f64,
    pub flow_layers: usize,
    pub flow_epochs: usize,
    pub flow_batch: usize,
    pub flow_rate: f64,
    pub flow_seed: u64,
    /// Predictions sampled per test stream during evaluation.
    pub eval_samples: usize,
    pub eval_seed: u64,
    pub eval_bootstrap: usize,
    pub eval_rel_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data_path: None,
            kind: DatasetKind::CacheRandom,
            oracle_loads: 256,
            oracle_skip: 1,
            oracle_k: 120,
            oracle_seed: 42,
            oracle_noise: 0.2,
            split_seed: 7,
            split_test_loads: 100,
            gaussian_iterations: 5000,
            gaussian_depth: 6,
            gaussian_rate: 0.1,
            gaussian_grid: true,
            gaussian_val_fraction: 0.2,
            flow_layers: 16,
            flow_epochs: 80,
            flow_batch: 200,
            flow_rate: 0.01,
            flow_seed: 42,
            eval_samples: 200,
            eval_seed: 101,
            eval_bootstrap: 1000,
            eval_rel_tol: 0.3,
        }
    }
}

impl RunConfig {
    /// Reads an optional config file, then applies `--set` overrides in
    /// order. Unknown keys and unparsable values are usage errors.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (no, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = split_pair(line).ok_or_else(|| {
                    CliError::Usage(format!(
                        "{}:{}: expected `key = value`, got `{line}`",
                        path.display(),
                        no + 1
                    ))
                })?;
                pairs.push((k, v));
            }
        }
        for s in overrides {
            let (k, v) = split_pair(s)
                .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got `{s}`")))?;
            pairs.push((k, v));
        }

        let mut cfg = RunConfig::default();
        for (key, value) in &pairs {
            cfg.assign(key, value)?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn assign(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "data.path" => self.data_path = Some(PathBuf::from(value)),
            "data.kind" => self.kind = parse_as(key, value)?,
            "oracle.loads" => self.oracle_loads = parse_as(key, value)?,
            "oracle.skip" => self.oracle_skip = parse_as(key, value)?,
            "oracle.k" => self.oracle_k = parse_as(key, value)?,
            "oracle.seed" => self.oracle_seed = parse_as(key, value)?,
            "oracle.noise" => self.oracle_noise = parse_as(key, value)?,
            "split.seed" => self.split_seed = parse_as(key, value)?,
            "split.test_loads" => self.split_test_loads = parse_as(key, value)?,
            "gaussian.iterations" => self.gaussian_iterations = parse_as(key, value)?,
            "gaussian.depth" => self.gaussian_depth = parse_as(key, value)?,
            "gaussian.rate" => self.gaussian_rate = parse_as(key, value)?,
            "gaussian.grid" => self.gaussian_grid = parse_as(key, value)?,
            "gaussian.val_fraction" => self.gaussian_val_fraction = parse_as(key, value)?,
            "flow.layers" => self.flow_layers = parse_as(key, value)?,
            "flow.epochs" => self.flow_epochs = parse_as(key, value)?,
            "flow.batch" => self.flow_batch = parse_as(key, value)?,
            "flow.rate" => self.flow_rate = parse_as(key, value)?,
            "flow.seed" => self.flow_seed = parse_as(key, value)?,
            "eval.samples" => self.eval_samples = parse_as(key, value)?,
            "eval.seed" => self.eval_seed = parse_as(key, value)?,
            "eval.bootstrap" => self.eval_bootstrap = parse_as(key, value)?,
            "eval.rel_tol" => self.eval_rel_tol = parse_as(key, value)?,
            other => return Err(CliError::Usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Usage(msg));
        if self.data_path.is_none() && self.oracle_loads == 0 {
            return bad("oracle.loads must be positive when data.path is unset".into());
        }
        if self.split_test_loads == 0 {
            return bad("split.test_loads must be positive".into());
        }
        if !(self.oracle_noise > 0.0) {
            return bad(format!("oracle.noise must be positive, got {}", self.oracle_noise));
        }
        if !(self.gaussian_val_fraction > 0.0 && self.gaussian_val_fraction < 1.0) {
            return bad(format!(
                "gaussian.val_fraction must be in (0, 1), got {}",
                self.gaussian_val_fraction
            ));
        }
        if self.eval_samples == 0 || self.eval_bootstrap == 0 {
            return bad("eval.samples and eval.bootstrap must be positive".into());
        }
        if !(self.eval_rel_tol > 0.0) {
            return bad(format!("eval.rel_tol must be positive, got {}", self.eval_rel_tol));
        }
        Ok(())
    }

    /// The full effective configuration as sorted `key = value` lines; the
    /// exact text written as `resolved.config` next to run outputs.
    pub fn resolved(&self) -> String {
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        if let Some(p) = &self.data_path {
            map.insert("data.path", p.display().to_string());
        }
        map.insert("data.kind", self.kind.to_string());
        map.insert("oracle.loads", self.oracle_loads.to_string());
        map.insert("oracle.skip", self.oracle_skip.to_string());
        map.insert("oracle.k", self.oracle_k.to_string());
        map.insert("oracle.seed", self.oracle_seed.to_string());
        map.insert("oracle.noise", self.oracle_noise.to_string());
        map.insert("split.seed", self.split_seed.to_string());
        map.insert("split.test_loads", self.split_test_loads.to_string());
        map.insert("gaussian.iterations", self.gaussian_iterations.to_string());
        map.insert("gaussian.depth", self.gaussian_depth.to_string());
        map.insert("gaussian.rate", self.gaussian_rate.to_string());
        map.insert("gaussian.grid", self.gaussian_grid.to_string());
        map.insert("gaussian.val_fraction", self.gaussian_val_fraction.to_string());
        map.insert("flow.layers", self.flow_layers.to_string());
        map.insert("flow.epochs", self.flow_epochs.to_string());
        map.insert("flow.batch", self.flow_batch.to_string());
        map.insert("flow.rate", self.flow_rate.to_string());
        map.insert("flow.seed", self.flow_seed.to_string());
        map.insert("eval.samples", self.eval_samples.to_string());
        map.insert("eval.seed", self.eval_seed.to_string());
        map.insert("eval.bootstrap", self.eval_bootstrap.to_string());
        map.insert("eval.rel_tol", self.eval_rel_tol.to_string());
        let mut out = String::new();
        for (k, v) in map {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn boost_params(&self) -> BoostParams {
        BoostParams {
            n_iterations: self.gaussian_iterations,
            learning_rate: self.gaussian_rate,
            max_depth: self.gaussian_depth,
            min_samples_leaf: 1,
            seed: self.split_seed,
        }
    }

    pub fn flow_config(&self) -> FlowTrainConfig {
        FlowTrainConfig {
            n_layers: self.flow_layers,
            epochs: self.flow_epochs,
            batch_size: self.flow_batch,
            learning_rate: self.flow_rate,
            seed: self.flow_seed,
        }
    }

    pub fn oracle_config(&self) -> OracleConfig {
        OracleConfig {
            seed: self.oracle_seed,
            noise_scale: self.oracle_noise,
            ..OracleConfig::default()
        }
    }
}

fn split_pair(s: &str) -> Option<(String, String)> {
    let (k, v) = s.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || v.is_empty() {
        return None;
    }
    Some((k.to_string(), v.to_string()))
}

fn parse_as<T>(key: &str, value: &str) -> Result<T, CliError>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Usage(format!("config key `{key}`: bad value `{value}`: {e}")))
}
