//! Learns conditional distributions of storage performance and validates
//! sampled predictions.
//!
//! A *load* is a workload configuration (random/sequential, read fraction,
//! block size, jobs, queue depth, optional RAID layout) measured repeatedly;
//! every stream yields a cloud of (IOPS, latency) points. This crate covers
//! the full loop:
//!
//! * [`domain`] — workload specs, parameter ranges, feature encoding
//! * [`ingest`] — CSV measurement format, train/test splitting
//! * [`sobol`] — low-discrepancy experiment planning
//! * [`boosting`] — multi-output gradient-boosted trees (exact greedy splits)
//! * [`gaussian`] — boosted conditional Gaussian in log space
//! * [`flow`] — conditional normalizing flow (affine coupling layers)
//! * [`knn`] — nearest-neighbour baseline returning raw measurement sets
//! * [`metrics`] — error and distribution-distance metrics with bootstrap
//! * [`littlelaw`] — queueing-balance validation and reliability filtering
//! * [`oracle`] — synthetic generator with closed-form ground truth
//!
//! All randomness flows through explicitly seeded ChaCha8 generators, so
//! every fit, sample and evaluation is reproducible bit for bit.

pub mod boosting;
pub mod domain;
pub mod flow;
pub mod gaussian;
pub mod ingest;
pub mod knn;
pub mod littlelaw;
pub mod mat2;
pub mod metrics;
pub mod oracle;
pub mod sobol;
