//! Date-partitioned ensemble pseudo-labeling.
//!
//! The pipeline splits a dataset by the date token in each sample name,
//! trains an ensemble of diverse experts per date group, and progressively
//! pseudo-labels the group's unlabeled samples under strict consensus rules,
//! retraining after every round. The per-date ensembles are then combined
//! into a [`router::BranchedModel`] that picks a branch from the sample
//! name at inference time.
//!
//! Module map:
//!
//! * [`dataset`]: samples, name parsing, partitioning, manifests, synthetic data
//! * [`experts`]: classifier families and ensembles
//! * [`pseudolabel`]: one round of consensus labeling
//! * [`progressive`]: the self-training loop and the direct-voting baseline
//! * [`router`]: branched final model, inference and evaluation
//! * [`config`] and [`harness`]: run configuration, commands and reports

pub mod config;
pub mod dataset;
pub mod error;
pub mod experts;
pub mod harness;
pub mod progressive;
pub mod pseudolabel;
pub mod router;

pub use error::{Error, Result};
