//! Counterfactual explanations that survive concept drift.
//!
//! An online classifier trained on a drifting stream keeps moving its
//! decision boundary, so a counterfactual explanation that was valid when
//! generated can silently stop being one. This crate maintains a population
//! of explanations alongside the model instead of regenerating them: each
//! maintenance sweep retires explanations whose original query already
//! receives the target prediction, detects low-margin states, and nudges
//! them by a fixed-length step blending a correction direction with a pull
//! back toward the original query. Two correction estimates are provided —
//! a sampled local surrogate of the target-class probability and a kernel
//! mean-shift toward recent target-class observations.
//!
//! The crate also ships everything needed to measure the effect end to end:
//! synthetic drifting streams ([`streams`]), incremental classifiers
//! ([`models`]), counterfactual generators used for initialization and
//! regeneration baselines ([`generators`]), quality metrics ([`metrics`]),
//! and a reproducible experiment harness with a CSV/TSV reporting pipeline
//! ([`harness`]).
//!
//! Start with the runnable examples (`cargo run --example maintain_stream`)
//! or the `cfdrift` binary
//! (`cfdrift run --config crates/cfdrift/configs/hyperplane_lr.cfg`).

pub mod core;
pub mod error;
pub mod generators;
pub mod harness;
pub mod maintenance;
pub mod metrics;
pub mod models;
pub mod streams;
mod vecmath;

pub use crate::core::{
    derive_seed, CfeState, ClassId, FeatureVector, LabeledBuffer, LabeledInstance, RngStream,
};
pub use crate::error::{Error, Result};
pub use crate::maintenance::{MaintenanceConfig, UpdateAction, UpdateOutcome, Variant};
pub use crate::metrics::{CheckpointReport, MetricsConfig};
pub use crate::models::{HoeffdingTree, OnlineClassifier, OnlineLogisticRegression};
pub use crate::streams::{DriftSchedule, StreamSpec};
