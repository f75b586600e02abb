//! Experiment orchestration: configuration, the streaming protocol,
//! result artifacts, and plot-data emission.

pub mod artifacts;
pub mod config;
pub mod experiment;
pub mod plot;

pub use artifacts::{fmt_sig, AblationRow, CheckpointRow, FinalRow, RunArtifacts, RuntimeRow};
pub use config::{ExperimentConfig, GeneratorKind, Method, ModelConfig, ModelKind};
pub use experiment::{measure_runtime, run_ablation, run_experiment};
pub use plot::{render_validity_svg, series_tsv, validity_series, SeriesPoint};
