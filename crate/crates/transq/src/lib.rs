//! Command-line shell for `transq-core`: run configuration, checkpoints,
//! the metrics CSV, PGM frames and trace files, plus the `train`, `eval`,
//! `rollout`, `compare` and `trace` commands.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod metrics;
pub mod parallel;
pub mod pgm;

pub use checkpoint::{Checkpoint, CheckpointError};
pub use config::{ConfigError, RunConfig};
pub use metrics::{MetricsRow, MetricsWriter, RowKind};
