//! File formats, datasets, metrics and the benchmark runner behind the
//! `evlc` command-line tool.

pub mod formats;
mod metrics;
mod plot;
mod runner;
mod scene;

use std::path::PathBuf;

use thiserror::Error;

pub use metrics::{detection_rate, interpolate_position, pose_error, DetectionRate, FrameDecodes, PoseErrors};
pub use plot::plot_reports;
pub use runner::{
    comparison_csv, comparison_markdown, evaluate, mode_name, run_benchmark, BenchReport, CompensateMode, FrameRecord,
};
pub use scene::{
    simulate_scene, CameraSection, Dataset, DatasetLayout, EdgeConfig, MarkerConfig, PipelineSection, SceneConfig, SimSection,
    TrajectoryConfig, TrajectoryKind, WaypointConfig,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {msg}", path.display())]
    Format { path: PathBuf, line: usize, msg: String },
    #[error("{}: {msg}", path.display())]
    Schema { path: PathBuf, msg: String },
    #[error("missing file {}", .0.display())]
    Missing(PathBuf),
    #[error("pipeline failure: {0}")]
    Pipeline(String),
    #[error("metric failure: {0}")]
    Metric(String),
}

impl BenchError {
    /// Process exit code: 2 for data or schema problems, 3 for pipeline
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Io { .. } | BenchError::Format { .. } | BenchError::Schema { .. } | BenchError::Missing(_) => 2,
            BenchError::Pipeline(_) | BenchError::Metric(_) => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }

    pub fn schema(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        BenchError::Schema { path: path.into(), msg: msg.into() }
    }
}
