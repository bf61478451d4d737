//! Experiment harness: config files, sweeps, CSV output and plots.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod config;
pub mod plot;
pub mod sweep;

pub use config::{parse_config, parse_config_str, ConfigError, ExperimentConfig, SchemeVariant};
pub use plot::{plot, PlotKind, PlotOptions};
pub use sweep::{run_sweep, SweepOutput};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] fedair_core::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: cannot parse `{value}`")]
    BadValue { path: PathBuf, value: String },
    #[error("no data rows to plot")]
    EmptyData,
    #[error("plot: {0}")]
    Plot(String),
}

impl HarnessError {
    pub(crate) fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub(crate) fn from_csv(path: &Path, e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => Self::io(path, source),
            kind => HarnessError::Plot(format!("{}: {kind:?}", path.display())),
        }
    }
}
