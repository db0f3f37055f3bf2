//! File formats: traces, profiles, pipeline specs, run configs and reports.

mod config;
mod pipeline;
mod report;
mod trace;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::profile::ProfileError;

pub use config::{load_run_config, parse_run_config, PolicyName, RunConfig};
pub use pipeline::{load_pipeline_spec, load_profile_samples, parse_pipeline_spec, parse_profile_samples};
pub use report::{report_csv, write_report, ReportFormat};
pub use trace::{load_trace, parse_trace, trace_csv, write_trace};

/// Overrides the directory reports are written to when no path is given.
pub const OUT_DIR_ENV: &str = "INFERSCALE_OUT_DIR";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        line: Option<u64>,
        message: String,
    },
    #[error("{}: trace skips second {missing} (next row is second {found})", path.display())]
    Gap { path: PathBuf, missing: u64, found: u64 },
    #[error("{}: {source}", path.display())]
    Profile {
        path: PathBuf,
        #[source]
        source: ProfileError,
    },
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn parse(path: &Path, line: Option<u64>, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

/// `$INFERSCALE_OUT_DIR` if set, else `./out`.
pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

/// Resolves `relative` against the directory holding `anchor`.
pub(crate) fn sibling(anchor: &Path, relative: &Path) -> PathBuf {
    if relative.is_absolute() {
        relative.to_path_buf()
    } else {
        anchor
            .parent()
            .unwrap_or_else(|| Path::new(""))
            .join(relative)
    }
}
