use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorkloadError {
    #[error("workload trace is empty")]
    Empty,
    #[error("scale factor must be finite and nonnegative, got {0}")]
    BadScale(f64),
}

/// Target request rate for each second of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadTrace {
    rps: Vec<u32>,
}

impl WorkloadTrace {
    pub fn new(rps: Vec<u32>) -> Result<Self, WorkloadError> {
        if rps.is_empty() {
            return Err(WorkloadError::Empty);
        }
        Ok(Self { rps })
    }

    /// Multiplies every second by `factor` and rounds to the nearest integer.
    pub fn scaled(&self, factor: f64) -> Result<Self, WorkloadError> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(WorkloadError::BadScale(factor));
        }
        Ok(Self {
            rps: self
                .rps
                .iter()
                .map(|&r| (f64::from(r) * factor).round() as u32)
                .collect(),
        })
    }

    pub fn rps(&self) -> &[u32] {
        &self.rps
    }

    pub fn len(&self) -> usize {
        self.rps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rps.is_empty()
    }

    pub fn duration_ms(&self) -> u64 {
        self.rps.len() as u64 * 1000
    }

    /// Piecewise-constant trace from `(seconds, rps)` segments.
    pub fn from_segments(segments: &[(usize, u32)]) -> Result<Self, WorkloadError> {
        Self::new(
            segments
                .iter()
                .flat_map(|&(len, rps)| std::iter::repeat_n(rps, len))
                .collect(),
        )
    }
}
