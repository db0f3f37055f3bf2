use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{ModelProfile, ProfileError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("pipeline must have at least one stage")]
    NoStages,
    #[error("slo_ms must be positive")]
    ZeroSlo,
    #[error("slo_ms={slo_ms} is below the unloaded latency floor of {floor_ms:.3} ms")]
    SloBelowFloor { slo_ms: u32, floor_ms: f64 },
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// A linear chain of models sharing one end-to-end latency objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub name: String,
    pub slo_ms: u32,
    pub stages: Vec<ModelProfile>,
}

impl PipelineSpec {
    pub fn new(
        name: impl Into<String>,
        slo_ms: u32,
        stages: Vec<ModelProfile>,
    ) -> Result<Self, SpecError> {
        let spec = Self {
            name: name.into(),
            slo_ms,
            stages,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.stages.is_empty() {
            return Err(SpecError::NoStages);
        }
        if self.slo_ms == 0 {
            return Err(SpecError::ZeroSlo);
        }
        for stage in &self.stages {
            stage.validate()?;
        }
        let floor_ms = self.unloaded_floor_ms();
        if f64::from(self.slo_ms) < floor_ms {
            return Err(SpecError::SloBelowFloor {
                slo_ms: self.slo_ms,
                floor_ms,
            });
        }
        Ok(())
    }

    /// Sum of single-request latencies with every stage at its core limit.
    pub fn unloaded_floor_ms(&self) -> f64 {
        self.stages
            .iter()
            .map(|p| p.latency_unchecked(1, p.c_max))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> ModelProfile {
        ModelProfile::new("m", 10.0, 40.0, 2.0, 5.0, 16, 16).unwrap()
    }

    #[test]
    fn rejects_empty_and_zero_slo() {
        assert_eq!(PipelineSpec::new("p", 100, vec![]), Err(SpecError::NoStages));
        assert_eq!(
            PipelineSpec::new("p", 0, vec![profile()]),
            Err(SpecError::ZeroSlo)
        );
    }

    #[test]
    fn rejects_slo_below_unloaded_floor() {
        // l(1, 16) = 50/16 + 2 + 5 = 10.125 per stage
        let err = PipelineSpec::new("p", 20, vec![profile(), profile()]).unwrap_err();
        assert!(matches!(err, SpecError::SloBelowFloor { .. }));
        assert!(PipelineSpec::new("p", 21, vec![profile(), profile()]).is_ok());
    }
}
