use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_pipeline_spec, load_trace, read_to_string, sibling, IoError, ReportFormat};
use crate::optimizer::StagePlan;
use crate::predictor::PredictorConfig;
use crate::sim::{DropPolicy, Policy, Scenario, Timing, DEFAULT_RATE_WINDOW};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyName {
    #[default]
    Joint,
    Horizontal,
    Vertical,
    Static,
}

impl std::str::FromStr for PolicyName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "joint" => Ok(PolicyName::Joint),
            "horizontal" => Ok(PolicyName::Horizontal),
            "vertical" => Ok(PolicyName::Vertical),
            "static" => Ok(PolicyName::Static),
            other => Err(format!(
                "unknown policy `{other}` (expected joint, horizontal, vertical or static)"
            )),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_rate_window() -> usize {
    DEFAULT_RATE_WINDOW
}

/// A simulation run described in TOML. Relative paths are resolved against
/// the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec: PathBuf,
    pub trace: PathBuf,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub policy: PolicyName,
    /// Deployment for the static policy.
    #[serde(default)]
    pub static_plan: Option<Vec<StagePlan>>,
    #[serde(default = "default_drop")]
    pub drop_policy: DropPolicy,
    /// Report destination; the CLI picks one when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<ReportFormat>,
    #[serde(default)]
    pub timing: Timing,
    #[serde(default)]
    pub predictor: PredictorConfig,
    #[serde(default = "default_rate_window")]
    pub rate_window: usize,
}

fn default_drop() -> DropPolicy {
    DropPolicy::Never
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, IoError> {
    parse_run_config(&read_to_string(path)?, path)
}

pub fn parse_run_config(text: &str, origin: &Path) -> Result<RunConfig, IoError> {
    let mut config: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|span| text[..span.start.min(text.len())].lines().count().max(1) as u64);
        IoError::parse(origin, line, e.message().to_string())
    })?;
    config.spec = sibling(origin, &config.spec);
    config.trace = sibling(origin, &config.trace);
    config.output = config.output.map(|o| sibling(origin, &o));
    if config.policy == PolicyName::Static && config.static_plan.is_none() {
        return Err(IoError::parse(origin, None, "policy `static` needs `static_plan`"));
    }
    Ok(config)
}

impl RunConfig {
    pub fn policy_for(&self, name: PolicyName) -> Result<Policy, String> {
        Ok(match name {
            PolicyName::Joint => Policy::Joint,
            PolicyName::Horizontal => Policy::HorizontalOnly,
            PolicyName::Vertical => Policy::VerticalOnly,
            PolicyName::Static => Policy::Static(
                self.static_plan
                    .clone()
                    .ok_or_else(|| "policy `static` needs `static_plan`".to_string())?,
            ),
        })
    }

    /// Loads the referenced spec and trace into a scenario.
    pub fn scenario(&self, seed: u64) -> Result<Scenario, IoError> {
        let spec = load_pipeline_spec(&self.spec)?;
        let trace = load_trace(&self.trace, self.scale)?;
        let policy = self
            .policy_for(self.policy)
            .map_err(|m| IoError::parse(&self.spec, None, m))?;
        Ok(Scenario {
            spec,
            trace,
            policy,
            drop_policy: self.drop_policy,
            seed,
            timing: self.timing,
            predictor: self.predictor,
            rate_window: self.rate_window,
        })
    }
}
