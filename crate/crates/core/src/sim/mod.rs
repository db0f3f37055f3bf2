//! Discrete-event replay of a workload trace through a pipeline.
//!
//! Arrivals are drawn per second from a Poisson distribution and spread
//! uniformly inside the second. Every stage has one FIFO queue feeding its
//! instances. A control loop samples the arrival rate once per control period
//! and hands it to the scaling policy; the adapter then applies the resulting
//! actions with in-place and cold-start delays.

mod engine;
mod report;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimizer::StagePlan;
use crate::pipeline::PipelineSpec;
use crate::predictor::PredictorConfig;
use crate::queueing::queue_delay;
use crate::workload::WorkloadTrace;

pub use report::{Aggregates, BatchRecord, ControlRecord, SecondStats, SimReport, SimRun};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("static plan has {got} stages, pipeline has {expected}")]
    StageCountMismatch { expected: usize, got: usize },
    #[error("static plan for stage {stage} is outside the profile limits: {plan:?}")]
    PlanOutOfRange { stage: usize, plan: StagePlan },
    #[error("timing knob `{0}` must be positive")]
    NonPositiveKnob(&'static str),
    #[error("no initial deployment for {policy} at {lambda} rps: {reason}")]
    NoInitialPlan {
        policy: &'static str,
        lambda: f64,
        reason: String,
    },
    #[error("invalid pipeline: {0}")]
    Spec(String),
}

/// Which autoscaler drives the run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// In-place scaling for bursts, one-core instances once load settles.
    Joint,
    /// One-core instances only, resized to the current rate.
    HorizontalOnly,
    /// One instance per stage, resized in place.
    VerticalOnly,
    /// Fixed deployment, never changed.
    Static(Vec<StagePlan>),
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Joint => "joint",
            Policy::HorizontalOnly => "horizontal",
            Policy::VerticalOnly => "vertical",
            Policy::Static(_) => "static",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropPolicy {
    /// Drop once a request is as old as the SLO.
    AtSlo,
    /// Drop at three times the SLO.
    At3xSlo,
    Never,
}

impl DropPolicy {
    /// Age at which a request is dropped, if ever.
    pub fn threshold_ms(self, slo_ms: u32) -> Option<f64> {
        match self {
            DropPolicy::AtSlo => Some(f64::from(slo_ms)),
            DropPolicy::At3xSlo => Some(3.0 * f64::from(slo_ms)),
            DropPolicy::Never => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Timing {
    pub cold_start_ms: u64,
    pub inplace_delay_ms: u64,
    pub control_period_ms: u64,
    /// Added to the expected fill time before a partial batch is flushed.
    pub flush_slack_ms: f64,
    /// How long the run continues after the trace ends.
    pub drain_ms: u64,
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            cold_start_ms: 5500,
            inplace_delay_ms: 100,
            control_period_ms: 1000,
            flush_slack_ms: 0.0,
            drain_ms: 30_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: PipelineSpec,
    pub trace: WorkloadTrace,
    pub policy: Policy,
    pub drop_policy: DropPolicy,
    pub seed: u64,
    pub timing: Timing,
    pub predictor: PredictorConfig,
    /// The monitored rate is the max over this many recent control periods.
    pub rate_window: usize,
}

pub const DEFAULT_RATE_WINDOW: usize = 5;

impl Scenario {
    pub fn new(spec: PipelineSpec, trace: WorkloadTrace, policy: Policy, seed: u64) -> Self {
        Self {
            spec,
            trace,
            policy,
            drop_policy: DropPolicy::Never,
            seed,
            timing: Timing::default(),
            predictor: PredictorConfig::default(),
            rate_window: DEFAULT_RATE_WINDOW,
        }
    }

    pub fn with_policy(&self, policy: Policy) -> Self {
        Self {
            policy,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.spec
            .validate()
            .map_err(|e| ConfigError::Spec(e.to_string()))?;
        let t = &self.timing;
        if t.control_period_ms == 0 {
            return Err(ConfigError::NonPositiveKnob("control_period_ms"));
        }
        if t.cold_start_ms == 0 {
            return Err(ConfigError::NonPositiveKnob("cold_start_ms"));
        }
        if t.inplace_delay_ms == 0 {
            return Err(ConfigError::NonPositiveKnob("inplace_delay_ms"));
        }
        if !(t.flush_slack_ms.is_finite() && t.flush_slack_ms >= 0.0) {
            return Err(ConfigError::NonPositiveKnob("flush_slack_ms"));
        }
        if self.rate_window == 0 {
            return Err(ConfigError::NonPositiveKnob("rate_window"));
        }
        if let Policy::Static(plan) = &self.policy {
            if plan.len() != self.spec.len() {
                return Err(ConfigError::StageCountMismatch {
                    expected: self.spec.len(),
                    got: plan.len(),
                });
            }
            for (stage, (p, profile)) in plan.iter().zip(&self.spec.stages).enumerate() {
                let ok = (1..=profile.b_max).contains(&p.batch)
                    && (1..=profile.c_max).contains(&p.cores)
                    && p.instances >= 1;
                if !ok {
                    return Err(ConfigError::PlanOutOfRange { stage, plan: *p });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    InFlight,
    Served,
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub enqueue_ms: f64,
    pub dequeue_ms: Option<f64>,
    pub finish_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: usize,
    pub arrival_ms: f64,
    pub stages: Vec<StageTimes>,
    pub status: RequestStatus,
    /// When the request was served or dropped.
    pub done_ms: Option<f64>,
}

impl Request {
    pub fn new(id: usize, arrival_ms: f64) -> Self {
        Self {
            id,
            arrival_ms,
            stages: Vec::new(),
            status: RequestStatus::InFlight,
            done_ms: None,
        }
    }

    pub fn age_ms(&self, now_ms: f64) -> f64 {
        now_ms - self.arrival_ms
    }

    /// End-to-end latency of a served request.
    pub fn e2e_ms(&self) -> Option<f64> {
        match self.status {
            RequestStatus::Served => self.done_ms.map(|d| d - self.arrival_ms),
            _ => None,
        }
    }
}

pub fn should_drop(request: &Request, now_ms: f64, policy: DropPolicy, slo_ms: u32) -> bool {
    policy
        .threshold_ms(slo_ms)
        .is_some_and(|limit| request.age_ms(now_ms) >= limit)
}

/// A request waiting in a stage queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Queued {
    pub request: usize,
    pub enqueue_ms: f64,
}

/// How long the head of a queue may wait before a partial batch goes out.
pub fn flush_after_ms(batch: u32, lambda_now: f64, slack_ms: f64) -> f64 {
    queue_delay(batch, lambda_now.max(1e-9)) + slack_ms
}

/// Number of requests to take from the front of `queue`, if a batch is due.
///
/// A full batch goes out as soon as `batch` requests wait. A partial one goes
/// out once the head has waited `flush_after_ms`.
pub fn batch_dispatch_rule(
    queue: &VecDeque<Queued>,
    batch: u32,
    now_ms: f64,
    flush_after_ms: f64,
) -> Option<usize> {
    let head = queue.front()?;
    let batch = batch.max(1) as usize;
    if queue.len() >= batch {
        Some(batch)
    } else if now_ms >= head.enqueue_ms + flush_after_ms {
        Some(queue.len())
    } else {
        None
    }
}

/// Runs a scenario and returns its report.
pub fn run(scenario: &Scenario) -> Result<SimReport, ConfigError> {
    Ok(run_detailed(scenario)?.report)
}

/// Runs a scenario and keeps every request and batch for inspection.
pub fn run_detailed(scenario: &Scenario) -> Result<SimRun, ConfigError> {
    scenario.validate()?;
    engine::Engine::new(scenario)?.run()
}
