use serde::{Deserialize, Serialize};

use super::Request;
use crate::optimizer::StagePlan;
use crate::transition::{Mode, ScalingAction};

/// Metrics of the requests that arrived during one second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondStats {
    pub second: u64,
    pub rps: u64,
    /// Late, dropped or unfinished requests.
    pub violations: u64,
    pub drops: u64,
    /// P99 end-to-end latency of the served requests, if any were served.
    pub p99_ms: Option<f64>,
    /// Mean allocated cores over the second.
    pub cost_cores: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub arrivals: u64,
    pub served: u64,
    pub dropped: u64,
    pub in_flight: u64,
    /// Served requests that finished after the SLO.
    pub late: u64,
    pub violations: u64,
    pub violation_rate: f64,
    pub p99_ms: Option<f64>,
    pub total_core_seconds: f64,
    /// The same integral summed per instance; must match `total_core_seconds`.
    pub instance_core_seconds: f64,
    pub mean_cost_cores: f64,
}

/// One control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRecord {
    pub time_ms: u64,
    pub lambda_now: f64,
    pub lambda_pred: f64,
    pub mode: Option<Mode>,
    pub actions: Vec<ScalingAction>,
    /// Committed deployment after the tick, booting instances included.
    pub config: Vec<StagePlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub policy: String,
    pub seed: u64,
    pub slo_ms: u32,
    pub seconds: Vec<SecondStats>,
    pub aggregates: Aggregates,
    pub control_log: Vec<ControlRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub stage: usize,
    pub instance: usize,
    pub start_ms: f64,
    pub end_ms: f64,
    pub size: usize,
    pub cores: u32,
    pub instance_ready_ms: f64,
}

/// A report together with the raw requests and batches behind it.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub report: SimReport,
    pub requests: Vec<Request>,
    pub batches: Vec<BatchRecord>,
}

/// Nearest-rank percentile of unsorted samples.
pub(crate) fn percentile(values: &mut [f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    Some(values[rank - 1])
}
