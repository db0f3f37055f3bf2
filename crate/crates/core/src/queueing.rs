//! Queuing delay of a stage that forms batches from a Poisson-ish stream.
//!
//! Every stage of the linear pipeline sees the ingress rate, so one `lambda`
//! serves all stages.

use crate::profile::{ModelProfile, ProfileError};

/// Time the first request of a batch waits for the batch to fill, in ms.
///
/// `lambda` is in requests/second and must be positive.
pub fn queue_delay(batch: u32, lambda: f64) -> f64 {
    debug_assert!(batch >= 1 && lambda > 0.0);
    1000.0 * f64::from(batch.saturating_sub(1)) / lambda
}

/// Worst-case queuing delay that also accounts for all `instances` being busy.
///
/// `max((b-1)/lambda, l(b, c) - (n*b + 1)/lambda)` in milliseconds. Only used
/// to check that the batch-fill term dominates for provisioned plans.
pub fn queue_delay_worst_case(
    profile: &ModelProfile,
    batch: u32,
    cores: u32,
    instances: u32,
    lambda: f64,
) -> Result<f64, ProfileError> {
    let fill = queue_delay(batch, lambda);
    Ok(fill.max(busy_arm(profile, batch, cores, instances, lambda)?))
}

/// Second arm of the worst-case delay: wait for a busy instance to free up.
pub fn busy_arm(
    profile: &ModelProfile,
    batch: u32,
    cores: u32,
    instances: u32,
    lambda: f64,
) -> Result<f64, ProfileError> {
    let latency = profile.latency(batch, cores)?;
    let next_batch_ms = 1000.0 * (f64::from(instances) * f64::from(batch) + 1.0) / lambda;
    Ok(latency - next_batch_ms)
}
