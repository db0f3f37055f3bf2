//! Cost-minimizing resource allocation for a pipeline.
//!
//! The problem is: choose batch `b_s`, cores `c_s` and instances `n_s` per
//! stage minimizing `sum n_s * c_s`, subject to
//!
//! * `sum_s l_s(b_s, c_s) + q(b_s) <= SLO` (end-to-end latency), and
//! * `n_s * h_s(b_s, c_s) >= lambda` for every stage (stability).
//!
//! Three solvers are provided. [`solve_vertical`] keeps instance counts fixed
//! and picks cores and batch; [`solve_horizontal`] pins every instance to one
//! core and picks batch and instance count; [`solve_hybrid`] handles rates
//! beyond what vertical scaling alone can carry. Both dynamic programs index
//! the latency budget in whole milliseconds, rounding each stage's latency up,
//! so returned plans never exceed the SLO. [`oracle::brute_force_optimize`]
//! enumerates the same quantized problem exhaustively for testing.

mod dp;
pub mod oracle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::PipelineSpec;
use crate::profile::ModelProfile;
use crate::queueing::queue_delay;

pub use oracle::brute_force_optimize;

/// Relative slack when comparing provisioned capacity against a rate.
pub const RATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("no configuration satisfies the latency objective and the arrival rate")]
    Infeasible,
    #[error("arrival rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("expected {expected} instance counts, got {got}")]
    InstanceCountMismatch { expected: usize, got: usize },
    #[error("instance counts must be >= 1")]
    ZeroInstances,
    #[error("search grid of {size} points exceeds the limit of {limit}")]
    GridTooLarge { size: u128, limit: u128 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanKind {
    Vertical,
    Horizontal,
    Hybrid,
}

/// Search space for the exhaustive oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    Vertical,
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StagePlan {
    pub batch: u32,
    pub cores: u32,
    pub instances: u32,
}

impl StagePlan {
    pub fn new(batch: u32, cores: u32, instances: u32) -> Self {
        Self {
            batch,
            cores,
            instances,
        }
    }

    pub fn total_cores(&self) -> u64 {
        u64::from(self.cores) * u64::from(self.instances)
    }

    /// Combined throughput of all instances, requests/second.
    pub fn capacity(&self, profile: &ModelProfile) -> f64 {
        f64::from(self.instances) * profile.throughput_unchecked(self.batch, self.cores)
    }
}

/// The vertically scaled share of a hybrid plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridTier {
    /// Largest rate the existing instances carry on their own.
    pub lambda_vertical: f64,
    pub vertical_instances: Vec<u32>,
    /// Instances added per stage at the vertical core count.
    pub extra_instances: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelinePlan {
    pub kind: PlanKind,
    /// Rate the plan was solved for.
    pub lambda: f64,
    pub stages: Vec<StagePlan>,
    pub hybrid: Option<HybridTier>,
    pub total_cores: u64,
    pub predicted_e2e_ms: f64,
}

impl PipelinePlan {
    fn assemble(
        kind: PlanKind,
        spec: &PipelineSpec,
        lambda: f64,
        stages: Vec<StagePlan>,
        hybrid: Option<HybridTier>,
    ) -> Self {
        let total_cores = stages.iter().map(StagePlan::total_cores).sum();
        let predicted_e2e_ms = predicted_e2e_ms(spec, &stages, lambda);
        Self {
            kind,
            lambda,
            stages,
            hybrid,
            total_cores,
            predicted_e2e_ms,
        }
    }

    /// Checks both problem constraints and the plan's own bookkeeping.
    pub fn verify(&self, spec: &PipelineSpec) -> Result<(), String> {
        if self.stages.len() != spec.len() {
            return Err(format!(
                "plan has {} stages, spec has {}",
                self.stages.len(),
                spec.len()
            ));
        }
        let mut budget = 0u64;
        for (i, (plan, profile)) in self.stages.iter().zip(&spec.stages).enumerate() {
            if plan.batch == 0 || plan.batch > profile.b_max {
                return Err(format!("stage {i}: batch {} out of range", plan.batch));
            }
            if plan.cores == 0 || plan.cores > profile.c_max {
                return Err(format!("stage {i}: cores {} out of range", plan.cores));
            }
            if plan.instances == 0 {
                return Err(format!("stage {i}: no instances"));
            }
            if !covers(plan.capacity(profile), self.lambda) {
                return Err(format!(
                    "stage {i}: capacity {:.3} below rate {:.3}",
                    plan.capacity(profile),
                    self.lambda
                ));
            }
            budget += u64::from(stage_budget_ms(profile, plan.batch, plan.cores, self.lambda));
        }
        if budget > u64::from(spec.slo_ms) || self.predicted_e2e_ms > f64::from(spec.slo_ms) {
            return Err(format!(
                "end-to-end latency {:.3} ms exceeds slo {} ms",
                self.predicted_e2e_ms, spec.slo_ms
            ));
        }
        let total: u64 = self.stages.iter().map(StagePlan::total_cores).sum();
        if total != self.total_cores {
            return Err(format!("total_cores {} != {}", self.total_cores, total));
        }
        Ok(())
    }
}

pub fn covers(capacity: f64, lambda: f64) -> bool {
    capacity >= lambda * (1.0 - RATE_TOLERANCE)
}

/// Milliseconds of latency budget a value consumes (rounded up).
pub fn budget_ms(latency_ms: f64) -> u32 {
    let rounded = (latency_ms - 1e-9).ceil();
    if rounded <= 0.0 {
        0
    } else if rounded >= f64::from(u32::MAX) {
        u32::MAX
    } else {
        rounded as u32
    }
}

/// Budget one stage consumes: processing plus batch-fill delay.
pub fn stage_budget_ms(profile: &ModelProfile, batch: u32, cores: u32, lambda: f64) -> u32 {
    budget_ms(profile.latency_unchecked(batch, cores) + queue_delay(batch, lambda))
}

pub fn predicted_e2e_ms(spec: &PipelineSpec, stages: &[StagePlan], lambda: f64) -> f64 {
    stages
        .iter()
        .zip(&spec.stages)
        .map(|(s, p)| p.latency_unchecked(s.batch, s.cores) + queue_delay(s.batch, lambda))
        .sum()
}

/// Smallest instance count whose combined throughput covers `lambda`.
pub fn instances_needed(per_instance: f64, lambda: f64) -> u32 {
    let mut n = (lambda / per_instance).ceil().max(1.0) as u32;
    while !covers(f64::from(n) * per_instance, lambda) {
        n += 1;
    }
    n
}

fn check_rate(lambda: f64) -> Result<(), OptimizerError> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(OptimizerError::InvalidRate(lambda))
    }
}

fn check_instances(spec: &PipelineSpec, instances: &[u32]) -> Result<(), OptimizerError> {
    if instances.len() != spec.len() {
        return Err(OptimizerError::InstanceCountMismatch {
            expected: spec.len(),
            got: instances.len(),
        });
    }
    if instances.contains(&0) {
        return Err(OptimizerError::ZeroInstances);
    }
    Ok(())
}

/// Vertical scaling with one instance per stage.
pub fn solve_vertical(spec: &PipelineSpec, lambda: f64) -> Result<PipelinePlan, OptimizerError> {
    solve_vertical_with_instances(spec, lambda, &vec![1; spec.len()])
}

/// Vertical scaling with the instance count of each stage held fixed.
///
/// Every instance of a stage gets the same core count.
pub fn solve_vertical_with_instances(
    spec: &PipelineSpec,
    lambda: f64,
    instances: &[u32],
) -> Result<PipelinePlan, OptimizerError> {
    check_rate(lambda)?;
    check_instances(spec, instances)?;
    let slo = spec.slo_ms;
    let options: Vec<Vec<dp::StageOption>> = spec
        .stages
        .iter()
        .zip(instances)
        .map(|(profile, &n)| {
            let mut opts = Vec::new();
            for cores in 1..=profile.c_max {
                for batch in 1..=profile.b_max {
                    let capacity = f64::from(n) * profile.throughput_unchecked(batch, cores);
                    if !covers(capacity, lambda) {
                        continue;
                    }
                    let budget = stage_budget_ms(profile, batch, cores, lambda);
                    if budget > slo {
                        continue;
                    }
                    opts.push(dp::StageOption {
                        plan: StagePlan::new(batch, cores, n),
                        cost: u64::from(n) * u64::from(cores),
                        budget,
                    });
                }
            }
            opts
        })
        .collect();
    let chosen = dp::solve_chain(&options, slo).ok_or(OptimizerError::Infeasible)?;
    Ok(PipelinePlan::assemble(
        PlanKind::Vertical,
        spec,
        lambda,
        chosen,
        None,
    ))
}

/// Horizontal scaling: one-core instances, batch and instance count per stage.
pub fn solve_horizontal(spec: &PipelineSpec, lambda: f64) -> Result<PipelinePlan, OptimizerError> {
    check_rate(lambda)?;
    let slo = spec.slo_ms;
    let options: Vec<Vec<dp::StageOption>> = spec
        .stages
        .iter()
        .map(|profile| {
            (1..=profile.b_max)
                .filter_map(|batch| {
                    let budget = stage_budget_ms(profile, batch, 1, lambda);
                    if budget > slo {
                        return None;
                    }
                    let n = instances_needed(profile.throughput_unchecked(batch, 1), lambda);
                    Some(dp::StageOption {
                        plan: StagePlan::new(batch, 1, n),
                        cost: u64::from(n),
                        budget,
                    })
                })
                .collect()
        })
        .collect();
    let chosen = dp::solve_chain(&options, slo).ok_or(OptimizerError::Infeasible)?;
    Ok(PipelinePlan::assemble(
        PlanKind::Horizontal,
        spec,
        lambda,
        chosen,
        None,
    ))
}

/// Vertical scaling on single instances, extended with new instances when the
/// rate is beyond what vertical scaling can carry.
pub fn solve_hybrid(spec: &PipelineSpec, lambda: f64) -> Result<PipelinePlan, OptimizerError> {
    solve_hybrid_with_instances(spec, lambda, &vec![1; spec.len()])
}

/// Finds the largest integer rate below `lambda` that vertical scaling serves
/// by bisection, then adds instances at the same per-instance configuration
/// to cover each stage's remaining shortfall.
pub fn solve_hybrid_with_instances(
    spec: &PipelineSpec,
    lambda: f64,
    instances: &[u32],
) -> Result<PipelinePlan, OptimizerError> {
    check_rate(lambda)?;
    check_instances(spec, instances)?;

    let vertical_at = |rate: u64| solve_vertical_with_instances(spec, rate as f64, instances);

    let mut low = 1u64;
    if (low as f64) >= lambda {
        return Err(OptimizerError::Infeasible);
    }
    let mut best = match vertical_at(low) {
        Ok(plan) => plan,
        Err(OptimizerError::Infeasible) => return Err(OptimizerError::Infeasible),
        Err(e) => return Err(e),
    };
    // Invariant: `low` is feasible, `high` is not (or is the target itself).
    let mut high = lambda;
    loop {
        let mid = ((low as f64 + high) / 2.0).floor() as u64;
        if mid <= low || (mid as f64) >= high {
            break;
        }
        match vertical_at(mid) {
            Ok(plan) => {
                low = mid;
                best = plan;
            }
            Err(OptimizerError::Infeasible) => high = mid as f64,
            Err(e) => return Err(e),
        }
    }

    let mut stages = Vec::with_capacity(spec.len());
    let mut extra_instances = Vec::with_capacity(spec.len());
    for (plan, profile) in best.stages.iter().zip(&spec.stages) {
        let per_instance = profile.throughput_unchecked(plan.batch, plan.cores);
        let carried = f64::from(plan.instances) * per_instance;
        let extra = if covers(carried, lambda) {
            0
        } else {
            instances_needed(per_instance, lambda - carried)
        };
        extra_instances.push(extra);
        stages.push(StagePlan::new(plan.batch, plan.cores, plan.instances + extra));
    }
    let tier = HybridTier {
        lambda_vertical: low as f64,
        vertical_instances: instances.to_vec(),
        extra_instances,
    };
    Ok(PipelinePlan::assemble(
        PlanKind::Hybrid,
        spec,
        lambda,
        stages,
        Some(tier),
    ))
}

/// Vertical plan if one exists, otherwise the hybrid fallback.
pub fn solve_vertical_or_hybrid(
    spec: &PipelineSpec,
    lambda: f64,
    instances: &[u32],
) -> Result<PipelinePlan, OptimizerError> {
    match solve_vertical_with_instances(spec, lambda, instances) {
        Err(OptimizerError::Infeasible) => solve_hybrid_with_instances(spec, lambda, instances),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(b_max: u32, c_max: u32) -> ModelProfile {
        ModelProfile::new("example", 10.0, 40.0, 2.0, 5.0, b_max, c_max).unwrap()
    }

    fn single(slo: u32) -> PipelineSpec {
        PipelineSpec::new("single", slo, vec![example(16, 16)]).unwrap()
    }

    #[test]
    fn vertical_needs_two_cores_at_50_rps() {
        let plan = solve_vertical(&single(100), 50.0).unwrap();
        assert_eq!(plan.kind, PlanKind::Vertical);
        assert_eq!(plan.total_cores, 2);
        // Smallest batch reaching 50 rps on two cores.
        assert_eq!(plan.stages[0], StagePlan::new(2, 2, 1));
        assert!((plan.predicted_e2e_ms - 59.0).abs() < 1e-9);
        plan.verify(&single(100)).unwrap();
    }

    #[test]
    fn vertical_exact_fit_at_slo_boundary() {
        let plan = solve_vertical(&single(57), 17.0).unwrap();
        assert_eq!(plan.stages[0], StagePlan::new(1, 1, 1));
        assert_eq!(plan.total_cores, 1);
        assert!((plan.predicted_e2e_ms - 57.0).abs() < 1e-9);
    }

    #[test]
    fn vertical_tight_slo_high_rate() {
        // b=4, c=16: l = 50/16*... = 18, q = 15, h = 222 >= 200.
        let plan = solve_vertical(&single(40), 200.0).unwrap();
        plan.verify(&single(40)).unwrap();
        let oracle = brute_force_optimize(&single(40), 200.0, ScalingMode::Vertical).unwrap();
        assert_eq!(plan.total_cores, oracle.total_cores);
    }

    #[test]
    fn vertical_infeasible_when_rate_exceeds_single_instance() {
        // h(16, 16) = 16000 / 49.5 ~ 323 rps is the ceiling for one instance.
        assert_eq!(
            solve_vertical(&single(1000), 400.0),
            Err(OptimizerError::Infeasible)
        );
    }

    #[test]
    fn horizontal_examples() {
        let plan = solve_horizontal(&single(200), 50.0).unwrap();
        assert_eq!(plan.total_cores, 2);
        assert!(plan.stages.iter().all(|s| s.cores == 1));
        plan.verify(&single(200)).unwrap();

        let plan = solve_horizontal(&single(57), 17.0).unwrap();
        assert_eq!(plan.stages[0], StagePlan::new(1, 1, 1));
    }

    #[test]
    fn horizontal_infeasible_below_one_core_floor() {
        // l(1,1) = 57 > 20 while the spec floor l(1,16) = 10.125 is fine.
        assert_eq!(
            solve_horizontal(&single(20), 10.0),
            Err(OptimizerError::Infeasible)
        );
    }

    #[test]
    fn hybrid_covers_rate_beyond_vertical_limit() {
        let spec = single(100);
        // One instance tops out at h(16, 16) ~ 323 rps.
        assert_eq!(solve_vertical(&spec, 400.0), Err(OptimizerError::Infeasible));
        let plan = solve_hybrid(&spec, 400.0).unwrap();
        assert_eq!(plan.kind, PlanKind::Hybrid);
        plan.verify(&spec).unwrap();
        let tier = plan.hybrid.as_ref().unwrap();
        assert!(tier.lambda_vertical < 400.0);
        assert!(solve_vertical(&spec, tier.lambda_vertical).is_ok());
        assert!(solve_vertical(&spec, tier.lambda_vertical + 1.0).is_err());
    }

    #[test]
    fn hybrid_infeasible_for_very_slow_model() {
        // Every configuration takes >= 1.5 s, so even 1 rps cannot be carried.
        let slow = ModelProfile::new("slow", 0.0, 0.0, 0.0, 1500.0, 4, 4).unwrap();
        let spec = PipelineSpec::new("slow", 2000, vec![slow]).unwrap();
        assert_eq!(solve_hybrid(&spec, 5.0), Err(OptimizerError::Infeasible));
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = single(100);
        assert!(matches!(
            solve_vertical(&spec, 0.0),
            Err(OptimizerError::InvalidRate(_))
        ));
        assert!(matches!(
            solve_horizontal(&spec, f64::NAN),
            Err(OptimizerError::InvalidRate(_))
        ));
        assert!(matches!(
            solve_vertical_with_instances(&spec, 10.0, &[1, 1]),
            Err(OptimizerError::InstanceCountMismatch { .. })
        ));
        assert_eq!(
            solve_vertical_with_instances(&spec, 10.0, &[0]),
            Err(OptimizerError::ZeroInstances)
        );
    }

    #[test]
    fn fixed_instances_scale_cost() {
        let spec = single(100);
        let plan = solve_vertical_with_instances(&spec, 50.0, &[2]).unwrap();
        // Two instances share the load: 1 core each suffices.
        assert_eq!(plan.stages[0].instances, 2);
        assert_eq!(plan.total_cores, 2 * u64::from(plan.stages[0].cores));
        plan.verify(&spec).unwrap();
    }

    #[test]
    fn budget_rounds_up_but_keeps_exact_integers() {
        assert_eq!(budget_ms(57.0), 57);
        assert_eq!(budget_ms(57.000001), 58);
        assert_eq!(budget_ms(0.0), 0);
    }

    #[test]
    fn instances_needed_uses_ceiling() {
        assert_eq!(instances_needed(43.0, 50.0), 2);
        assert_eq!(instances_needed(25.0, 50.0), 2);
        assert_eq!(instances_needed(100.0, 50.0), 1);
    }
}
