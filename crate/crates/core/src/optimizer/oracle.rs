//! Exhaustive search over every per-stage configuration combination.
//!
//! Exists to check the dynamic programs. It walks the full cartesian product
//! with an odometer and evaluates each combination from scratch.

use super::{
    covers, predicted_e2e_ms, stage_budget_ms, OptimizerError, PipelinePlan, PlanKind,
    ScalingMode, StagePlan,
};
use crate::pipeline::PipelineSpec;
use crate::profile::ModelProfile;

/// Largest cartesian product the oracle will walk.
pub const GRID_LIMIT: u128 = 10_000_000;

/// Exact optimum by enumeration.
///
/// Vertical mode keeps one instance per stage and tries every (batch, cores).
/// Horizontal mode fixes one core and tries every (batch, instances) with
/// instances up to the most any single batch size would need.
pub fn brute_force_optimize(
    spec: &PipelineSpec,
    lambda: f64,
    mode: ScalingMode,
) -> Result<PipelinePlan, OptimizerError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(OptimizerError::InvalidRate(lambda));
    }
    let grids: Vec<Vec<StagePlan>> = spec
        .stages
        .iter()
        .map(|p| match mode {
            ScalingMode::Vertical => vertical_grid(p),
            ScalingMode::Horizontal => horizontal_grid(p, lambda),
        })
        .collect();
    let size = grids
        .iter()
        .try_fold(1u128, |acc, g| acc.checked_mul(g.len() as u128))
        .unwrap_or(u128::MAX);
    if size > GRID_LIMIT {
        return Err(OptimizerError::GridTooLarge {
            size,
            limit: GRID_LIMIT,
        });
    }

    let mut best: Option<(u64, u64, u64, Vec<StagePlan>)> = None;
    let mut digits = vec![0usize; grids.len()];
    loop {
        let combo: Vec<StagePlan> = digits.iter().zip(&grids).map(|(&d, g)| g[d]).collect();
        if let Some(key) = evaluate(spec, &combo, lambda) {
            let better = best
                .as_ref()
                .is_none_or(|(c, b, t, _)| key < (*c, *b, *t));
            if better {
                best = Some((key.0, key.1, key.2, combo));
            }
        }
        // Advance the odometer.
        let mut pos = 0;
        loop {
            if pos == digits.len() {
                let (_, _, _, stages) = best.ok_or(OptimizerError::Infeasible)?;
                let kind = match mode {
                    ScalingMode::Vertical => PlanKind::Vertical,
                    ScalingMode::Horizontal => PlanKind::Horizontal,
                };
                let total_cores = stages.iter().map(|s| s.total_cores()).sum();
                let predicted = predicted_e2e_ms(spec, &stages, lambda);
                return Ok(PipelinePlan {
                    kind,
                    lambda,
                    stages,
                    hybrid: None,
                    total_cores,
                    predicted_e2e_ms: predicted,
                });
            }
            digits[pos] += 1;
            if digits[pos] < grids[pos].len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}

fn vertical_grid(profile: &ModelProfile) -> Vec<StagePlan> {
    let mut grid = Vec::new();
    for batch in 1..=profile.b_max {
        for cores in 1..=profile.c_max {
            grid.push(StagePlan::new(batch, cores, 1));
        }
    }
    grid
}

fn horizontal_grid(profile: &ModelProfile, lambda: f64) -> Vec<StagePlan> {
    // Count up from one instance until the weakest batch size is covered.
    let weakest = (1..=profile.b_max)
        .map(|b| profile.throughput_unchecked(b, 1))
        .fold(f64::INFINITY, f64::min);
    let mut cap = 1u32;
    while !covers(f64::from(cap) * weakest, lambda) {
        cap += 1;
    }
    let mut grid = Vec::new();
    for batch in 1..=profile.b_max {
        for instances in 1..=cap {
            grid.push(StagePlan::new(batch, 1, instances));
        }
    }
    grid
}

/// (cost, batch sum, budget) of a feasible combination.
fn evaluate(spec: &PipelineSpec, combo: &[StagePlan], lambda: f64) -> Option<(u64, u64, u64)> {
    let mut cost = 0u64;
    let mut batches = 0u64;
    let mut budget = 0u64;
    for (plan, profile) in combo.iter().zip(&spec.stages) {
        if !covers(plan.capacity(profile), lambda) {
            return None;
        }
        budget += u64::from(stage_budget_ms(profile, plan.batch, plan.cores, lambda));
        cost += plan.total_cores();
        batches += u64::from(plan.batch);
    }
    (budget <= u64::from(spec.slo_ms)).then_some((cost, batches, budget))
}
