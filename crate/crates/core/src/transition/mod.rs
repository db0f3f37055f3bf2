//! Mode switching between vertical and horizontal scaling.
//!
//! The controller runs once per control period. It absorbs load increases by
//! resizing running instances in place, falls back to spawning instances when
//! in-place growth cannot carry the rate, and hands over to one-core instances
//! once the current and predicted rates call for the same horizontal plan.

pub mod amdahl;

use serde::{Deserialize, Serialize};

use crate::optimizer::{
    covers, instances_needed, solve_horizontal, solve_hybrid_with_instances,
    solve_vertical_with_instances, stage_budget_ms, OptimizerError, StagePlan,
};
use crate::pipeline::PipelineSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// One-core instances sized by the horizontal solver.
    HorizontalSteady,
    /// Running instances resized in place to absorb a rate increase.
    VerticalBurst,
    /// Instances maxed out while extra instances boot.
    HybridSpawning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingSpawn {
    pub stage: usize,
    pub count: u32,
    pub cores: u32,
    pub ready_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerState {
    pub mode: Mode,
    pub pending_spawns: Vec<PendingSpawn>,
}

impl Default for ControllerState {
    fn default() -> Self {
        Self {
            mode: Mode::HorizontalSteady,
            pending_spawns: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    /// Resize every instance of the stage, booting ones included.
    SetCores { stage: usize, cores: u32 },
    SetBatch { stage: usize, batch: u32 },
    SpawnInstances { stage: usize, count: u32, cores: u32 },
    RetireInstances { stage: usize, count: u32 },
}

impl ActionKind {
    pub fn stage(&self) -> usize {
        match *self {
            ActionKind::SetCores { stage, .. }
            | ActionKind::SetBatch { stage, .. }
            | ActionKind::SpawnInstances { stage, .. }
            | ActionKind::RetireInstances { stage, .. } => stage,
        }
    }
}

/// When the adapter may apply an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Trigger {
    Immediate,
    /// Held back until every instance spawned in the same decision is ready.
    AfterSpawnsReady,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScalingAction {
    pub kind: ActionKind,
    pub trigger: Trigger,
}

impl ScalingAction {
    pub fn now(kind: ActionKind) -> Self {
        Self {
            kind,
            trigger: Trigger::Immediate,
        }
    }

    pub fn after_spawns(kind: ActionKind) -> Self {
        Self {
            kind,
            trigger: Trigger::AfterSpawnsReady,
        }
    }
}

/// Applies actions to a uniform per-stage view of a deployment.
///
/// Spawned instances are counted right away; their cores are assumed to match
/// the stage.
pub fn apply_actions(config: &[StagePlan], actions: &[ScalingAction]) -> Vec<StagePlan> {
    let mut next = config.to_vec();
    for action in actions {
        match action.kind {
            ActionKind::SetCores { stage, cores } => next[stage].cores = cores,
            ActionKind::SetBatch { stage, batch } => next[stage].batch = batch,
            ActionKind::SpawnInstances { stage, count, .. } => next[stage].instances += count,
            ActionKind::RetireInstances { stage, count } => {
                next[stage].instances = next[stage].instances.saturating_sub(count).max(1)
            }
        }
    }
    next
}

/// Whether `config` carries `lambda` at every stage within the latency budget.
pub fn config_serves(spec: &PipelineSpec, config: &[StagePlan], lambda: f64) -> bool {
    if config.len() != spec.len() {
        return false;
    }
    let mut budget = 0u64;
    for (plan, profile) in config.iter().zip(&spec.stages) {
        if plan.batch == 0
            || plan.batch > profile.b_max
            || plan.cores == 0
            || plan.cores > profile.c_max
            || plan.instances == 0
        {
            return false;
        }
        if !covers(plan.capacity(profile), lambda) {
            return false;
        }
        budget += u64::from(stage_budget_ms(profile, plan.batch, plan.cores, lambda));
    }
    budget <= u64::from(spec.slo_ms)
}

/// True when the horizontal plans for the current and the predicted rate pick
/// the same batch and instance count at every stage.
pub fn is_stable(spec: &PipelineSpec, lambda_now: f64, lambda_pred: f64) -> bool {
    let (Ok(now), Ok(pred)) = (
        solve_horizontal(spec, lambda_now),
        solve_horizontal(spec, lambda_pred),
    ) else {
        return false;
    };
    now.stages
        .iter()
        .zip(&pred.stages)
        .all(|(a, b)| a.batch == b.batch && a.instances == b.instances)
}

/// Ordered handover from the current deployment to a one-core target.
///
/// Missing one-core instances are spawned first; only once they are ready are
/// the pre-existing instances shrunk to one core, re-batched, and any surplus
/// retired.
pub fn plan_v2h_transition(current: &[StagePlan], target: &[StagePlan]) -> Vec<ScalingAction> {
    debug_assert!(target.iter().all(|t| t.cores == 1));
    let mut spawns = Vec::new();
    let mut after = Vec::new();
    for (stage, (cur, tgt)) in current.iter().zip(target).enumerate() {
        if cur == tgt {
            continue;
        }
        if tgt.instances > cur.instances {
            spawns.push(ScalingAction::now(ActionKind::SpawnInstances {
                stage,
                count: tgt.instances - cur.instances,
                cores: tgt.cores,
            }));
        }
        if cur.cores != tgt.cores {
            after.push(ScalingAction::after_spawns(ActionKind::SetCores {
                stage,
                cores: tgt.cores,
            }));
        }
        if cur.batch != tgt.batch {
            after.push(ScalingAction::after_spawns(ActionKind::SetBatch {
                stage,
                batch: tgt.batch,
            }));
        }
        if tgt.instances < cur.instances {
            after.push(ScalingAction::after_spawns(ActionKind::RetireInstances {
                stage,
                count: cur.instances - tgt.instances,
            }));
        }
    }
    spawns.extend(after);
    spawns
}

/// In-place scale-up: every instance of a stage moves to the same core count
/// together with its new batch size.
pub fn plan_h2v_scaleup(current: &[StagePlan], vertical: &[StagePlan]) -> Vec<ScalingAction> {
    let mut actions = Vec::new();
    for (stage, (cur, tgt)) in current.iter().zip(vertical).enumerate() {
        if tgt.cores != cur.cores {
            actions.push(ScalingAction::now(ActionKind::SetCores {
                stage,
                cores: tgt.cores,
            }));
        }
        if tgt.batch != cur.batch {
            actions.push(ScalingAction::now(ActionKind::SetBatch {
                stage,
                batch: tgt.batch,
            }));
        }
    }
    actions
}

/// Fixed timing the controller needs to book spawns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerTiming {
    pub cold_start_ms: u64,
}

impl Default for ControllerTiming {
    fn default() -> Self {
        Self {
            cold_start_ms: 5500,
        }
    }
}

/// Inputs of one control tick.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub now_ms: u64,
    pub lambda_now: f64,
    pub lambda_pred: f64,
    /// Extra rate needed to clear queued work within one control period.
    /// Only in-place scaling chases it; spawns arrive too late to help.
    pub backlog_rps: f64,
    /// Committed per-stage configuration, booting instances included.
    pub current: &'a [StagePlan],
}

/// One control decision. Pure: equal inputs give equal outputs.
pub fn step(
    state: &ControllerState,
    spec: &PipelineSpec,
    timing: ControllerTiming,
    obs: Observation<'_>,
) -> (ControllerState, Vec<ScalingAction>) {
    let mut next = state.clone();
    next.pending_spawns.retain(|p| p.ready_at_ms > obs.now_ms);
    if next.mode == Mode::HybridSpawning && next.pending_spawns.is_empty() {
        next.mode = Mode::VerticalBurst;
    }

    let current = obs.current;
    let target = obs.lambda_now.max(obs.lambda_pred).max(1.0);
    let lambda_now = obs.lambda_now.max(1.0);
    let lambda_pred = obs.lambda_pred.max(1.0);
    // Booting instances carry nothing yet, so shortfalls are judged on the
    // ready ones.
    let ready: Vec<StagePlan> = current
        .iter()
        .enumerate()
        .map(|(stage, c)| {
            let booting: u32 = next
                .pending_spawns
                .iter()
                .filter(|p| p.stage == stage)
                .map(|p| p.count)
                .sum();
            StagePlan::new(c.batch, c.cores, c.instances.saturating_sub(booting).max(1))
        })
        .collect();
    let counts: Vec<u32> = ready.iter().map(|s| s.instances).collect();
    let demand = target + obs.backlog_rps.max(0.0);

    if !config_serves(spec, &ready, demand) {
        match solve_vertical_with_instances(spec, demand, &counts) {
            Ok(plan) => {
                // Never shrink cores on a shortfall; a larger core count only
                // lowers latency and raises throughput at the chosen batch.
                let scaled: Vec<StagePlan> = plan
                    .stages
                    .iter()
                    .zip(current)
                    .map(|(p, c)| StagePlan::new(p.batch, p.cores.max(c.cores), c.instances))
                    .collect();
                next.mode = if next.pending_spawns.is_empty() {
                    Mode::VerticalBurst
                } else {
                    Mode::HybridSpawning
                };
                return (next, plan_h2v_scaleup(current, &scaled));
            }
            Err(OptimizerError::Infeasible) => {}
            Err(_) => return (next, Vec::new()),
        }
        let actions = hybrid_actions(spec, target, current, &counts);
        let mut spawned = false;
        for action in &actions {
            if let ActionKind::SpawnInstances {
                stage,
                count,
                cores,
            } = action.kind
            {
                spawned = true;
                next.pending_spawns.push(PendingSpawn {
                    stage,
                    count,
                    cores,
                    ready_at_ms: obs.now_ms + timing.cold_start_ms,
                });
            }
        }
        next.mode = if spawned || !next.pending_spawns.is_empty() {
            Mode::HybridSpawning
        } else {
            Mode::VerticalBurst
        };
        return (next, actions);
    }

    if !next.pending_spawns.is_empty() || !is_stable(spec, lambda_now, lambda_pred) {
        return (next, Vec::new());
    }
    let Ok(horizontal) = solve_horizontal(spec, target) else {
        return (next, Vec::new());
    };
    let current_cost: u64 = current.iter().map(StagePlan::total_cores).sum();
    let worth_it = next.mode != Mode::HorizontalSteady || horizontal.total_cores < current_cost;
    if !worth_it || horizontal.stages.as_slice() == current {
        next.mode = Mode::HorizontalSteady;
        return (next, Vec::new());
    }
    let actions = plan_v2h_transition(current, &horizontal.stages);
    for action in &actions {
        if let ActionKind::SpawnInstances {
            stage,
            count,
            cores,
        } = action.kind
        {
            next.pending_spawns.push(PendingSpawn {
                stage,
                count,
                cores,
                ready_at_ms: obs.now_ms + timing.cold_start_ms,
            });
        }
    }
    next.mode = Mode::HorizontalSteady;
    (next, actions)
}

/// Max out running instances and spawn equally sized ones for the rest.
fn hybrid_actions(
    spec: &PipelineSpec,
    lambda: f64,
    current: &[StagePlan],
    counts: &[u32],
) -> Vec<ScalingAction> {
    let batches: Vec<u32> = match solve_hybrid_with_instances(spec, lambda, counts) {
        Ok(plan) => plan.stages.iter().map(|s| s.batch).collect(),
        // Latency objective unreachable at any rate: only raise cores.
        Err(_) => current.iter().map(|s| s.batch).collect(),
    };
    let mut actions = Vec::new();
    for (stage, ((cur, profile), &batch)) in current.iter().zip(&spec.stages).zip(&batches).enumerate() {
        let cores = profile.c_max;
        if cur.cores != cores {
            actions.push(ScalingAction::now(ActionKind::SetCores { stage, cores }));
        }
        if cur.batch != batch {
            actions.push(ScalingAction::now(ActionKind::SetBatch { stage, batch }));
        }
        let per_instance = profile.throughput_unchecked(batch, cores);
        let carried = f64::from(cur.instances) * per_instance;
        if !covers(carried, lambda) {
            actions.push(ScalingAction::now(ActionKind::SpawnInstances {
                stage,
                count: instances_needed(per_instance, lambda - carried),
                cores,
            }));
        }
    }
    actions
}

/// Stateful wrapper around [`step`].
#[derive(Debug, Clone)]
pub struct TransitionController {
    state: ControllerState,
    timing: ControllerTiming,
}

impl TransitionController {
    pub fn new(timing: ControllerTiming) -> Self {
        Self {
            state: ControllerState::default(),
            timing,
        }
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn mode(&self) -> Mode {
        self.state.mode
    }

    pub fn step(&mut self, spec: &PipelineSpec, obs: Observation<'_>) -> Vec<ScalingAction> {
        let (state, actions) = step(&self.state, spec, self.timing, obs);
        self.state = state;
        actions
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::solve_vertical_with_instances;
    use crate::profile::ModelProfile;

    fn example_spec(slo: u32) -> PipelineSpec {
        let p = ModelProfile::new("example", 10.0, 40.0, 2.0, 5.0, 16, 16).unwrap();
        PipelineSpec::new("single", slo, vec![p]).unwrap()
    }

    fn obs(now_ms: u64, lambda_now: f64, lambda_pred: f64, current: &[StagePlan]) -> Observation<'_> {
        Observation {
            now_ms,
            lambda_now,
            lambda_pred,
            backlog_rps: 0.0,
            current,
        }
    }

    #[test]
    fn steady_load_within_capacity_is_left_alone() {
        let spec = example_spec(200);
        // (1, 1, 1) serves 17.5 rps.
        let current = [StagePlan::new(1, 1, 1)];
        let (state, actions) = step(
            &ControllerState::default(),
            &spec,
            ControllerTiming::default(),
            obs(1000, 10.0, 10.0, &current),
        );
        assert!(actions.is_empty());
        assert_eq!(state.mode, Mode::HorizontalSteady);
    }

    #[test]
    fn surge_within_vertical_reach_resizes_in_place() {
        let spec = example_spec(1000);
        let current = [StagePlan::new(1, 1, 1)];
        let (state, actions) = step(
            &ControllerState::default(),
            &spec,
            ControllerTiming::default(),
            obs(1000, 120.0, 120.0, &current),
        );
        assert_eq!(state.mode, Mode::VerticalBurst);
        assert!(!actions.is_empty());
        assert!(actions.iter().all(|a| !matches!(
            a.kind,
            ActionKind::SpawnInstances { .. } | ActionKind::RetireInstances { .. }
        )));
        let after = apply_actions(&current, &actions);
        assert!(config_serves(&spec, &after, 120.0));
    }

    #[test]
    fn surge_beyond_vertical_reach_spawns() {
        let spec = example_spec(1000);
        let current = [StagePlan::new(1, 1, 1)];
        // One instance tops out near 323 rps.
        assert!(solve_vertical_with_instances(&spec, 500.0, &[1]).is_err());
        let (state, actions) = step(
            &ControllerState::default(),
            &spec,
            ControllerTiming::default(),
            obs(2000, 500.0, 500.0, &current),
        );
        assert_eq!(state.mode, Mode::HybridSpawning);
        assert!(actions
            .iter()
            .any(|a| a.kind == ActionKind::SetCores { stage: 0, cores: 16 }));
        assert!(actions
            .iter()
            .any(|a| matches!(a.kind, ActionKind::SpawnInstances { .. })));
        assert_eq!(state.pending_spawns.len(), 1);
        assert_eq!(state.pending_spawns[0].ready_at_ms, 2000 + 5500);
        assert!(config_serves(&spec, &apply_actions(&current, &actions), 500.0));
    }

    #[test]
    fn spawns_are_not_duplicated_while_booting() {
        let spec = example_spec(1000);
        let current = [StagePlan::new(1, 1, 1)];
        let timing = ControllerTiming::default();
        let (state, actions) = step(
            &ControllerState::default(),
            &spec,
            timing,
            obs(1000, 500.0, 500.0, &current),
        );
        let committed = apply_actions(&current, &actions);
        let (state2, again) = step(&state, &spec, timing, obs(2000, 500.0, 500.0, &committed));
        assert!(again.is_empty());
        assert_eq!(state2.mode, Mode::HybridSpawning);
        // Once ready the mode relaxes to a vertically scaled state until the
        // current and predicted rates agree.
        let (state3, _) = step(&state2, &spec, timing, obs(7000, 300.0, 500.0, &committed));
        assert_eq!(state3.mode, Mode::VerticalBurst);
        assert!(state3.pending_spawns.is_empty());
    }

    #[test]
    fn stable_burst_hands_over_to_one_core_instances() {
        let spec = example_spec(1000);
        let timing = ControllerTiming::default();
        let state = ControllerState {
            mode: Mode::VerticalBurst,
            pending_spawns: vec![],
        };
        let vertical = solve_vertical_with_instances(&spec, 120.0, &[1]).unwrap();
        let (next, actions) = step(&state, &spec, timing, obs(40_000, 120.0, 120.0, &vertical.stages));
        assert_eq!(next.mode, Mode::HorizontalSteady);
        let target = solve_horizontal(&spec, 120.0).unwrap();
        assert_eq!(actions, plan_v2h_transition(&vertical.stages, &target.stages));
    }

    #[test]
    fn v2h_example_two_three_core_to_four_one_core() {
        let current = [StagePlan::new(4, 3, 2)];
        let target = [StagePlan::new(4, 1, 4)];
        let actions = plan_v2h_transition(&current, &target);
        assert_eq!(
            actions,
            vec![
                ScalingAction::now(ActionKind::SpawnInstances {
                    stage: 0,
                    count: 2,
                    cores: 1
                }),
                ScalingAction::after_spawns(ActionKind::SetCores { stage: 0, cores: 1 }),
            ]
        );
    }

    #[test]
    fn v2h_noop_and_retire() {
        let same = [StagePlan::new(2, 1, 3)];
        assert!(plan_v2h_transition(&same, &same).is_empty());

        let current = [StagePlan::new(2, 4, 5)];
        let target = [StagePlan::new(2, 1, 3)];
        let actions = plan_v2h_transition(&current, &target);
        assert_eq!(
            actions,
            vec![
                ScalingAction::after_spawns(ActionKind::SetCores { stage: 0, cores: 1 }),
                ScalingAction::after_spawns(ActionKind::RetireInstances { stage: 0, count: 2 }),
            ]
        );
    }

    #[test]
    fn h2v_scales_every_instance_uniformly() {
        let current = [StagePlan::new(1, 1, 2)];
        let plan = [StagePlan::new(2, 3, 2)];
        let actions = plan_h2v_scaleup(&current, &plan);
        assert_eq!(
            actions,
            vec![
                ScalingAction::now(ActionKind::SetCores { stage: 0, cores: 3 }),
                ScalingAction::now(ActionKind::SetBatch { stage: 0, batch: 2 }),
            ]
        );
        assert!(plan_h2v_scaleup(&plan, &plan).is_empty());

        // Four instances at two cores each: eight cores, not five on one.
        let four = [StagePlan::new(1, 1, 4)];
        let after = apply_actions(&four, &plan_h2v_scaleup(&four, &[StagePlan::new(1, 2, 4)]));
        assert_eq!(after[0], StagePlan::new(1, 2, 4));
        assert_eq!(after[0].total_cores(), 8);
    }

    #[test]
    fn booting_instances_do_not_count_as_capacity() {
        let spec = example_spec(1000);
        // Three one-core instances at b = 5 carry about 143 rps, but two of
        // them are still booting.
        let current = [StagePlan::new(5, 1, 3)];
        assert!(config_serves(&spec, &current, 140.0));
        let state = ControllerState {
            mode: Mode::HorizontalSteady,
            pending_spawns: vec![PendingSpawn {
                stage: 0,
                count: 2,
                cores: 1,
                ready_at_ms: 27_500,
            }],
        };
        let (next, actions) = step(&state, &spec, ControllerTiming::default(), obs(24_000, 140.0, 140.0, &current));
        assert_eq!(next.mode, Mode::HybridSpawning);
        assert!(actions
            .iter()
            .any(|a| matches!(a.kind, ActionKind::SetCores { cores, .. } if cores > 1)));
        let after = apply_actions(&current, &actions);
        assert!(config_serves(&spec, &[StagePlan::new(after[0].batch, after[0].cores, 1)], 140.0));
    }

    #[test]
    fn backlog_adds_in_place_capacity_only() {
        let spec = example_spec(1000);
        let current = [StagePlan::new(1, 1, 1)];
        let mut o = obs(1000, 10.0, 10.0, &current);
        o.backlog_rps = 60.0;
        let (next, actions) = step(&ControllerState::default(), &spec, ControllerTiming::default(), o);
        assert_eq!(next.mode, Mode::VerticalBurst);
        assert!(next.pending_spawns.is_empty());
        let after = apply_actions(&current, &actions);
        assert!(config_serves(&spec, &after, 70.0));
    }

    #[test]
    fn stability_examples() {
        let spec = example_spec(1000);
        assert!(is_stable(&spec, 37.0, 37.0));
        assert!(!is_stable(&spec, 10.0, 120.0));
    }

    #[test]
    fn step_is_deterministic() {
        let spec = example_spec(1000);
        let current = [StagePlan::new(1, 1, 1)];
        let a = step(&ControllerState::default(), &spec, ControllerTiming::default(), obs(1000, 500.0, 520.0, &current));
        let b = step(&ControllerState::default(), &spec, ControllerTiming::default(), obs(1000, 500.0, 520.0, &current));
        assert_eq!(a, b);
    }
}
