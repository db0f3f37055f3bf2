use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::report::{percentile, Aggregates, BatchRecord, ControlRecord, SecondStats, SimReport, SimRun};
use super::{
    batch_dispatch_rule, flush_after_ms, should_drop, ConfigError, Policy, Queued, Request, RequestStatus,
    Scenario, StageTimes,
};
use crate::optimizer::{solve_horizontal, solve_hybrid, solve_vertical, OptimizerError, StagePlan};
use crate::pipeline::PipelineSpec;
use crate::predictor::{LoadPredictor, WindowedMaxPredictor};
use crate::transition::{
    apply_actions, ActionKind, ControllerTiming, Mode, Observation, ScalingAction, Trigger, TransitionController,
};

#[derive(Debug, Clone, Copy)]
enum Event {
    Arrival { request: usize },
    BatchDone { stage: usize, instance: usize },
    Tick { index: u64 },
    CoresChange { stage: usize, instance: usize, cores: u32 },
    InstanceReady,
    Flush { stage: usize },
}

#[derive(Debug)]
struct Scheduled {
    time: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so the max-heap pops the earliest event first.
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug)]
struct Instance {
    cores: u32,
    ready_at: f64,
    batch: Vec<usize>,
    busy: bool,
    retiring: bool,
    retired: bool,
    alloc_since: f64,
    core_ms: f64,
}

impl Instance {
    fn live(&self) -> bool {
        !self.retired && !self.retiring
    }
}

#[derive(Debug)]
struct Stage {
    batch: u32,
    instances: Vec<Instance>,
    queue: VecDeque<Queued>,
    cursor: usize,
    flush_at: Option<f64>,
}

/// Actions waiting for a set of spawned instances to become ready.
#[derive(Debug)]
struct Deferred {
    waiting: Vec<(usize, usize)>,
    actions: Vec<ActionKind>,
}

enum Driver {
    Joint(TransitionController),
    Horizontal,
    Vertical,
    Static,
}

pub(super) struct Engine<'a> {
    scenario: &'a Scenario,
    spec: &'a PipelineSpec,
    end_ms: f64,
    heap: BinaryHeap<Scheduled>,
    seq: u64,
    now: f64,
    stages: Vec<Stage>,
    requests: Vec<Request>,
    batches: Vec<BatchRecord>,
    deferred: Vec<Deferred>,
    /// Per-stage view of what has been applied so far, booting instances included.
    committed: Vec<StagePlan>,
    driver: Driver,
    predictor: WindowedMaxPredictor,
    recent_rates: VecDeque<f64>,
    period_arrivals: u64,
    lambda_now: f64,
    control_log: Vec<ControlRecord>,
    live_cores: u64,
    cost_since: f64,
    second_core_ms: Vec<f64>,
}

impl<'a> Engine<'a> {
    pub(super) fn new(scenario: &'a Scenario) -> Result<Self, ConfigError> {
        let spec = &scenario.spec;
        let first = f64::from(scenario.trace.rps()[0]).max(1.0);
        let initial = initial_config(scenario, first)?;
        let driver = match scenario.policy {
            Policy::Joint => Driver::Joint(TransitionController::new(ControllerTiming {
                cold_start_ms: scenario.timing.cold_start_ms,
            })),
            Policy::HorizontalOnly => Driver::Horizontal,
            Policy::VerticalOnly => Driver::Vertical,
            Policy::Static(_) => Driver::Static,
        };
        let stages = initial
            .iter()
            .map(|p| Stage {
                batch: p.batch,
                instances: (0..p.instances)
                    .map(|_| Instance {
                        cores: p.cores,
                        ready_at: 0.0,
                        batch: Vec::new(),
                        busy: false,
                        retiring: false,
                        retired: false,
                        alloc_since: 0.0,
                        core_ms: 0.0,
                    })
                    .collect(),
                queue: VecDeque::new(),
                cursor: 0,
                flush_at: None,
            })
            .collect();
        let live_cores = initial.iter().map(StagePlan::total_cores).sum();
        Ok(Self {
            scenario,
            spec,
            end_ms: scenario.trace.duration_ms() as f64,
            heap: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            stages,
            requests: Vec::new(),
            batches: Vec::new(),
            deferred: Vec::new(),
            committed: initial,
            driver,
            predictor: WindowedMaxPredictor::new(scenario.predictor),
            recent_rates: VecDeque::new(),
            period_arrivals: 0,
            lambda_now: first,
            control_log: Vec::new(),
            live_cores,
            cost_since: 0.0,
            second_core_ms: vec![0.0; scenario.trace.len()],
        })
    }

    fn schedule(&mut self, time: f64, event: Event) {
        self.seq += 1;
        self.heap.push(Scheduled {
            time,
            seq: self.seq,
            event,
        });
    }

    fn generate_arrivals(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.scenario.seed);
        for (second, &rate) in self.scenario.trace.rps().iter().enumerate() {
            let count = if rate == 0 {
                0
            } else {
                Poisson::new(f64::from(rate))
                    .map(|d| d.sample(&mut rng) as u64)
                    .unwrap_or(0)
            };
            let start = second as f64 * 1000.0;
            let mut times: Vec<f64> = (0..count).map(|_| start + rng.random::<f64>() * 1000.0).collect();
            times.sort_by(f64::total_cmp);
            for t in times {
                let id = self.requests.len();
                self.requests.push(Request::new(id, t));
                self.schedule(t, Event::Arrival { request: id });
            }
        }
    }

    pub(super) fn run(mut self) -> Result<SimRun, ConfigError> {
        self.generate_arrivals();
        let period = self.scenario.timing.control_period_ms as f64;
        if period < self.end_ms {
            self.schedule(period, Event::Tick { index: 1 });
        }
        let horizon = self.end_ms + self.scenario.timing.drain_ms as f64;
        while let Some(next) = self.heap.pop() {
            if next.time > horizon {
                break;
            }
            self.now = next.time;
            match next.event {
                Event::Arrival { request } => self.on_arrival(request),
                Event::BatchDone { stage, instance } => self.on_batch_done(stage, instance),
                Event::Tick { index } => self.on_tick(index),
                Event::CoresChange {
                    stage,
                    instance,
                    cores,
                } => self.on_cores_change(stage, instance, cores),
                Event::InstanceReady => self.on_instance_ready(),
                Event::Flush { stage } => {
                    if self.stages[stage].flush_at == Some(self.now) {
                        self.stages[stage].flush_at = None;
                    }
                    self.try_dispatch(stage);
                }
            }
        }
        Ok(self.finish())
    }

    fn on_arrival(&mut self, request: usize) {
        self.period_arrivals += 1;
        self.enqueue(0, request);
        self.try_dispatch(0);
    }

    fn enqueue(&mut self, stage: usize, request: usize) {
        self.requests[request].stages.push(StageTimes {
            enqueue_ms: self.now,
            dequeue_ms: None,
            finish_ms: None,
        });
        self.stages[stage].queue.push_back(Queued {
            request,
            enqueue_ms: self.now,
        });
    }

    fn drop_request(&mut self, request: usize) {
        let r = &mut self.requests[request];
        r.status = RequestStatus::Dropped;
        r.done_ms = Some(self.now);
    }

    fn expired(&self, request: usize) -> bool {
        should_drop(
            &self.requests[request],
            self.now,
            self.scenario.drop_policy,
            self.spec.slo_ms,
        )
    }

    fn free_instance(&mut self, stage: usize) -> Option<usize> {
        let now = self.now;
        let st = &self.stages[stage];
        let n = st.instances.len();
        let found = (0..n)
            .map(|k| (st.cursor + k) % n)
            .find(|&i| {
                let inst = &st.instances[i];
                inst.live() && !inst.busy && inst.ready_at <= now
            })?;
        self.stages[stage].cursor = (found + 1) % n;
        Some(found)
    }

    fn try_dispatch(&mut self, stage: usize) {
        loop {
            while let Some(head) = self.stages[stage].queue.front().copied() {
                if !self.expired(head.request) {
                    break;
                }
                self.stages[stage].queue.pop_front();
                self.drop_request(head.request);
            }
            let Some(head) = self.stages[stage].queue.front().copied() else {
                return;
            };
            let batch = self.stages[stage].batch;
            let wait = flush_after_ms(batch, self.lambda_now, self.scenario.timing.flush_slack_ms);
            let Some(take) = batch_dispatch_rule(&self.stages[stage].queue, batch, self.now, wait) else {
                let due = head.enqueue_ms + wait;
                if self.stages[stage].flush_at != Some(due) {
                    self.stages[stage].flush_at = Some(due);
                    self.schedule(due, Event::Flush { stage });
                }
                return;
            };
            let Some(instance) = self.free_instance(stage) else {
                return;
            };
            let mut members = Vec::with_capacity(take);
            for _ in 0..take {
                let q = self.stages[stage].queue.pop_front().expect("rule bounded by queue length");
                if self.expired(q.request) {
                    self.drop_request(q.request);
                } else {
                    members.push(q.request);
                }
            }
            if members.is_empty() {
                // The instance is still free; try again with the rest.
                continue;
            }
            self.start_batch(stage, instance, members);
        }
    }

    fn start_batch(&mut self, stage: usize, instance: usize, members: Vec<usize>) {
        let now = self.now;
        let cores = self.stages[stage].instances[instance].cores;
        let latency = self.spec.stages[stage].latency_unchecked(members.len() as u32, cores);
        for &r in &members {
            if let Some(times) = self.requests[r].stages.last_mut() {
                times.dequeue_ms = Some(now);
            }
        }
        let inst = &mut self.stages[stage].instances[instance];
        self.batches.push(BatchRecord {
            stage,
            instance,
            start_ms: now,
            end_ms: now + latency,
            size: members.len(),
            cores,
            instance_ready_ms: inst.ready_at,
        });
        inst.busy = true;
        inst.batch = members;
        self.schedule(now + latency, Event::BatchDone { stage, instance });
    }

    fn on_batch_done(&mut self, stage: usize, instance: usize) {
        let now = self.now;
        let members = std::mem::take(&mut self.stages[stage].instances[instance].batch);
        self.stages[stage].instances[instance].busy = false;
        let last = stage + 1 == self.stages.len();
        for &r in &members {
            if let Some(times) = self.requests[r].stages.last_mut() {
                times.finish_ms = Some(now);
            }
            if last {
                let req = &mut self.requests[r];
                req.status = RequestStatus::Served;
                req.done_ms = Some(now);
            } else {
                self.enqueue(stage + 1, r);
            }
        }
        if self.stages[stage].instances[instance].retiring {
            self.retire_now(stage, instance);
        }
        if !last {
            self.try_dispatch(stage + 1);
        }
        self.try_dispatch(stage);
    }

    fn on_tick(&mut self, index: u64) {
        let timing = self.scenario.timing;
        let period = timing.control_period_ms;
        let rate = self.period_arrivals as f64 * 1000.0 / period as f64;
        self.period_arrivals = 0;
        self.recent_rates.push_back(rate);
        while self.recent_rates.len() > self.scenario.rate_window {
            self.recent_rates.pop_front();
        }
        self.lambda_now = self.recent_rates.iter().copied().fold(0.0, f64::max);
        // Ticks are strictly increasing, so the observation is always accepted.
        let _ = self.predictor.observe(index - 1, rate.round() as u64);
        let lambda_pred = self
            .predictor
            .predict_max(self.scenario.predictor.horizon_s)
            .unwrap_or(self.lambda_now);

        let now_ms = index * period;
        let lambda_now = self.lambda_now;
        let (actions, mode) = self.decide(now_ms, lambda_now, lambda_pred);
        self.apply(&actions);
        self.control_log.push(ControlRecord {
            time_ms: now_ms,
            lambda_now,
            lambda_pred,
            mode,
            actions,
            config: self.committed.clone(),
        });

        let next = (index + 1) * period;
        if (next as f64) < self.end_ms {
            self.schedule(next as f64, Event::Tick { index: index + 1 });
        }
    }

    fn decide(&mut self, now_ms: u64, lambda_now: f64, lambda_pred: f64) -> (Vec<ScalingAction>, Option<Mode>) {
        let spec = self.spec;
        let backlog_rps = self.backlog_rps();
        match &mut self.driver {
            Driver::Static => (Vec::new(), None),
            Driver::Joint(controller) => {
                let actions = controller.step(
                    spec,
                    Observation {
                        now_ms,
                        lambda_now,
                        lambda_pred,
                        backlog_rps,
                        current: &self.committed,
                    },
                );
                (actions, Some(controller.mode()))
            }
            Driver::Horizontal => match solve_horizontal(spec, lambda_now.max(1.0)) {
                Ok(plan) => (horizontal_diff(&self.committed, &plan.stages), None),
                Err(_) => (Vec::new(), None),
            },
            Driver::Vertical => match vertical_target(spec, lambda_now.max(1.0) + backlog_rps) {
                Ok(target) => (vertical_diff(&self.committed, &target), None),
                Err(_) => (Vec::new(), None),
            },
        }
    }

    /// Queued requests beyond one batch per ready instance, spread over one
    /// control period.
    fn backlog_rps(&self) -> f64 {
        let excess: usize = self
            .stages
            .iter()
            .map(|stage| {
                let ready = stage
                    .instances
                    .iter()
                    .filter(|i| i.live() && i.ready_at <= self.now)
                    .count();
                stage.queue.len().saturating_sub(stage.batch as usize * ready)
            })
            .sum();
        excess as f64 * 1000.0 / self.scenario.timing.control_period_ms as f64
    }

    fn apply(&mut self, actions: &[ScalingAction]) {
        let mut spawned = Vec::new();
        for action in actions.iter().filter(|a| a.trigger == Trigger::Immediate) {
            match action.kind {
                ActionKind::SetCores { stage, .. } | ActionKind::SetBatch { stage, .. } => {
                    self.supersede(stage);
                }
                _ => {}
            }
            spawned.extend(self.execute(action.kind));
        }
        let later: Vec<ActionKind> = actions
            .iter()
            .filter(|a| a.trigger == Trigger::AfterSpawnsReady)
            .map(|a| a.kind)
            .collect();
        if later.is_empty() {
            return;
        }
        self.deferred.push(Deferred {
            waiting: spawned,
            actions: later,
        });
        self.release_deferred();
    }

    /// An in-place resize abandons any handover still pending for `stage`;
    /// the controller plans a fresh one once the load settles.
    fn supersede(&mut self, stage: usize) {
        for group in &mut self.deferred {
            group.actions.retain(|held| held.stage() != stage);
        }
    }

    fn release_deferred(&mut self) {
        let now = self.now;
        let mut i = 0;
        while i < self.deferred.len() {
            let ready = self.deferred[i].waiting.iter().all(|&(s, k)| {
                let inst = &self.stages[s].instances[k];
                inst.retired || inst.ready_at <= now
            });
            if ready {
                let group = self.deferred.remove(i);
                for kind in group.actions {
                    self.execute(kind);
                }
            } else {
                i += 1;
            }
        }
    }

    /// Carries out one action and returns the instances it spawned.
    fn execute(&mut self, kind: ActionKind) -> Vec<(usize, usize)> {
        let now = self.now;
        self.committed = apply_actions(&self.committed, &[ScalingAction::now(kind)]);
        let mut spawned = Vec::new();
        match kind {
            ActionKind::SetCores { stage, cores } => {
                let when = now + self.scenario.timing.inplace_delay_ms as f64;
                let targets: Vec<usize> = self.stages[stage]
                    .instances
                    .iter()
                    .enumerate()
                    .filter(|(_, inst)| inst.live())
                    .map(|(k, _)| k)
                    .collect();
                for instance in targets {
                    self.schedule(
                        when,
                        Event::CoresChange {
                            stage,
                            instance,
                            cores,
                        },
                    );
                }
            }
            ActionKind::SetBatch { stage, batch } => {
                self.stages[stage].batch = batch;
                self.try_dispatch(stage);
            }
            ActionKind::SpawnInstances { stage, count, cores } => {
                let ready_at = now + self.scenario.timing.cold_start_ms as f64;
                self.charge(now);
                for _ in 0..count {
                    self.stages[stage].instances.push(Instance {
                        cores,
                        ready_at,
                        batch: Vec::new(),
                        busy: false,
                        retiring: false,
                        retired: false,
                        alloc_since: now,
                        core_ms: 0.0,
                    });
                    self.live_cores += u64::from(cores);
                    spawned.push((stage, self.stages[stage].instances.len() - 1));
                }
                if count > 0 {
                    self.schedule(ready_at, Event::InstanceReady);
                }
            }
            ActionKind::RetireInstances { stage, count } => self.retire(stage, count),
        }
        spawned
    }

    /// Retires booting instances first, then idle ones, then busy ones once
    /// their batch completes. Newest first within each group; one instance
    /// always remains.
    fn retire(&mut self, stage: usize, count: u32) {
        let now = self.now;
        let insts = &self.stages[stage].instances;
        let live = insts.iter().filter(|i| i.live()).count();
        let quota = (count as usize).min(live.saturating_sub(1));
        let mut order: Vec<(u8, usize)> = insts
            .iter()
            .enumerate()
            .filter(|(_, i)| i.live())
            .map(|(k, i)| {
                let rank = if i.ready_at > now {
                    0
                } else if !i.busy {
                    1
                } else {
                    2
                };
                (rank, k)
            })
            .collect();
        order.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        for &(_, k) in order.iter().take(quota) {
            if self.stages[stage].instances[k].busy {
                self.stages[stage].instances[k].retiring = true;
            } else {
                self.retire_now(stage, k);
            }
        }
    }

    fn retire_now(&mut self, stage: usize, instance: usize) {
        let now = self.now;
        self.charge(now);
        let end = self.end_ms;
        let inst = &mut self.stages[stage].instances[instance];
        close_segment(inst, now, end);
        inst.retired = true;
        inst.retiring = false;
        self.live_cores -= u64::from(inst.cores);
    }

    fn on_cores_change(&mut self, stage: usize, instance: usize, cores: u32) {
        let now = self.now;
        if self.stages[stage].instances[instance].retired {
            return;
        }
        self.charge(now);
        let end = self.end_ms;
        let inst = &mut self.stages[stage].instances[instance];
        close_segment(inst, now, end);
        self.live_cores = self.live_cores - u64::from(inst.cores) + u64::from(cores);
        inst.cores = cores;
    }

    fn on_instance_ready(&mut self) {
        self.release_deferred();
        for stage in 0..self.stages.len() {
            self.try_dispatch(stage);
        }
    }

    /// Integrates the allocated cores up to `t` into the per-second buckets.
    fn charge(&mut self, t: f64) {
        let to = t.min(self.end_ms);
        let mut from = self.cost_since;
        while from < to {
            let second = (from / 1000.0).floor() as usize;
            let edge = ((second + 1) as f64 * 1000.0).min(to);
            self.second_core_ms[second] += self.live_cores as f64 * (edge - from);
            from = edge;
        }
        self.cost_since = self.cost_since.max(to);
    }

    fn finish(mut self) -> SimRun {
        let end = self.end_ms;
        self.charge(end);
        for stage in &mut self.stages {
            for inst in stage.instances.iter_mut().filter(|i| !i.retired) {
                close_segment(inst, end, end);
            }
        }
        let instance_core_ms: f64 = self
            .stages
            .iter()
            .flat_map(|s| s.instances.iter())
            .map(|i| i.core_ms)
            .sum();

        let slo = f64::from(self.spec.slo_ms);
        let n_seconds = self.scenario.trace.len();
        let mut rps = vec![0u64; n_seconds];
        let mut violations = vec![0u64; n_seconds];
        let mut drops = vec![0u64; n_seconds];
        let mut latencies: Vec<Vec<f64>> = vec![Vec::new(); n_seconds];
        let (mut served, mut dropped, mut in_flight, mut late) = (0u64, 0u64, 0u64, 0u64);
        let mut all = Vec::new();
        for r in &self.requests {
            let second = ((r.arrival_ms / 1000.0).floor() as usize).min(n_seconds - 1);
            rps[second] += 1;
            match r.status {
                RequestStatus::Served => {
                    served += 1;
                    let e2e = r.e2e_ms().unwrap_or(f64::INFINITY);
                    if e2e > slo {
                        late += 1;
                        violations[second] += 1;
                    }
                    latencies[second].push(e2e);
                    all.push(e2e);
                }
                RequestStatus::Dropped => {
                    dropped += 1;
                    drops[second] += 1;
                    violations[second] += 1;
                }
                RequestStatus::InFlight => {
                    in_flight += 1;
                    violations[second] += 1;
                }
            }
        }
        let seconds = (0..n_seconds)
            .map(|k| SecondStats {
                second: k as u64,
                rps: rps[k],
                violations: violations[k],
                drops: drops[k],
                p99_ms: percentile(&mut latencies[k], 0.99),
                cost_cores: self.second_core_ms[k] / 1000.0,
            })
            .collect();
        let arrivals = self.requests.len() as u64;
        let total_violations = late + dropped + in_flight;
        let total_core_seconds = self.second_core_ms.iter().sum::<f64>() / 1000.0;
        let aggregates = Aggregates {
            arrivals,
            served,
            dropped,
            in_flight,
            late,
            violations: total_violations,
            violation_rate: if arrivals == 0 {
                0.0
            } else {
                total_violations as f64 / arrivals as f64
            },
            p99_ms: percentile(&mut all, 0.99),
            total_core_seconds,
            instance_core_seconds: instance_core_ms / 1000.0,
            mean_cost_cores: total_core_seconds / n_seconds as f64,
        };
        SimRun {
            report: SimReport {
                policy: self.scenario.policy.name().to_string(),
                seed: self.scenario.seed,
                slo_ms: self.spec.slo_ms,
                seconds,
                aggregates,
                control_log: self.control_log,
            },
            requests: self.requests,
            batches: self.batches,
        }
    }
}

/// Books an instance's cores since its last change, clipped to the trace.
fn close_segment(inst: &mut Instance, now: f64, end: f64) {
    let from = inst.alloc_since.min(end);
    let to = now.min(end);
    inst.core_ms += f64::from(inst.cores) * (to - from).max(0.0);
    inst.alloc_since = now;
}

fn initial_config(scenario: &Scenario, lambda: f64) -> Result<Vec<StagePlan>, ConfigError> {
    let spec = &scenario.spec;
    let fail = |reason: OptimizerError| ConfigError::NoInitialPlan {
        policy: scenario.policy.name(),
        lambda,
        reason: reason.to_string(),
    };
    match &scenario.policy {
        Policy::Static(plan) => Ok(plan.clone()),
        Policy::Joint | Policy::HorizontalOnly => solve_horizontal(spec, lambda).map(|p| p.stages).map_err(fail),
        Policy::VerticalOnly => vertical_target(spec, lambda).map_err(fail),
    }
}

/// One instance per stage sized for `lambda`; past the reach of a single
/// instance, every stage runs at its core limit with the hybrid batch sizes.
pub(super) fn vertical_target(spec: &PipelineSpec, lambda: f64) -> Result<Vec<StagePlan>, OptimizerError> {
    match solve_vertical(spec, lambda) {
        Ok(plan) => Ok(plan.stages),
        Err(OptimizerError::Infeasible) => {
            let hybrid = solve_hybrid(spec, lambda)?;
            Ok(hybrid
                .stages
                .iter()
                .zip(&spec.stages)
                .map(|(s, p)| StagePlan::new(s.batch, p.c_max, 1))
                .collect())
        }
        Err(e) => Err(e),
    }
}

fn horizontal_diff(current: &[StagePlan], target: &[StagePlan]) -> Vec<ScalingAction> {
    let mut actions = Vec::new();
    for (stage, (cur, tgt)) in current.iter().zip(target).enumerate() {
        if cur.batch != tgt.batch {
            actions.push(ScalingAction::now(ActionKind::SetBatch {
                stage,
                batch: tgt.batch,
            }));
        }
        if tgt.instances > cur.instances {
            actions.push(ScalingAction::now(ActionKind::SpawnInstances {
                stage,
                count: tgt.instances - cur.instances,
                cores: tgt.cores,
            }));
        } else if tgt.instances < cur.instances {
            actions.push(ScalingAction::now(ActionKind::RetireInstances {
                stage,
                count: cur.instances - tgt.instances,
            }));
        }
    }
    actions
}

fn vertical_diff(current: &[StagePlan], target: &[StagePlan]) -> Vec<ScalingAction> {
    let mut actions = Vec::new();
    for (stage, (cur, tgt)) in current.iter().zip(target).enumerate() {
        if cur.cores != tgt.cores {
            actions.push(ScalingAction::now(ActionKind::SetCores {
                stage,
                cores: tgt.cores,
            }));
        }
        if cur.batch != tgt.batch {
            actions.push(ScalingAction::now(ActionKind::SetBatch {
                stage,
                batch: tgt.batch,
            }));
        }
    }
    actions
}
