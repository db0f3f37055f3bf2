use inferscale_core::sim::{run_detailed, DropPolicy, Policy, RequestStatus, Scenario, SimRun};
use inferscale_core::{run, ModelProfile, PipelineSpec, StagePlan, WorkloadTrace};
use proptest::prelude::*;

fn example_profile(name: &str) -> ModelProfile {
    ModelProfile::new(name, 10.0, 40.0, 2.0, 5.0, 16, 16).unwrap()
}

fn single(slo: u32) -> PipelineSpec {
    PipelineSpec::new("single", slo, vec![example_profile("m")]).unwrap()
}

fn two_stage(slo: u32) -> PipelineSpec {
    let second = ModelProfile::new("classify", 6.0, 20.0, 1.0, 3.0, 16, 16).unwrap();
    PipelineSpec::new("two", slo, vec![example_profile("detect"), second]).unwrap()
}

fn burst() -> WorkloadTrace {
    WorkloadTrace::from_segments(&[(20, 20), (5, 120), (20, 20)]).unwrap()
}

fn check_invariants(run: &SimRun, spec: &PipelineSpec) {
    let a = &run.report.aggregates;
    assert_eq!(a.arrivals, a.served + a.dropped + a.in_flight);
    assert_eq!(a.arrivals, run.requests.len() as u64);
    assert!((0.0..=1.0).contains(&a.violation_rate));
    let per_second: u64 = run.report.seconds.iter().map(|s| s.rps).sum();
    assert_eq!(per_second, a.arrivals);
    let violations: u64 = run.report.seconds.iter().map(|s| s.violations).sum();
    assert_eq!(violations, a.violations);

    // Two independent cost integrals.
    let tol = 1e-6 * a.total_core_seconds.max(1.0);
    assert!((a.total_core_seconds - a.instance_core_seconds).abs() < tol);
    let series: f64 = run.report.seconds.iter().map(|s| s.cost_cores).sum();
    assert!((series - a.total_core_seconds).abs() < tol);

    for r in &run.requests {
        let mut last = r.arrival_ms;
        for t in &r.stages {
            assert!(t.enqueue_ms >= last);
            last = t.enqueue_ms;
            if let Some(d) = t.dequeue_ms {
                assert!(d >= last);
                last = d;
            }
            if let Some(f) = t.finish_ms {
                assert!(f >= last);
                last = f;
            }
        }
        if r.status == RequestStatus::Served {
            assert_eq!(r.stages.len(), spec.len());
            assert!(r.stages.iter().all(|t| t.finish_ms.is_some()));
        }
    }

    let mut by_instance = std::collections::BTreeMap::<(usize, usize), Vec<(f64, f64)>>::new();
    for b in &run.batches {
        assert!(b.start_ms >= b.instance_ready_ms);
        assert!(b.cores >= 1 && b.size >= 1);
        let expected = spec.stages[b.stage].latency(b.size as u32, b.cores).unwrap();
        assert!((b.end_ms - b.start_ms - expected).abs() < 1e-6);
        by_instance
            .entry((b.stage, b.instance))
            .or_default()
            .push((b.start_ms, b.end_ms));
    }
    for spans in by_instance.values() {
        for w in spans.windows(2) {
            assert!(w[1].0 >= w[0].1, "overlapping batches {w:?}");
        }
    }
}

#[test]
fn underloaded_static_plan_meets_slo() {
    let spec = single(1000);
    let trace = WorkloadTrace::new(vec![10; 30]).unwrap();
    // b = 1 on one core: 57 ms, 17.5 rps. Poisson bursts queue a few
    // requests at most, far below the SLO.
    let scenario = Scenario::new(spec.clone(), trace, Policy::Static(vec![StagePlan::new(1, 1, 1)]), 7);
    let out = run_detailed(&scenario).unwrap();
    check_invariants(&out, &spec);
    assert_eq!(out.report.aggregates.violation_rate, 0.0);
    assert_eq!(out.report.aggregates.dropped, 0);
    assert!((out.report.aggregates.total_core_seconds - 30.0).abs() < 1e-9);
}

#[test]
fn every_policy_keeps_the_books() {
    let spec = two_stage(600);
    for policy in [
        Policy::Joint,
        Policy::HorizontalOnly,
        Policy::VerticalOnly,
        Policy::Static(vec![StagePlan::new(2, 2, 1), StagePlan::new(2, 1, 1)]),
    ] {
        for drop_policy in [DropPolicy::AtSlo, DropPolicy::At3xSlo, DropPolicy::Never] {
            let mut scenario = Scenario::new(spec.clone(), burst(), policy.clone(), 3);
            scenario.drop_policy = drop_policy;
            let out = run_detailed(&scenario).unwrap();
            check_invariants(&out, &spec);
        }
    }
}

#[test]
fn equal_seeds_give_identical_reports() {
    let spec = two_stage(600);
    for policy in [Policy::Joint, Policy::HorizontalOnly, Policy::VerticalOnly] {
        let scenario = Scenario::new(spec.clone(), burst(), policy, 11);
        let a = run(&scenario).unwrap();
        let b = run(&scenario).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
    let one = run(&Scenario::new(spec.clone(), burst(), Policy::Joint, 1)).unwrap();
    let two = run(&Scenario::new(spec, burst(), Policy::Joint, 2)).unwrap();
    assert_ne!(one.aggregates.arrivals, 0);
    assert_ne!(one.seconds, two.seconds);
}

#[test]
fn dropping_at_slo_bounds_served_latency() {
    let spec = single(1000);
    let mut scenario = Scenario::new(spec.clone(), burst(), Policy::HorizontalOnly, 5);
    scenario.drop_policy = DropPolicy::AtSlo;
    let out = run_detailed(&scenario).unwrap();
    check_invariants(&out, &spec);
    assert!(out.report.aggregates.dropped > 0);
    let quantum = out
        .batches
        .iter()
        .map(|b| b.end_ms - b.start_ms)
        .fold(0.0, f64::max);
    for r in &out.requests {
        if let Some(e2e) = r.e2e_ms() {
            assert!(e2e <= 1000.0 + quantum + 1e-9, "served at {e2e} ms");
        }
    }
}

#[test]
fn in_place_resize_needs_no_cold_start() {
    let spec = single(1000);
    let scenario = Scenario::new(spec.clone(), burst(), Policy::VerticalOnly, 2);
    let out = run_detailed(&scenario).unwrap();
    check_invariants(&out, &spec);
    // One instance throughout; the burst is met by adding cores.
    assert!(out.batches.iter().all(|b| b.instance == 0));
    assert!(out.batches.iter().any(|b| b.cores > 1));
    let log = &out.report.control_log;
    assert!(log.iter().all(|c| c.config[0].instances == 1));
}

#[test]
fn horizontal_scaling_waits_for_cold_start() {
    let spec = single(1000);
    let scenario = Scenario::new(spec.clone(), burst(), Policy::HorizontalOnly, 2);
    let out = run_detailed(&scenario).unwrap();
    check_invariants(&out, &spec);
    let spawned_first_batch = out
        .batches
        .iter()
        .filter(|b| b.instance > 0)
        .map(|b| b.start_ms)
        .fold(f64::INFINITY, f64::min);
    // The burst starts at 20 s, is seen at the 21 s tick, and the first new
    // instance serves 5.5 s later.
    assert!(spawned_first_batch >= 21_000.0 + 5_500.0);
    assert!(out.batches.iter().all(|b| b.cores == 1));
}

#[test]
fn invalid_scenarios_are_rejected() {
    let spec = single(1000);
    let trace = WorkloadTrace::new(vec![10; 5]).unwrap();
    let wrong_len = Scenario::new(
        spec.clone(),
        trace.clone(),
        Policy::Static(vec![StagePlan::new(1, 1, 1); 2]),
        0,
    );
    assert!(run(&wrong_len).is_err());
    let too_many_cores = Scenario::new(spec.clone(), trace.clone(), Policy::Static(vec![StagePlan::new(1, 17, 1)]), 0);
    assert!(run(&too_many_cores).is_err());
    let mut zero_period = Scenario::new(spec, trace, Policy::Joint, 0);
    zero_period.timing.control_period_ms = 0;
    assert!(run(&zero_period).is_err());
}

#[test]
fn zero_rate_trace_runs_empty() {
    let spec = single(1000);
    let trace = WorkloadTrace::new(vec![0; 10]).unwrap();
    let report = run(&Scenario::new(spec, trace, Policy::Joint, 0)).unwrap();
    assert_eq!(report.aggregates.arrivals, 0);
    assert_eq!(report.aggregates.violation_rate, 0.0);
    assert!(report.seconds.iter().all(|s| s.p99_ms.is_none()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_workloads_keep_invariants(
        rates in prop::collection::vec(0u32..150, 5..25),
        seed in any::<u64>(),
        policy in 0usize..3,
        drop_policy in 0usize..3,
    ) {
        let spec = two_stage(800);
        let policy = [Policy::Joint, Policy::HorizontalOnly, Policy::VerticalOnly][policy].clone();
        let mut scenario = Scenario::new(spec.clone(), WorkloadTrace::new(rates).unwrap(), policy, seed);
        scenario.drop_policy = [DropPolicy::AtSlo, DropPolicy::At3xSlo, DropPolicy::Never][drop_policy];
        let out = run_detailed(&scenario).unwrap();
        check_invariants(&out, &spec);
    }
}
