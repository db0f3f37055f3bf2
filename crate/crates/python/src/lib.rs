//! Python bindings: profiles, pipeline specs, the solvers and the simulator.

use std::path::PathBuf;

use inferscale_core::io::{self, IoError, PolicyName};
use inferscale_core::optimizer::{self, OptimizerError, PipelinePlan, StagePlan};
use inferscale_core::sim::{ConfigError, DropPolicy, Policy, Scenario, SimReport};
use inferscale_core::{queueing, transition, ProfileSample, ScalingMode, WorkloadTrace};
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

create_exception!(inferscale, InfeasibleError, PyValueError, "No deployment meets both the SLO and the rate.");

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn optimizer_err(e: OptimizerError) -> PyErr {
    match e {
        OptimizerError::Infeasible => InfeasibleError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn io_err(e: IoError) -> PyErr {
    match e {
        IoError::Io { .. } => PyOSError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn config_err(e: ConfigError) -> PyErr {
    value_err(e)
}

#[pyclass(name = "ModelProfile", frozen, from_py_object, module = "inferscale")]
#[derive(Clone)]
pub struct PyModelProfile {
    inner: inferscale_core::ModelProfile,
}

#[pymethods]
impl PyModelProfile {
    #[new]
    #[pyo3(signature = (name, gamma, epsilon, delta, eta, b_max=16, c_max=16))]
    fn new(name: String, gamma: f64, epsilon: f64, delta: f64, eta: f64, b_max: u32, c_max: u32) -> PyResult<Self> {
        inferscale_core::ModelProfile::new(name, gamma, epsilon, delta, eta, b_max, c_max)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Fits a profile to `(batch, cores, latency_ms)` measurements.
    #[staticmethod]
    #[pyo3(signature = (samples, b_max=16, c_max=16, name="stage"))]
    fn fit(samples: Vec<(u32, u32, f64)>, b_max: u32, c_max: u32, name: &str) -> PyResult<Self> {
        let samples = samples
            .into_iter()
            .map(|(b, c, l)| ProfileSample::new(b, c, l))
            .collect::<Result<Vec<_>, _>>()
            .map_err(value_err)?;
        inferscale_core::fit_profile(name, &samples, b_max, c_max)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    fn latency(&self, batch: u32, cores: u32) -> PyResult<f64> {
        self.inner.latency(batch, cores).map_err(value_err)
    }

    fn throughput(&self, batch: u32, cores: u32) -> PyResult<f64> {
        self.inner.throughput(batch, cores).map_err(value_err)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    /// `(gamma, epsilon, delta, eta)`.
    #[getter]
    fn coefficients(&self) -> (f64, f64, f64, f64) {
        let [g, e, d, h] = self.inner.coefficients();
        (g, e, d, h)
    }

    #[getter]
    fn b_max(&self) -> u32 {
        self.inner.b_max
    }

    #[getter]
    fn c_max(&self) -> u32 {
        self.inner.c_max
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelProfile({:?}, gamma={}, epsilon={}, delta={}, eta={}, b_max={}, c_max={})",
            p.name, p.gamma, p.epsilon, p.delta, p.eta, p.b_max, p.c_max
        )
    }
}

#[pyclass(name = "PipelineSpec", frozen, skip_from_py_object, module = "inferscale")]
#[derive(Clone)]
pub struct PyPipelineSpec {
    inner: inferscale_core::PipelineSpec,
}

#[pymethods]
impl PyPipelineSpec {
    #[new]
    fn new(name: String, slo_ms: u32, stages: Vec<PyModelProfile>) -> PyResult<Self> {
        inferscale_core::PipelineSpec::new(name, slo_ms, stages.into_iter().map(|s| s.inner).collect())
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    /// Reads a TOML pipeline description.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        io::load_pipeline_spec(&path).map(|inner| Self { inner }).map_err(io_err)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn slo_ms(&self) -> u32 {
        self.inner.slo_ms
    }

    #[getter]
    fn stages(&self) -> Vec<PyModelProfile> {
        self.inner
            .stages
            .iter()
            .map(|p| PyModelProfile { inner: p.clone() })
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "PipelineSpec({:?}, slo_ms={}, stages={})",
            self.inner.name,
            self.inner.slo_ms,
            self.inner.len()
        )
    }
}

#[pyclass(name = "Plan", frozen, module = "inferscale")]
pub struct PyPlan {
    inner: PipelinePlan,
}

#[pymethods]
impl PyPlan {
    /// `"vertical"`, `"horizontal"` or `"hybrid"`.
    #[getter]
    fn kind(&self) -> String {
        serde_json::to_value(self.inner.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    }

    #[getter]
    fn rate(&self) -> f64 {
        self.inner.lambda
    }

    /// One `(batch, cores, instances)` per stage.
    #[getter]
    fn stages(&self) -> Vec<(u32, u32, u32)> {
        self.inner
            .stages
            .iter()
            .map(|s| (s.batch, s.cores, s.instances))
            .collect()
    }

    /// Instances a hybrid plan adds on top of the running ones.
    #[getter]
    fn extra_instances(&self) -> Option<Vec<u32>> {
        self.inner.hybrid.as_ref().map(|h| h.extra_instances.clone())
    }

    #[getter]
    fn total_cores(&self) -> u64 {
        self.inner.total_cores
    }

    #[getter]
    fn predicted_e2e_ms(&self) -> f64 {
        self.inner.predicted_e2e_ms
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Plan(kind={:?}, stages={:?}, total_cores={})",
            self.kind(),
            self.stages(),
            self.inner.total_cores
        )
    }
}

#[pyclass(name = "Report", frozen, module = "inferscale")]
pub struct PyReport {
    inner: SimReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn policy(&self) -> &str {
        &self.inner.policy
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn arrivals(&self) -> u64 {
        self.inner.aggregates.arrivals
    }

    #[getter]
    fn served(&self) -> u64 {
        self.inner.aggregates.served
    }

    #[getter]
    fn dropped(&self) -> u64 {
        self.inner.aggregates.dropped
    }

    #[getter]
    fn in_flight(&self) -> u64 {
        self.inner.aggregates.in_flight
    }

    #[getter]
    fn violations(&self) -> u64 {
        self.inner.aggregates.violations
    }

    #[getter]
    fn violation_rate(&self) -> f64 {
        self.inner.aggregates.violation_rate
    }

    #[getter]
    fn p99_ms(&self) -> Option<f64> {
        self.inner.aggregates.p99_ms
    }

    #[getter]
    fn total_core_seconds(&self) -> f64 {
        self.inner.aggregates.total_core_seconds
    }

    #[getter]
    fn mean_cost_cores(&self) -> f64 {
        self.inner.aggregates.mean_cost_cores
    }

    /// Per-second rows: `(second, rps, violations, drops, p99_ms, cost_cores)`.
    #[getter]
    fn seconds(&self) -> Vec<(u64, u64, u64, u64, Option<f64>, f64)> {
        self.inner
            .seconds
            .iter()
            .map(|s| (s.second, s.rps, s.violations, s.drops, s.p99_ms, s.cost_cores))
            .collect()
    }

    fn to_csv(&self) -> String {
        io::report_csv(&self.inner)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Report(policy={:?}, arrivals={}, violation_rate={:.4}, core_seconds={:.1})",
            self.inner.policy,
            self.inner.aggregates.arrivals,
            self.inner.aggregates.violation_rate,
            self.inner.aggregates.total_core_seconds
        )
    }
}

/// Cheapest deployment at `rate` requests per second.
///
/// `mode` is `"vertical"`, `"horizontal"` or `"hybrid"` (vertical, falling
/// back to maxed instances plus new ones). `instances` fixes the running
/// instance count per stage for the vertical and hybrid modes.
#[pyfunction]
#[pyo3(signature = (spec, rate, mode="vertical", instances=None))]
fn solve(spec: &PyPipelineSpec, rate: f64, mode: &str, instances: Option<Vec<u32>>) -> PyResult<PyPlan> {
    let spec = &spec.inner;
    let counts = instances.unwrap_or_else(|| vec![1; spec.len()]);
    let plan = match mode {
        "vertical" => optimizer::solve_vertical_with_instances(spec, rate, &counts),
        "horizontal" => optimizer::solve_horizontal(spec, rate),
        "hybrid" => optimizer::solve_vertical_or_hybrid(spec, rate, &counts),
        other => {
            return Err(value_err(format!(
                "unknown mode `{other}` (expected vertical, horizontal or hybrid)"
            )))
        }
    };
    plan.map(|inner| PyPlan { inner }).map_err(optimizer_err)
}

/// Exhaustive search, for checking [`solve`] on small grids.
#[pyfunction]
#[pyo3(signature = (spec, rate, mode="vertical"))]
fn brute_force(spec: &PyPipelineSpec, rate: f64, mode: &str) -> PyResult<PyPlan> {
    let mode = match mode {
        "vertical" => ScalingMode::Vertical,
        "horizontal" => ScalingMode::Horizontal,
        other => return Err(value_err(format!("unknown mode `{other}`"))),
    };
    inferscale_core::brute_force_optimize(&spec.inner, rate, mode)
        .map(|inner| PyPlan { inner })
        .map_err(optimizer_err)
}

/// Wait of the first request of a batch of `batch` at `rate`, in ms.
#[pyfunction]
fn queue_delay(batch: u32, rate: f64) -> PyResult<f64> {
    if batch == 0 || !(rate.is_finite() && rate > 0.0) {
        return Err(value_err("batch must be >= 1 and rate positive"));
    }
    Ok(queueing::queue_delay(batch, rate))
}

/// Whether the current and predicted rates call for the same horizontal plan.
#[pyfunction]
fn is_stable(spec: &PyPipelineSpec, rate_now: f64, rate_predicted: f64) -> bool {
    transition::is_stable(&spec.inner, rate_now, rate_predicted)
}

fn parse_policy(name: &str, static_plan: Option<Vec<(u32, u32, u32)>>) -> PyResult<Policy> {
    let name: PolicyName = name.parse().map_err(value_err)?;
    Ok(match name {
        PolicyName::Joint => Policy::Joint,
        PolicyName::Horizontal => Policy::HorizontalOnly,
        PolicyName::Vertical => Policy::VerticalOnly,
        PolicyName::Static => Policy::Static(
            static_plan
                .ok_or_else(|| value_err("policy `static` needs static_plan"))?
                .into_iter()
                .map(|(b, c, n)| StagePlan::new(b, c, n))
                .collect(),
        ),
    })
}

fn parse_drop(name: &str) -> PyResult<DropPolicy> {
    match name {
        "at_slo" => Ok(DropPolicy::AtSlo),
        "at3x_slo" => Ok(DropPolicy::At3xSlo),
        "never" => Ok(DropPolicy::Never),
        other => Err(value_err(format!(
            "unknown drop policy `{other}` (expected at_slo, at3x_slo or never)"
        ))),
    }
}

/// Replays a per-second rate trace through the pipeline.
///
/// The GIL is released while the simulation runs.
#[pyfunction]
#[pyo3(signature = (spec, rps, policy="joint", seed=0, drop_policy="never", static_plan=None))]
fn simulate(
    py: Python<'_>,
    spec: &PyPipelineSpec,
    rps: Vec<u32>,
    policy: &str,
    seed: u64,
    drop_policy: &str,
    static_plan: Option<Vec<(u32, u32, u32)>>,
) -> PyResult<PyReport> {
    let trace = WorkloadTrace::new(rps).map_err(value_err)?;
    let mut scenario = Scenario::new(spec.inner.clone(), trace, parse_policy(policy, static_plan)?, seed);
    scenario.drop_policy = parse_drop(drop_policy)?;
    let report = py.detach(|| inferscale_core::run(&scenario)).map_err(config_err)?;
    Ok(PyReport { inner: report })
}

/// Runs a TOML scenario file, optionally under a different policy.
#[pyfunction]
#[pyo3(signature = (path, seed, policy=None))]
fn simulate_config(py: Python<'_>, path: PathBuf, seed: u64, policy: Option<&str>) -> PyResult<PyReport> {
    let mut config = io::load_run_config(&path).map_err(io_err)?;
    if let Some(name) = policy {
        config.policy = name.parse().map_err(value_err)?;
    }
    let scenario = config.scenario(seed).map_err(io_err)?;
    let report = py.detach(|| inferscale_core::run(&scenario)).map_err(config_err)?;
    Ok(PyReport { inner: report })
}

/// Adds the classes and functions to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelProfile>()?;
    m.add_class::<PyPipelineSpec>()?;
    m.add_class::<PyPlan>()?;
    m.add_class::<PyReport>()?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force, m)?)?;
    m.add_function(wrap_pyfunction!(queue_delay, m)?)?;
    m.add_function(wrap_pyfunction!(is_stable, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_config, m)?)?;
    Ok(())
}

#[pymodule]
fn inferscale(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
