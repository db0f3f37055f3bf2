//! Joint vertical and horizontal autoscaling for multi-stage inference
//! pipelines.
//!
//! * [`profile`] fits and evaluates per-model latency profiles.
//! * [`queueing`] gives the batching delay of a stage.
//! * [`optimizer`] picks batch sizes, cores and instance counts.
//! * [`predictor`] forecasts near-term peak load.
//! * [`transition`] decides when to scale in place and when to add instances.
//! * [`sim`] replays workloads through a pipeline under a scaling policy.
//! * [`workload`] holds per-second request-rate traces.
//! * [`io`] reads traces and pipeline files and writes reports.

pub mod io;
pub mod optimizer;
pub mod pipeline;
pub mod predictor;
pub mod profile;
pub mod queueing;
pub mod sim;
pub mod transition;
pub mod workload;

pub use optimizer::{
    brute_force_optimize, solve_horizontal, solve_hybrid, solve_vertical, OptimizerError,
    PipelinePlan, PlanKind, ScalingMode, StagePlan,
};
pub use pipeline::{PipelineSpec, SpecError};
pub use profile::{fit_profile, ModelProfile, ProfileError, ProfileSample};
pub use sim::{run, DropPolicy, Policy, Scenario, SimReport};
pub use workload::WorkloadTrace;
