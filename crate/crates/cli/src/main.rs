use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use inferscale_core::io::{
    default_output_dir, load_pipeline_spec, load_profile_samples, load_run_config, write_report, PolicyName,
    ReportFormat, RunConfig,
};
use inferscale_core::optimizer::{solve_horizontal, solve_vertical_or_hybrid, PipelinePlan};
use inferscale_core::profile::DEFAULT_LIMIT;
use inferscale_core::{fit_profile, run, PipelineSpec, SimReport};

#[derive(Parser)]
#[command(name = "inferscale", version, about = "Autoscaling planner and simulator for inference pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit latency coefficients to a `batch,cores,latency_ms` CSV.
    FitProfile {
        csv: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LIMIT)]
        bmax: u32,
        #[arg(long, default_value_t = DEFAULT_LIMIT)]
        cmax: u32,
        /// Stage name; defaults to the file stem.
        #[arg(long)]
        name: Option<String>,
    },
    /// Cheapest deployment of a pipeline for one arrival rate.
    Optimize {
        spec: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Running instances per stage, comma separated (vertical and hybrid).
        #[arg(long, value_delimiter = ',')]
        instances: Option<Vec<u32>>,
        #[arg(long)]
        json: bool,
    },
    /// Replay a trace under one policy and write the per-second report.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Overrides the policy in the config.
        #[arg(long)]
        policy: Option<PolicyName>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Run the joint, horizontal and vertical policies on one scenario.
    Compare {
        config: PathBuf,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Vertical,
    Horizontal,
    /// Vertical, falling back to maxed instances plus spawns.
    Hybrid,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::FitProfile { csv, bmax, cmax, name } => fit(&csv, bmax, cmax, name),
        Command::Optimize {
            spec,
            lambda,
            mode,
            instances,
            json,
        } => optimize(&spec, lambda, mode, instances, json),
        Command::Simulate {
            config,
            seed,
            policy,
            output,
            format,
        } => simulate(&config, seed, policy, output, format),
        Command::Compare { config, seed } => compare(&config, seed),
    }
}

fn fit(csv: &Path, bmax: u32, cmax: u32, name: Option<String>) -> Result<()> {
    let samples = load_profile_samples(csv)?;
    let name = name.unwrap_or_else(|| {
        csv.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "stage".into())
    });
    let profile = fit_profile(name, &samples, bmax, cmax).with_context(|| format!("fitting {}", csv.display()))?;
    let rms = (samples
        .iter()
        .map(|s| (profile.latency(s.batch, s.cores).unwrap_or(f64::NAN) - s.latency_ms).powi(2))
        .sum::<f64>()
        / samples.len() as f64)
        .sqrt();
    println!("# {} samples, rms residual {rms:.3} ms", samples.len());
    println!("[[stages]]");
    println!("name = \"{}\"", profile.name);
    println!("gamma = {}", profile.gamma);
    println!("epsilon = {}", profile.epsilon);
    println!("delta = {}", profile.delta);
    println!("eta = {}", profile.eta);
    println!("b_max = {}", profile.b_max);
    println!("c_max = {}", profile.c_max);
    Ok(())
}

fn optimize(path: &Path, lambda: f64, mode: Mode, instances: Option<Vec<u32>>, json: bool) -> Result<()> {
    let spec = load_pipeline_spec(path)?;
    let plan = match mode {
        Mode::Horizontal => {
            if instances.is_some() {
                bail!("--instances only applies to vertical and hybrid modes");
            }
            solve_horizontal(&spec, lambda)?
        }
        Mode::Vertical | Mode::Hybrid => {
            let counts = instances.unwrap_or_else(|| vec![1; spec.len()]);
            match mode {
                Mode::Vertical => inferscale_core::optimizer::solve_vertical_with_instances(&spec, lambda, &counts)?,
                _ => solve_vertical_or_hybrid(&spec, lambda, &counts)?,
            }
        }
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&plan)?);
    } else {
        print_plan(&spec, &plan);
    }
    Ok(())
}

fn print_plan(spec: &PipelineSpec, plan: &PipelinePlan) {
    println!(
        "{} plan for {} at {} rps (SLO {} ms)",
        plan_kind(plan),
        spec.name,
        plan.lambda,
        spec.slo_ms
    );
    println!("{:<16} {:>6} {:>6} {:>10} {:>6}", "stage", "batch", "cores", "instances", "new");
    for (k, (profile, s)) in spec.stages.iter().zip(&plan.stages).enumerate() {
        let extra = plan.hybrid.as_ref().map(|h| h.extra_instances[k]).unwrap_or(0);
        println!(
            "{:<16} {:>6} {:>6} {:>10} {:>6}",
            profile.name, s.batch, s.cores, s.instances, extra
        );
    }
    println!("total cores {}", plan.total_cores);
    println!("predicted end-to-end latency {:.1} ms", plan.predicted_e2e_ms);
}

fn plan_kind(plan: &PipelinePlan) -> &'static str {
    match plan.kind {
        inferscale_core::PlanKind::Vertical => "vertical",
        inferscale_core::PlanKind::Horizontal => "horizontal",
        inferscale_core::PlanKind::Hybrid => "hybrid",
    }
}

fn simulate(
    path: &Path,
    seed: u64,
    policy: Option<PolicyName>,
    output: Option<PathBuf>,
    format: Option<Format>,
) -> Result<()> {
    let mut config = load_run_config(path)?;
    if let Some(policy) = policy {
        if policy == PolicyName::Static && config.static_plan.is_none() {
            bail!("policy `static` needs `static_plan` in {}", path.display());
        }
        config.policy = policy;
    }
    let scenario = config.scenario(seed)?;
    let report = run(&scenario)?;

    let format = format.map(ReportFormat::from).or(config.format).unwrap_or(ReportFormat::Csv);
    let output = match output.or_else(|| config.output.clone()) {
        Some(p) => p,
        None => default_path(path, &report, format)?,
    };
    write_report(&report, &output, format)?;
    print_table(&[&report]);
    println!("report written to {}", output.display());
    Ok(())
}

fn default_path(config: &Path, report: &SimReport, format: ReportFormat) -> Result<PathBuf> {
    let dir = default_output_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let stem = config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let ext = match format {
        ReportFormat::Csv => "csv",
        ReportFormat::Json => "json",
    };
    Ok(dir.join(format!("{stem}-{}-{}.{ext}", report.policy, report.seed)))
}

fn compare(path: &Path, seed: u64) -> Result<()> {
    let config: RunConfig = load_run_config(path)?;
    let base = config.scenario(seed)?;
    let policies = [PolicyName::Joint, PolicyName::Horizontal, PolicyName::Vertical];
    let reports = std::thread::scope(|s| {
        let handles: Vec<_> = policies
            .iter()
            .map(|&name| {
                let scenario = config.policy_for(name).map(|p| base.with_policy(p));
                s.spawn(move || -> Result<SimReport> {
                    let scenario = scenario.map_err(anyhow::Error::msg)?;
                    Ok(run(&scenario)?)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    println!(
        "{} over {} s, SLO {} ms, seed {seed}",
        base.spec.name,
        base.trace.len(),
        base.spec.slo_ms
    );
    print_table(&reports.iter().collect::<Vec<_>>());
    Ok(())
}

fn print_table(reports: &[&SimReport]) {
    println!(
        "{:<11} {:>9} {:>10} {:>8} {:>9} {:>9} {:>12} {:>10}",
        "policy", "arrivals", "violations", "drops", "viol.rate", "p99_ms", "core_seconds", "mean_cores"
    );
    for r in reports {
        let a = &r.aggregates;
        println!(
            "{:<11} {:>9} {:>10} {:>8} {:>9.4} {:>9} {:>12.1} {:>10.2}",
            r.policy,
            a.arrivals,
            a.violations,
            a.dropped,
            a.violation_rate,
            a.p99_ms.map(|p| format!("{p:.1}")).unwrap_or_else(|| "-".into()),
            a.total_core_seconds,
            a.mean_cost_cores
        );
    }
}
