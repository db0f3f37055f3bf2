//! Per-model performance profiles.
//!
//! A profile maps a (batch size, CPU cores) configuration to the processing
//! latency of one batch:
//!
//! ```text
//! l(b, c) = gamma * b / c + epsilon / c + delta * b + eta      [ms]
//! ```
//!
//! The first two terms shrink with more cores (the parallel share of the
//! work), the last two do not. Throughput of one instance is
//! `1000 * b / l(b, c)` requests per second.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default upper bound on batch size and cores for a profile.
pub const DEFAULT_LIMIT: u32 = 16;

const BASIS_LEN: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("configuration (batch={batch}, cores={cores}) outside profile limits (b_max={b_max}, c_max={c_max})")]
    OutOfRange {
        batch: u32,
        cores: u32,
        b_max: u32,
        c_max: u32,
    },
    #[error("profiling samples do not determine the latency model: {0}")]
    DegenerateSamples(String),
    #[error("invalid profile: {0}")]
    Invalid(String),
}

/// One measured point: a batch of `batch` requests on `cores` cores took
/// `latency_ms` to process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub batch: u32,
    pub cores: u32,
    pub latency_ms: f64,
}

impl ProfileSample {
    pub fn new(batch: u32, cores: u32, latency_ms: f64) -> Result<Self, ProfileError> {
        if batch == 0 || cores == 0 {
            return Err(ProfileError::Invalid(format!(
                "sample needs batch >= 1 and cores >= 1, got batch={batch} cores={cores}"
            )));
        }
        if !(latency_ms.is_finite() && latency_ms > 0.0) {
            return Err(ProfileError::Invalid(format!(
                "sample latency must be positive and finite, got {latency_ms}"
            )));
        }
        Ok(Self {
            batch,
            cores,
            latency_ms,
        })
    }
}

/// Fitted latency model of one pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub name: String,
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub eta: f64,
    pub b_max: u32,
    pub c_max: u32,
}

impl ModelProfile {
    pub fn new(
        name: impl Into<String>,
        gamma: f64,
        epsilon: f64,
        delta: f64,
        eta: f64,
        b_max: u32,
        c_max: u32,
    ) -> Result<Self, ProfileError> {
        let profile = Self {
            name: name.into(),
            gamma,
            epsilon,
            delta,
            eta,
            b_max,
            c_max,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Checks the coefficient and limit invariants. Useful after deserializing.
    pub fn validate(&self) -> Result<(), ProfileError> {
        let coefficients = [self.gamma, self.epsilon, self.delta, self.eta];
        if coefficients.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ProfileError::Invalid(format!(
                "coefficients must be finite and nonnegative, got {coefficients:?}"
            )));
        }
        // With b, c >= 1 any positive coefficient keeps every latency positive.
        if coefficients.iter().sum::<f64>() <= 0.0 {
            return Err(ProfileError::Invalid(
                "at least one coefficient must be positive".into(),
            ));
        }
        if self.b_max == 0 || self.c_max == 0 {
            return Err(ProfileError::Invalid(format!(
                "limits must be >= 1, got b_max={} c_max={}",
                self.b_max, self.c_max
            )));
        }
        Ok(())
    }

    fn check_range(&self, batch: u32, cores: u32) -> Result<(), ProfileError> {
        if batch == 0 || cores == 0 || batch > self.b_max || cores > self.c_max {
            return Err(ProfileError::OutOfRange {
                batch,
                cores,
                b_max: self.b_max,
                c_max: self.c_max,
            });
        }
        Ok(())
    }

    /// Processing latency in milliseconds of one batch.
    pub fn latency(&self, batch: u32, cores: u32) -> Result<f64, ProfileError> {
        self.check_range(batch, cores)?;
        Ok(self.latency_unchecked(batch, cores))
    }

    /// Requests per second one instance sustains at this configuration.
    pub fn throughput(&self, batch: u32, cores: u32) -> Result<f64, ProfileError> {
        self.check_range(batch, cores)?;
        Ok(self.throughput_unchecked(batch, cores))
    }

    pub(crate) fn latency_unchecked(&self, batch: u32, cores: u32) -> f64 {
        let b = f64::from(batch);
        let c = f64::from(cores);
        self.gamma * b / c + self.epsilon / c + self.delta * b + self.eta
    }

    pub(crate) fn throughput_unchecked(&self, batch: u32, cores: u32) -> f64 {
        1000.0 * f64::from(batch) / self.latency_unchecked(batch, cores)
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.gamma, self.epsilon, self.delta, self.eta]
    }
}

fn basis(batch: u32, cores: u32) -> [f64; BASIS_LEN] {
    let b = f64::from(batch);
    let c = f64::from(cores);
    [b / c, 1.0 / c, b, 1.0]
}

/// Relative singular-value cutoff below which a design direction counts as
/// unresolved.
const RANK_TOL: f64 = 1e-10;

fn numerical_rank(design: &DMatrix<f64>) -> usize {
    let singular = design.clone().svd(false, false).singular_values;
    let largest = singular.iter().cloned().fold(0.0_f64, f64::max);
    if largest == 0.0 {
        return 0;
    }
    singular.iter().filter(|s| **s > RANK_TOL * largest).count()
}

fn least_squares(design: &DMatrix<f64>, target: &DVector<f64>) -> Option<DVector<f64>> {
    design
        .clone()
        .svd(true, true)
        .solve(target, RANK_TOL)
        .ok()
}

/// Fits a profile by nonnegative least squares over the samples.
///
/// The four-column problem is small enough to solve exactly by trying every
/// support set: the constrained optimum is the unconstrained least-squares
/// solution restricted to its own support, with all entries nonnegative.
pub fn fit_profile(
    name: impl Into<String>,
    samples: &[ProfileSample],
    b_max: u32,
    c_max: u32,
) -> Result<ModelProfile, ProfileError> {
    if samples.len() < BASIS_LEN {
        return Err(ProfileError::DegenerateSamples(format!(
            "need at least {BASIS_LEN} samples, got {}",
            samples.len()
        )));
    }
    for s in samples {
        ProfileSample::new(s.batch, s.cores, s.latency_ms)?;
    }

    let rows = samples.len();
    let design = DMatrix::from_fn(rows, BASIS_LEN, |r, k| {
        basis(samples[r].batch, samples[r].cores)[k]
    });
    let target = DVector::from_iterator(rows, samples.iter().map(|s| s.latency_ms));

    let rank = numerical_rank(&design);
    if rank < BASIS_LEN {
        return Err(ProfileError::DegenerateSamples(format!(
            "design matrix over {{b/c, 1/c, b, 1}} has rank {rank}, need {BASIS_LEN}"
        )));
    }

    let mut best: Option<([f64; BASIS_LEN], f64)> = None;
    for mask in 1u32..(1 << BASIS_LEN) {
        let columns: Vec<usize> = (0..BASIS_LEN).filter(|k| mask & (1 << k) != 0).collect();
        let sub = DMatrix::from_fn(rows, columns.len(), |r, j| design[(r, columns[j])]);
        let Some(solution) = least_squares(&sub, &target) else {
            continue;
        };
        if solution.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            continue;
        }
        let mut coefficients = [0.0; BASIS_LEN];
        for (j, &k) in columns.iter().enumerate() {
            coefficients[k] = solution[j];
        }
        let residual = (&sub * &solution - &target).norm_squared();
        // Strict improvement keeps the smallest-support solution among ties.
        if best.as_ref().is_none_or(|(_, r)| residual < *r * (1.0 - 1e-12) - 1e-18) {
            best = Some((coefficients, residual));
        }
    }

    let (c, _) = best.ok_or_else(|| {
        ProfileError::DegenerateSamples("no nonnegative fit exists for these samples".into())
    })?;
    ModelProfile::new(name, c[0], c[1], c[2], c[3], b_max, c_max)
}
