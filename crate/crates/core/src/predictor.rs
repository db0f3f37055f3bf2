//! Forecasts of the peak arrival rate over the next few seconds.
//!
//! The transition logic only consumes a scalar forecast, so any model that
//! implements [`LoadPredictor`] can drive it. [`WindowedMaxPredictor`] is the
//! built-in baseline.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PredictorError {
    #[error("observation at t={got} is not after the last one at t={last}")]
    NonMonotonicTime { last: u64, got: u64 },
    #[error("no observations yet")]
    NoHistory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateObservation {
    pub t: u64,
    pub rps: u64,
}

pub trait LoadPredictor {
    /// Records the number of arrivals seen during second `t`.
    fn observe(&mut self, t: u64, rps: u64) -> Result<(), PredictorError>;

    /// Predicted maximum per-second rate over the next `horizon_s` seconds.
    fn predict_max(&self, horizon_s: u32) -> Result<f64, PredictorError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    /// Observations kept, in seconds.
    pub window_s: usize,
    /// Seconds of recent history the max is taken over.
    pub lookback_s: usize,
    /// Multiplier applied to the observed max.
    pub headroom: f64,
    /// Forecast horizon requested by the controller.
    pub horizon_s: u32,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            window_s: 120,
            lookback_s: 30,
            headroom: 1.0,
            horizon_s: 10,
        }
    }
}

/// Predicts the max of recent history scaled by a headroom factor.
#[derive(Debug, Clone)]
pub struct WindowedMaxPredictor {
    config: PredictorConfig,
    history: VecDeque<RateObservation>,
}

impl WindowedMaxPredictor {
    pub fn new(config: PredictorConfig) -> Self {
        Self {
            config,
            history: VecDeque::with_capacity(config.window_s),
        }
    }

    pub fn history(&self) -> impl ExactSizeIterator<Item = &RateObservation> {
        self.history.iter()
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }
}

impl Default for WindowedMaxPredictor {
    fn default() -> Self {
        Self::new(PredictorConfig::default())
    }
}

impl LoadPredictor for WindowedMaxPredictor {
    fn observe(&mut self, t: u64, rps: u64) -> Result<(), PredictorError> {
        if let Some(last) = self.history.back() {
            if t <= last.t {
                return Err(PredictorError::NonMonotonicTime { last: last.t, got: t });
            }
        }
        self.history.push_back(RateObservation { t, rps });
        while self.history.len() > self.config.window_s.max(1) {
            self.history.pop_front();
        }
        Ok(())
    }

    fn predict_max(&self, horizon_s: u32) -> Result<f64, PredictorError> {
        if self.history.is_empty() {
            return Err(PredictorError::NoHistory);
        }
        // Never look back less than the horizon so recent peaks are kept.
        let lookback = self.config.lookback_s.max(horizon_s as usize).max(1);
        let peak = self
            .history
            .iter()
            .rev()
            .take(lookback)
            .map(|o| o.rps)
            .max()
            .unwrap_or(0);
        Ok(peak as f64 * self.config.headroom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fed(values: &[u64]) -> WindowedMaxPredictor {
        let mut p = WindowedMaxPredictor::default();
        for (t, v) in values.iter().enumerate() {
            p.observe(t as u64, *v).unwrap();
        }
        p
    }

    #[test]
    fn observe_appends() {
        let mut p = WindowedMaxPredictor::default();
        p.observe(0, 20).unwrap();
        p.observe(1, 22).unwrap();
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn observe_rejects_repeated_second() {
        let mut p = WindowedMaxPredictor::default();
        p.observe(1, 5).unwrap();
        assert_eq!(
            p.observe(1, 6),
            Err(PredictorError::NonMonotonicTime { last: 1, got: 1 })
        );
    }

    #[test]
    fn history_is_bounded() {
        let p = fed(&[7; 200]);
        assert_eq!(p.len(), 120);
    }

    #[test]
    fn windowed_max() {
        assert_eq!(fed(&[20, 22, 19]).predict_max(10).unwrap(), 22.0);
        let mut burst = vec![20; 30];
        burst.extend([120; 3]);
        assert_eq!(fed(&burst).predict_max(10).unwrap(), 120.0);
    }

    #[test]
    fn old_peaks_age_out() {
        let mut values = vec![120];
        values.extend([20; 30]);
        assert_eq!(fed(&values).predict_max(10).unwrap(), 20.0);
    }

    #[test]
    fn empty_history() {
        assert_eq!(
            WindowedMaxPredictor::default().predict_max(10),
            Err(PredictorError::NoHistory)
        );
    }

    #[test]
    fn headroom_scales_forecast() {
        let mut p = WindowedMaxPredictor::new(PredictorConfig {
            headroom: 1.5,
            ..PredictorConfig::default()
        });
        p.observe(0, 10).unwrap();
        assert_eq!(p.predict_max(10).unwrap(), 15.0);
    }
}
