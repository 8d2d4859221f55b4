//! Workload predictors behind a common interface.
//!
//! The control loop only needs "observe the last window, forecast the
//! next"; anything honoring [`Predictor`] can drive it, including learned
//! models. Shipped here: a persistence forecaster with a safety margin, a
//! least-squares linear trend, and a noisy oracle that reads the true
//! profile and corrupts it — useful for studying how prediction error
//! turns into rejections.

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::des::ArrivalProfile;

/// Statistics of one monitoring window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadStats {
    /// Observed arrival rate over the window (peak of sub-window means
    /// when fed by the control loop), per second.
    pub mean_rate: f64,
    /// SCV of the interarrival times over the window.
    pub scv: f64,
    /// Window length, seconds.
    pub window: f64,
}

/// Forecast for the next window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forecast {
    pub rate: f64,
    pub scv: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("predictor needs {needed} observed windows, has {got}")]
    InsufficientHistory { needed: usize, got: usize },
}

pub trait Predictor {
    fn observe(&mut self, stats: WorkloadStats);
    fn forecast(&mut self) -> Result<Forecast, PredictError>;
}

/// Last observation scaled up by a safety margin.
#[derive(Debug, Clone)]
pub struct PersistencePredictor {
    margin: f64,
    last: Option<WorkloadStats>,
}

impl PersistencePredictor {
    pub fn new(margin: f64) -> Self {
        Self { margin, last: None }
    }
}

impl Default for PersistencePredictor {
    fn default() -> Self {
        Self::new(0.1)
    }
}

impl Predictor for PersistencePredictor {
    fn observe(&mut self, stats: WorkloadStats) {
        self.last = Some(stats);
    }

    fn forecast(&mut self) -> Result<Forecast, PredictError> {
        let last = self.last.ok_or(PredictError::InsufficientHistory { needed: 1, got: 0 })?;
        Ok(Forecast { rate: last.mean_rate * (1.0 + self.margin), scv: last.scv })
    }
}

/// Least-squares line over the last `horizon` windows, extrapolated one
/// window ahead and floored at zero.
#[derive(Debug, Clone)]
pub struct LinearTrendPredictor {
    horizon: usize,
    history: Vec<WorkloadStats>,
}

impl LinearTrendPredictor {
    pub fn new(horizon: usize) -> Self {
        Self { horizon: horizon.max(3), history: Vec::new() }
    }
}

impl Default for LinearTrendPredictor {
    fn default() -> Self {
        Self::new(6)
    }
}

impl Predictor for LinearTrendPredictor {
    fn observe(&mut self, stats: WorkloadStats) {
        self.history.push(stats);
        if self.history.len() > self.horizon {
            self.history.remove(0);
        }
    }

    fn forecast(&mut self) -> Result<Forecast, PredictError> {
        let n = self.history.len();
        if n < 3 {
            return Err(PredictError::InsufficientHistory { needed: 3, got: n });
        }
        // Fit rate = a + b*i over i = 0..n, predict at i = n.
        let nf = n as f64;
        let sum_i = nf * (nf - 1.0) / 2.0;
        let sum_ii = (nf - 1.0) * nf * (2.0 * nf - 1.0) / 6.0;
        let sum_y: f64 = self.history.iter().map(|s| s.mean_rate).sum();
        let sum_iy: f64 =
            self.history.iter().enumerate().map(|(i, s)| i as f64 * s.mean_rate).sum();
        let denom = nf * sum_ii - sum_i * sum_i;
        let b = (nf * sum_iy - sum_i * sum_y) / denom;
        let a = (sum_y - b * sum_i) / nf;
        let rate = (a + b * nf).max(0.0);
        Ok(Forecast { rate, scv: self.history[n - 1].scv })
    }
}

/// Reads the true peak of the next window from the profile and corrupts it
/// with relative Gaussian noise; a stand-in for a trained forecaster with
/// a controllable error level.
pub struct NoisyOraclePredictor {
    profile: ArrivalProfile,
    window: f64,
    sub_window: f64,
    noise: Normal<f64>,
    rng: StdRng,
    now: f64,
    last_scv: f64,
}

impl NoisyOraclePredictor {
    pub fn new(
        profile: ArrivalProfile,
        window: f64,
        sub_window: f64,
        rel_error: f64,
        seed: u64,
    ) -> Self {
        Self {
            profile,
            window,
            sub_window,
            noise: Normal::new(0.0, rel_error.max(0.0)).expect("finite sigma"),
            rng: StdRng::seed_from_u64(seed),
            now: 0.0,
            last_scv: 1.0,
        }
    }
}

impl Predictor for NoisyOraclePredictor {
    fn observe(&mut self, stats: WorkloadStats) {
        self.now += stats.window;
        self.last_scv = stats.scv;
    }

    fn forecast(&mut self) -> Result<Forecast, PredictError> {
        // Peeks one window ahead of the windows observed so far.
        let truth = self.profile.peak_rate(self.now, self.now + self.window, self.sub_window);
        let eps = self.noise.sample(&mut self.rng);
        Ok(Forecast { rate: (truth * (1.0 + eps)).max(0.0), scv: self.last_scv })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn window(rate: f64) -> WorkloadStats {
        WorkloadStats { mean_rate: rate, scv: 1.0, window: 60.0 }
    }

    #[test]
    fn persistence_applies_margin() {
        let mut p = PersistencePredictor::new(0.1);
        assert!(p.forecast().is_err());
        p.observe(window(1000.0));
        assert_relative_eq!(p.forecast().unwrap().rate, 1100.0);
    }

    #[test]
    fn linear_is_flat_on_constant_history() {
        let mut p = LinearTrendPredictor::new(6);
        for _ in 0..6 {
            p.observe(window(250.0));
        }
        assert_relative_eq!(p.forecast().unwrap().rate, 250.0, max_relative = 1e-12);
    }

    #[test]
    fn linear_recovers_exact_ramp() {
        let mut p = LinearTrendPredictor::new(6);
        for i in 0..6 {
            p.observe(window(100.0 + 20.0 * f64::from(i)));
        }
        // Next point on the ramp: 100 + 20*6.
        assert_relative_eq!(p.forecast().unwrap().rate, 220.0, max_relative = 1e-9);
    }

    #[test]
    fn linear_needs_three_windows() {
        let mut p = LinearTrendPredictor::new(6);
        p.observe(window(10.0));
        p.observe(window(10.0));
        assert_eq!(p.forecast(), Err(PredictError::InsufficientHistory { needed: 3, got: 2 }));
    }

    #[test]
    fn linear_forecast_floors_at_zero() {
        let mut p = LinearTrendPredictor::new(3);
        for rate in [300.0, 150.0, 0.0] {
            p.observe(window(rate));
        }
        assert_eq!(p.forecast().unwrap().rate, 0.0);
    }

    #[test]
    fn noisy_oracle_with_zero_noise_is_exact() {
        let profile = ArrivalProfile::constant(500.0);
        let mut p = NoisyOraclePredictor::new(profile, 600.0, 60.0, 0.0, 1);
        p.observe(window(480.0));
        assert_relative_eq!(p.forecast().unwrap().rate, 500.0);
    }
}
