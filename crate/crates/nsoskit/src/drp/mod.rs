//! Closed-loop dynamic resource provisioning.
//!
//! Every control interval the workload monitor reports the last window,
//! the predictor forecasts the next one, the dimensioning algorithm turns
//! the forecast into a target allocation, and the scaler applies it —
//! scale-ins immediately, scale-outs after the instantiation delay. In
//! between, a reactive check runs every monitoring window and re-dimensions
//! against the measured load when it deviates too far from the forecast.
//! A token bucket polices the entrance; its rate is pinned to the maximum
//! load the *active* allocation can sustain within the objective.

mod control;
mod policer;
mod predictor;

pub use control::{
    run_drp_loop, DrpConfig, DrpError, DrpTimeline, DrpWindow, ScaleEvent, ScaleKind,
};
pub use policer::TokenBucket;
pub use predictor::{
    Forecast, LinearTrendPredictor, NoisyOraclePredictor, PersistencePredictor, PredictError,
    Predictor, WorkloadStats,
};

/// Outcome of the reactive deviation check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleAction {
    None,
    ScaleOut,
    ScaleIn,
}

/// Compares the measured rate against the forecast: fires a scale-out when
/// the forecast underestimates by at least `out_threshold` (relative to the
/// measurement), a scale-in when it overestimates past `in_threshold`
/// (a negative number).
pub fn reactive_trigger(
    current: f64,
    predicted: f64,
    out_threshold: f64,
    in_threshold: f64,
) -> ScaleAction {
    if current <= 0.0 {
        return ScaleAction::None;
    }
    let deviation = (current - predicted) / current;
    if deviation >= out_threshold {
        ScaleAction::ScaleOut
    } else if deviation <= in_threshold {
        ScaleAction::ScaleIn
    } else {
        ScaleAction::None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigger_thresholds() {
        // Underestimated by ~5.7%: scale out.
        assert_eq!(reactive_trigger(1060.0, 1000.0, 0.05, -0.5), ScaleAction::ScaleOut);
        // Overestimated by 60%: scale in.
        assert_eq!(reactive_trigger(1000.0, 1600.0, 0.05, -0.5), ScaleAction::ScaleIn);
        // Spot on: nothing.
        assert_eq!(reactive_trigger(1000.0, 1000.0, 0.05, -0.5), ScaleAction::None);
        // Degenerate measurement: nothing.
        assert_eq!(reactive_trigger(0.0, 1000.0, 0.05, -0.5), ScaleAction::None);
    }
}
