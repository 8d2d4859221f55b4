//! The provisioning loop co-simulated with the call-flow simulator.

use thiserror::Error;

use crate::des::{ArrivalProfile, NsosFlowSim, ProfileError, ServiceFamily, SimConfig, SimError};
use crate::dimensioning::{heuristic, max_sustainable_rate, DimensioningError, NsosModel};
use crate::nsos::{Allocation, KindMap, NsosScenario};

use super::predictor::{Forecast, Predictor, WorkloadStats};
use super::{reactive_trigger, ScaleAction};

#[derive(Debug, Clone, PartialEq)]
pub struct DrpConfig {
    /// Simulated seconds the loop runs.
    pub duration: f64,
    /// Provisioning decision period (the prediction horizon), seconds.
    pub control_interval: f64,
    /// Monitoring/reactive cadence, seconds; must divide into the control
    /// interval reasonably and be smaller than it.
    pub monitor_window: f64,
    /// Delay until a scale-out becomes active capacity, seconds.
    pub boot_delay: f64,
    /// Reactive scale-out threshold on (measured - predicted) / measured.
    pub scale_out_threshold: f64,
    /// Reactive scale-in threshold (negative).
    pub scale_in_threshold: f64,
    /// Token-bucket depth; when absent, one second's worth of tokens.
    pub bucket_depth: Option<f64>,
    pub seed: u64,
    pub service_dist: KindMap<ServiceFamily>,
}

impl DrpConfig {
    pub fn new(duration: f64, seed: u64) -> Self {
        Self {
            duration,
            control_interval: 600.0,
            monitor_window: 60.0,
            boot_delay: 82.0,
            scale_out_threshold: 0.05,
            scale_in_threshold: -0.5,
            bucket_depth: None,
            seed,
            service_dist: KindMap::uniform(ServiceFamily::Gamma),
        }
    }

    fn validate(&self) -> Result<(), DrpError> {
        if !(self.monitor_window > 0.0 && self.control_interval > self.monitor_window) {
            return Err(DrpError::BadConfig(
                "control_interval must exceed monitor_window > 0".into(),
            ));
        }
        let ratio = self.control_interval / self.monitor_window;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 2.0 {
            return Err(DrpError::BadConfig(
                "control_interval must be an integer multiple (>= 2) of monitor_window".into(),
            ));
        }
        let spans = self.duration / self.control_interval;
        if (spans - spans.round()).abs() > 1e-9 || spans.round() < 1.0 {
            return Err(DrpError::BadConfig(
                "duration must be an integer multiple of control_interval".into(),
            ));
        }
        if self.boot_delay < 0.0 || self.scale_out_threshold < 0.0 || self.scale_in_threshold > 0.0
        {
            return Err(DrpError::BadConfig("invalid delay or thresholds".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DrpError {
    #[error("invalid control config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Dimensioning(#[from] DimensioningError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleKind {
    Out,
    In,
}

/// One applied scaling decision, for latency assertions and audit output.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleEvent {
    pub requested_at: f64,
    pub effective_at: f64,
    pub kind: ScaleKind,
    /// Target cores per entity decided at request time.
    pub target: Vec<u32>,
    /// Whether the reactive path (not the periodic one) asked for it.
    pub reactive: bool,
}

/// One control window of the run.
#[derive(Debug, Clone, PartialEq)]
pub struct DrpWindow {
    pub start: f64,
    pub end: f64,
    /// Realized mean offered rate over the window.
    pub actual_rate: f64,
    /// Realized peak (max of monitor-window means).
    pub actual_peak_rate: f64,
    /// Realized interarrival SCV over the window.
    pub actual_scv: f64,
    /// Forecast this window was provisioned for.
    pub predicted_rate: f64,
    pub predicted_scv: f64,
    /// Target allocation decided at the window start.
    pub target_cores: Vec<u32>,
    /// Active cores per entity at the window end.
    pub active_cores: Vec<u32>,
    pub active_total_start: u32,
    pub active_total_end: u32,
    pub capacity_changed_mid_window: bool,
    /// Dimensioning hit the core budget without meeting the objective.
    pub infeasible: bool,
    pub offered: u64,
    pub admitted: u64,
    pub rejected: u64,
    pub completed: u64,
    pub mean_response: Option<f64>,
    pub response_ci95: Option<f64>,
    pub rejection_fraction: f64,
    /// Largest policer token rate in effect during the window.
    pub policer_rate_max: f64,
    pub policer_depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrpTimeline {
    pub windows: Vec<DrpWindow>,
    pub scale_events: Vec<ScaleEvent>,
    pub total_offered: u64,
    pub total_rejected: u64,
}

impl DrpTimeline {
    pub fn total_rejection_fraction(&self) -> f64 {
        if self.total_offered == 0 {
            0.0
        } else {
            self.total_rejected as f64 / self.total_offered as f64
        }
    }
}

/// Scaler bookkeeping: the active allocation, the latest decided target
/// and not-yet-booted scale-outs.
struct Scaler {
    active: Vec<u32>,
    target: Vec<u32>,
    pending: Vec<(f64, Vec<u32>)>,
    boot_delay: f64,
}

impl Scaler {
    fn new(initial: Vec<u32>, boot_delay: f64) -> Self {
        Self { active: initial.clone(), target: initial, pending: Vec::new(), boot_delay }
    }

    /// Applies a decision at time `t`. Shrinks are immediate, growth is
    /// queued until `t + boot_delay`. Returns true when the active
    /// allocation changed right away.
    fn decide(&mut self, t: f64, target: Vec<u32>) -> (bool, Option<f64>) {
        let mut shrunk = false;
        for (active, &goal) in self.active.iter_mut().zip(&target) {
            if goal < *active {
                *active = goal;
                shrunk = true;
            }
        }
        let needs_boot = self.active.iter().zip(&target).any(|(&active, &goal)| goal > active);
        self.target = target;
        if needs_boot {
            let ready = t + self.boot_delay;
            self.pending.push((ready, self.target.clone()));
            (shrunk, Some(ready))
        } else {
            self.pending.clear();
            (shrunk, None)
        }
    }

    fn next_activation(&self) -> Option<f64> {
        self.pending.iter().map(|(t, _)| *t).min_by(|a, b| a.total_cmp(b))
    }

    /// Activates every pending scale-out due by `t`; newer targets cap the
    /// activation (a later scale-in cancels cores that never booted).
    fn activate_due(&mut self, t: f64) -> bool {
        let mut changed = false;
        let mut due: Vec<(f64, Vec<u32>)> = Vec::new();
        self.pending.retain(|(ready, cores)| {
            if *ready <= t {
                due.push((*ready, cores.clone()));
                false
            } else {
                true
            }
        });
        due.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, cores) in due {
            for ((active, &booted), &goal) in self.active.iter_mut().zip(&cores).zip(&self.target) {
                let reachable = booted.min(goal);
                if reachable > *active {
                    *active = reachable;
                    changed = true;
                }
            }
        }
        changed
    }

    fn total_active(&self) -> u32 {
        self.active.iter().sum()
    }
}

/// Runs the full closed loop and returns the per-window timeline.
pub fn run_drp_loop(
    scenario: &NsosScenario,
    profile: &ArrivalProfile,
    predictor: &mut dyn Predictor,
    config: &DrpConfig,
) -> Result<DrpTimeline, DrpError> {
    config.validate()?;
    profile.validate()?;

    let dimension = |rate: f64, scv: f64| -> Result<(Vec<u32>, bool), DrpError> {
        let sized = scenario.with_external(rate.max(1e-9), scv.max(0.0));
        let model = NsosModel::new(&sized);
        let result = heuristic(&model, sized.slo, sized.core_budget)?;
        Ok((result.cores, !result.feasible))
    };

    let sustainable = |cores: &[u32]| -> f64 {
        let allocation = Allocation::balanced(scenario, cores).expect("core vector length");
        max_sustainable_rate(scenario, &allocation).max_rate
    };

    // Cold start: provision for the profile's announced initial rate.
    let initial_forecast = Forecast { rate: profile.rate_at(0.0).max(1e-9), scv: scenario.ext_scv };
    let (initial_cores, mut infeasible) = dimension(initial_forecast.rate, initial_forecast.scv)?;

    let mut sim_config = SimConfig::new(config.duration, 0.0, config.seed);
    sim_config.service_dist = config.service_dist;
    let initial_rate = sustainable(&initial_cores);
    let depth = config.bucket_depth.unwrap_or_else(|| initial_rate.ceil().max(1.0));
    let mut sim = NsosFlowSim::new(
        scenario,
        &initial_cores,
        profile.clone(),
        &sim_config,
        Some((initial_rate, depth)),
    )?;

    let mut scaler = Scaler::new(initial_cores.clone(), config.boot_delay);
    let mut forecast = initial_forecast;
    let mut target = initial_cores;
    let mut policer_rate = initial_rate;
    let mut policer_rate_max = initial_rate;

    let mut windows: Vec<DrpWindow> = Vec::new();
    let mut scale_events: Vec<ScaleEvent> = Vec::new();
    let mut submeans: Vec<f64> = Vec::new();
    let mut acc: Option<crate::des::WindowStats> = None;
    let mut window_start = 0.0;
    let mut active_total_start = scaler.total_active();
    let mut capacity_changed = false;
    let mut total_offered = 0u64;
    let mut total_rejected = 0u64;

    let monitors_per_control = (config.control_interval / config.monitor_window).round() as u64;
    let total_monitors = (config.duration / config.monitor_window).round() as u64;
    let eps = 1e-9;

    for monitor_idx in 1..=total_monitors {
        let monitor_t = monitor_idx as f64 * config.monitor_window;
        let at_control_boundary = monitor_idx % monitors_per_control == 0;
        let last_boundary = monitor_idx == total_monitors;

        // Activations strictly before the next monitor boundary.
        while let Some(ready) = scaler.next_activation() {
            if ready >= monitor_t - eps {
                break;
            }
            sim.run_until(ready);
            if scaler.activate_due(ready) {
                sim.set_capacity(&scaler.active);
                policer_rate = sustainable(&scaler.active);
                policer_rate_max = policer_rate_max.max(policer_rate);
                sim.set_policer_rate(policer_rate);
                capacity_changed = true;
            }
        }

        sim.run_until(monitor_t);
        if scaler.activate_due(monitor_t) {
            sim.set_capacity(&scaler.active);
            policer_rate = sustainable(&scaler.active);
            policer_rate_max = policer_rate_max.max(policer_rate);
            sim.set_policer_rate(policer_rate);
            capacity_changed = true;
        }
        if last_boundary {
            // Arrivals have ended; let in-flight requests finish so the
            // final window accounts for every admitted request.
            sim.drain();
        }

        let mut w = sim.take_window();
        if last_boundary {
            w.end = config.duration;
        }
        submeans.push(w.mean_rate());
        match &mut acc {
            Some(acc) => acc.merge(&w),
            None => acc = Some(w),
        }

        // Reactive deviation check every monitor window (skipped right at a
        // control boundary where the periodic path takes over anyway).
        if !at_control_boundary && w.mean_rate() > 0.0 {
            let action = reactive_trigger(
                w.mean_rate(),
                forecast.rate,
                config.scale_out_threshold,
                config.scale_in_threshold,
            );
            if action != ScaleAction::None {
                let (cores, capped) = dimension(w.mean_rate(), w.interarrival_scv())?;
                infeasible |= capped;
                let (shrunk, ready) = scaler.decide(monitor_t, cores.clone());
                scale_events.push(ScaleEvent {
                    requested_at: monitor_t,
                    effective_at: ready.unwrap_or(monitor_t),
                    kind: if action == ScaleAction::ScaleOut {
                        ScaleKind::Out
                    } else {
                        ScaleKind::In
                    },
                    target: cores,
                    reactive: true,
                });
                if shrunk {
                    sim.set_capacity(&scaler.active);
                    policer_rate = sustainable(&scaler.active);
                    policer_rate_max = policer_rate_max.max(policer_rate);
                    sim.set_policer_rate(policer_rate);
                    capacity_changed = true;
                }
                // Future monitor windows compare against what we now
                // provision for, not the stale forecast.
                forecast.rate = w.mean_rate();
                forecast.scv = w.interarrival_scv();
            }
        }

        if at_control_boundary {
            let stats = acc.take().expect("window accumulated");
            let peak = submeans.iter().copied().fold(0.0_f64, f64::max);
            total_offered += stats.offered;
            total_rejected += stats.rejected;
            windows.push(DrpWindow {
                start: window_start,
                end: monitor_t,
                actual_rate: stats.mean_rate(),
                actual_peak_rate: peak,
                actual_scv: stats.interarrival_scv(),
                predicted_rate: forecast.rate,
                predicted_scv: forecast.scv,
                target_cores: target.clone(),
                active_cores: scaler.active.clone(),
                active_total_start,
                active_total_end: scaler.total_active(),
                capacity_changed_mid_window: capacity_changed,
                infeasible,
                offered: stats.offered,
                admitted: stats.admitted,
                rejected: stats.rejected,
                completed: stats.completed,
                mean_response: stats.mean_response(),
                response_ci95: stats.response_ci95(),
                rejection_fraction: stats.rejection_fraction(),
                policer_rate_max,
                policer_depth: depth,
            });

            // Provision the next window, unless the run just ended.
            if !last_boundary {
                predictor.observe(WorkloadStats {
                    mean_rate: peak,
                    scv: stats.interarrival_scv(),
                    window: config.control_interval,
                });
                forecast = predictor.forecast().unwrap_or(forecast);
                let (cores, capped) = dimension(forecast.rate, forecast.scv)?;
                infeasible = capped;
                let grows = cores.iter().zip(&scaler.active).any(|(&goal, &active)| goal > active);
                let (shrunk, ready) = scaler.decide(monitor_t, cores.clone());
                if grows || shrunk {
                    scale_events.push(ScaleEvent {
                        requested_at: monitor_t,
                        effective_at: ready.unwrap_or(monitor_t),
                        kind: if grows { ScaleKind::Out } else { ScaleKind::In },
                        target: cores.clone(),
                        reactive: false,
                    });
                }
                if shrunk {
                    sim.set_capacity(&scaler.active);
                    policer_rate = sustainable(&scaler.active);
                    sim.set_policer_rate(policer_rate);
                }
                target = cores;
            }

            submeans.clear();
            window_start = monitor_t;
            active_total_start = scaler.total_active();
            capacity_changed = false;
            policer_rate_max = policer_rate;
        }
    }

    Ok(DrpTimeline { windows, scale_events, total_offered, total_rejected })
}
