//! Service-time samplers and time-varying arrival generation.

use rand::rngs::StdRng;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Service-time distribution family. The gamma family matches any
/// (rate, scv) pair with scv > 0; exponential and deterministic are the
/// scv = 1 and scv = 0 special cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ServiceFamily {
    Exponential,
    Deterministic,
    #[default]
    Gamma,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("{family:?} is incompatible with scv {scv} (rate {rate})")]
    IncompatibleFamily { family: ServiceFamily, rate: f64, scv: f64 },
}

/// Draws service times with mean `1/rate` and the requested SCV.
#[derive(Debug, Clone)]
pub enum ServiceSampler {
    Exponential(Exp<f64>),
    Deterministic(f64),
    Gamma(Gamma<f64>),
}

impl ServiceSampler {
    pub fn new(rate: f64, scv: f64, family: ServiceFamily) -> Result<Self, SamplerError> {
        let err = SamplerError::IncompatibleFamily { family, rate, scv };
        if rate <= 0.0 || scv < 0.0 {
            return Err(err);
        }
        match family {
            ServiceFamily::Exponential => {
                if (scv - 1.0).abs() > 1e-9 {
                    return Err(err);
                }
                Ok(ServiceSampler::Exponential(Exp::new(rate).expect("rate > 0")))
            }
            ServiceFamily::Deterministic => {
                if scv > 1e-12 {
                    return Err(err);
                }
                Ok(ServiceSampler::Deterministic(1.0 / rate))
            }
            ServiceFamily::Gamma => {
                if scv <= 1e-12 {
                    // Matching a zero-variance target: fall back to constant.
                    return Ok(ServiceSampler::Deterministic(1.0 / rate));
                }
                let shape = 1.0 / scv;
                let scale = scv / rate;
                Ok(ServiceSampler::Gamma(Gamma::new(shape, scale).expect("valid gamma")))
            }
        }
    }

    pub fn sample(&self, rng: &mut StdRng) -> f64 {
        match self {
            ServiceSampler::Exponential(d) => d.sample(rng),
            ServiceSampler::Deterministic(v) => *v,
            ServiceSampler::Gamma(d) => d.sample(rng),
        }
    }
}

/// Interarrival process family for external arrivals. The gamma renewal
/// family matches a target interarrival SCV; segment boundaries restart
/// the renewal, so it is meant for constant-rate profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InterarrivalFamily {
    #[default]
    Poisson,
    Deterministic,
    Gamma {
        scv: f64,
    },
}

/// One piece of a piecewise-constant rate profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSegment {
    /// Segment start time, seconds.
    pub start: f64,
    /// Arrival rate from `start` on, per second.
    pub rate: f64,
}

/// Piecewise-constant arrival-rate profile. The last segment's rate holds
/// forever; a constant profile is a single segment starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalProfile {
    pub segments: Vec<ProfileSegment>,
    #[serde(default)]
    pub family: InterarrivalFamily,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("profile needs at least one segment starting at t = 0")]
    Empty,
    #[error("segment starts must increase and rates must be nonnegative")]
    Malformed,
}

impl ArrivalProfile {
    pub fn constant(rate: f64) -> Self {
        Self {
            segments: vec![ProfileSegment { start: 0.0, rate }],
            family: InterarrivalFamily::Poisson,
        }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let first = self.segments.first().ok_or(ProfileError::Empty)?;
        if first.start != 0.0 {
            return Err(ProfileError::Empty);
        }
        let increasing = self.segments.windows(2).all(|w| w[0].start < w[1].start);
        if !increasing || self.segments.iter().any(|s| s.rate < 0.0 || !s.rate.is_finite()) {
            return Err(ProfileError::Malformed);
        }
        if let InterarrivalFamily::Gamma { scv } = self.family {
            if !(scv > 0.0 && scv.is_finite()) {
                return Err(ProfileError::Malformed);
            }
        }
        Ok(())
    }

    /// Constant-rate renewal profile with the given interarrival SCV
    /// (exponential when scv is 1).
    pub fn constant_renewal(rate: f64, scv: f64) -> Self {
        let family = if (scv - 1.0).abs() < 1e-12 {
            InterarrivalFamily::Poisson
        } else {
            InterarrivalFamily::Gamma { scv }
        };
        Self { segments: vec![ProfileSegment { start: 0.0, rate }], family }
    }

    fn segment_index(&self, t: f64) -> usize {
        match self.segments.binary_search_by(|s| s.start.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        }
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        self.segments[self.segment_index(t)].rate
    }

    /// Next arrival strictly after `t`, or `None` when the remaining
    /// profile is all-zero. Exact for the Poisson family: an exponential
    /// draw that crosses a segment boundary restarts at the boundary.
    pub fn next_arrival(&self, t: f64, rng: &mut StdRng) -> Option<f64> {
        let mut t = t;
        let mut idx = self.segment_index(t);
        loop {
            let rate = self.segments[idx].rate;
            let seg_end = self.segments.get(idx + 1).map(|s| s.start).unwrap_or(f64::INFINITY);
            if rate <= 0.0 {
                if idx + 1 >= self.segments.len() {
                    return None;
                }
                idx += 1;
                t = seg_end;
                continue;
            }
            let dt = match self.family {
                InterarrivalFamily::Poisson => {
                    -rng.random::<f64>().max(f64::MIN_POSITIVE).ln() / rate
                }
                InterarrivalFamily::Deterministic => 1.0 / rate,
                InterarrivalFamily::Gamma { scv } => {
                    Gamma::new(1.0 / scv, scv / rate).expect("valid gamma").sample(rng)
                }
            };
            if t + dt <= seg_end {
                return Some(t + dt);
            }
            if idx + 1 >= self.segments.len() {
                return Some(t + dt);
            }
            idx += 1;
            t = seg_end;
        }
    }

    /// Mean rate over `[a, b)` from the piecewise-constant function.
    pub fn mean_rate(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut acc = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let seg_end = self.segments.get(i + 1).map(|s| s.start).unwrap_or(f64::INFINITY);
            let lo = seg.start.max(a);
            let hi = seg_end.min(b);
            if hi > lo {
                acc += seg.rate * (hi - lo);
            }
        }
        // Anything past the last segment keeps the last rate.
        acc / (b - a)
    }

    /// Peak demand over `[a, b)`: the largest mean rate among consecutive
    /// sub-windows of length `sub`.
    pub fn peak_rate(&self, a: f64, b: f64, sub: f64) -> f64 {
        let mut peak: f64 = 0.0;
        let mut lo = a;
        while lo < b - 1e-12 {
            let hi = (lo + sub).min(b);
            peak = peak.max(self.mean_rate(lo, hi));
            lo = hi;
        }
        peak
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn moments(samples: &[f64]) -> (f64, f64) {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var / (mean * mean))
    }

    #[test]
    fn gamma_sampler_matches_two_moments() {
        let sampler = ServiceSampler::new(10_000.0, 0.65, ServiceFamily::Gamma).unwrap();
        match &sampler {
            ServiceSampler::Gamma(_) => {}
            other => panic!("expected gamma, got {other:?}"),
        }
        let mut rng = StdRng::seed_from_u64(7);
        let samples: Vec<f64> = (0..1_000_000).map(|_| sampler.sample(&mut rng)).collect();
        let (mean, scv) = moments(&samples);
        assert!((mean - 1e-4).abs() / 1e-4 < 0.01, "mean off: {mean}");
        assert!((scv - 0.65).abs() / 0.65 < 0.01, "scv off: {scv}");
    }

    #[test]
    fn exponential_and_deterministic_cases() {
        let exp = ServiceSampler::new(1.0, 1.0, ServiceFamily::Exponential).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        let samples: Vec<f64> = (0..200_000).map(|_| exp.sample(&mut rng)).collect();
        let (mean, scv) = moments(&samples);
        assert!((mean - 1.0).abs() < 0.01);
        assert!((scv - 1.0).abs() < 0.02);

        let det = ServiceSampler::new(2.0, 0.0, ServiceFamily::Deterministic).unwrap();
        assert_eq!(det.sample(&mut rng), 0.5);
    }

    #[test]
    fn incompatible_families_rejected() {
        assert!(ServiceSampler::new(1.0, 0.5, ServiceFamily::Exponential).is_err());
        assert!(ServiceSampler::new(1.0, 0.5, ServiceFamily::Deterministic).is_err());
        assert!(ServiceSampler::new(0.0, 1.0, ServiceFamily::Gamma).is_err());
    }

    #[test]
    fn profile_validation() {
        assert!(ArrivalProfile::constant(5.0).validate().is_ok());
        let bad = ArrivalProfile {
            segments: vec![ProfileSegment { start: 1.0, rate: 2.0 }],
            family: InterarrivalFamily::Poisson,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn poisson_rate_is_respected_per_segment() {
        let profile = ArrivalProfile {
            segments: vec![
                ProfileSegment { start: 0.0, rate: 100.0 },
                ProfileSegment { start: 50.0, rate: 400.0 },
            ],
            family: InterarrivalFamily::Poisson,
        };
        let mut rng = StdRng::seed_from_u64(11);
        let mut t = 0.0;
        let (mut first, mut second) = (0u32, 0u32);
        while let Some(next) = profile.next_arrival(t, &mut rng) {
            if next > 100.0 {
                break;
            }
            if next < 50.0 {
                first += 1;
            } else {
                second += 1;
            }
            t = next;
        }
        let lo = f64::from(first);
        let hi = f64::from(second);
        assert!((lo / 50.0 - 100.0).abs() < 10.0, "segment 1 rate {lo}");
        assert!((hi / 50.0 - 400.0).abs() < 20.0, "segment 2 rate {hi}");
    }

    #[test]
    fn mean_and_peak_rates() {
        let profile = ArrivalProfile {
            segments: vec![
                ProfileSegment { start: 0.0, rate: 10.0 },
                ProfileSegment { start: 10.0, rate: 30.0 },
            ],
            family: InterarrivalFamily::Poisson,
        };
        assert_eq!(profile.rate_at(5.0), 10.0);
        assert_eq!(profile.rate_at(15.0), 30.0);
        assert_eq!(profile.mean_rate(0.0, 20.0), 20.0);
        assert_eq!(profile.peak_rate(0.0, 20.0, 5.0), 30.0);
        // Past the last segment the last rate holds.
        assert_eq!(profile.mean_rate(20.0, 40.0), 30.0);
    }
}
