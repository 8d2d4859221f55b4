//! Scenario description: domains, traffic shares, service statistics,
//! SLO and resource caps. Loaded from JSON with the field names below;
//! rates are per second and times are in seconds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::entities::{EntityKind, KindMap};

fn default_rae_in_flow() -> bool {
    false
}

fn default_omit_dssdnc() -> bool {
    false
}

/// Description of the orchestration system to analyze.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsosScenario {
    /// Number of administrative domains, D >= 1.
    pub domains: u32,
    /// Traffic share per domain; must sum to one.
    pub shares: Vec<f64>,
    /// Service rate per processing instance for each entity kind, msgs/s.
    pub service_rate: KindMap<f64>,
    /// SCV of the service time for each entity kind.
    pub service_scv: KindMap<f64>,
    /// Cap on cores per single entity instance.
    pub max_cores_per_instance: KindMap<u32>,
    /// Mean-response-time objective, seconds.
    pub slo: f64,
    /// Total core budget.
    pub core_budget: u32,
    /// External arrival rate of orchestration requests at the GO, SORs/s.
    pub ext_rate: f64,
    /// SCV of the external arrival process.
    pub ext_scv: f64,
    /// Route requests through the resource awareness engine (adds a
    /// GO -> RAE -> GO hop and one more GO visit).
    #[serde(default = "default_rae_in_flow")]
    pub rae_in_flow: bool,
    /// Compose the total response time without the per-domain SDN
    /// controller term. Off by default; kept for comparison studies.
    #[serde(default = "default_omit_dssdnc")]
    pub omit_dssdnc_in_total: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("domains must be >= 1")]
    NoDomains,
    #[error("shares has {got} entries, expected {expected}")]
    ShareCount { got: usize, expected: usize },
    #[error("shares must be nonnegative and sum to 1 (sum = {sum})")]
    BadShares { sum: f64 },
    #[error("{kind}: {what} must be positive")]
    NonPositive { kind: EntityKind, what: &'static str },
    #[error("{kind}: service_scv must be nonnegative")]
    NegativeScv { kind: EntityKind },
    #[error("ext_rate must be positive and ext_scv nonnegative")]
    BadExternal,
    #[error("slo {slo} does not exceed the zero-load service demand {demand}")]
    SloBelowServiceDemand { slo: f64, demand: f64 },
    #[error("core_budget must be >= 1")]
    NoBudget,
}

impl NsosScenario {
    /// Validates every invariant; call after deserializing.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.domains < 1 {
            return Err(ScenarioError::NoDomains);
        }
        if self.shares.len() != self.domains as usize {
            return Err(ScenarioError::ShareCount {
                got: self.shares.len(),
                expected: self.domains as usize,
            });
        }
        let sum: f64 = self.shares.iter().sum();
        if self.shares.iter().any(|&a| a < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(ScenarioError::BadShares { sum });
        }
        for kind in EntityKind::ALL {
            if self.service_rate.get(kind) <= 0.0 {
                return Err(ScenarioError::NonPositive { kind, what: "service_rate" });
            }
            if self.max_cores_per_instance.get(kind) < 1 {
                return Err(ScenarioError::NonPositive { kind, what: "max_cores_per_instance" });
            }
            if self.service_scv.get(kind) < 0.0 {
                return Err(ScenarioError::NegativeScv { kind });
            }
        }
        if self.ext_rate <= 0.0 || self.ext_scv < 0.0 {
            return Err(ScenarioError::BadExternal);
        }
        if self.core_budget < 1 {
            return Err(ScenarioError::NoBudget);
        }
        let demand = self.total_service_demand();
        if self.slo <= demand {
            return Err(ScenarioError::SloBelowServiceDemand { slo: self.slo, demand });
        }
        Ok(())
    }

    /// A copy with a different external arrival descriptor.
    pub fn with_external(&self, rate: f64, scv: f64) -> Self {
        let mut s = self.clone();
        s.ext_rate = rate;
        s.ext_scv = scv;
        s
    }

    /// Sum over entities of visits times mean service time; a lower bound
    /// on the response time that ignores the parallel reservation branches.
    pub fn total_service_demand(&self) -> f64 {
        super::model::visit_ratio_map(self)
            .iter()
            .map(|(entity, v)| v / self.service_rate.get(entity.kind))
            .sum()
    }
}

#[cfg(test)]
pub(crate) fn test_scenario(domains: u32) -> NsosScenario {
    NsosScenario {
        domains,
        shares: vec![1.0 / f64::from(domains); domains as usize],
        service_rate: KindMap::uniform(10_000.0),
        service_scv: KindMap::uniform(0.65),
        max_cores_per_instance: KindMap::uniform(8),
        slo: 0.002,
        core_budget: 500,
        ext_rate: 5_000.0,
        ext_scv: 1.0,
        rae_in_flow: false,
        omit_dssdnc_in_total: false,
    }
}
