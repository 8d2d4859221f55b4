//! Core-to-entity allocations and their instance layouts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::entities::{enumerate_entities, EntityId};
use super::scenario::NsosScenario;

/// Per-entity core counts together with the derived instance layout.
///
/// An entity with `m` cores and an instance cap of `m_max` runs
/// `ceil(m / m_max)` instances; the cores are spread as evenly as possible,
/// so per-instance counts differ by at most one. Entities with zero cores
/// (idle entities such as an out-of-flow RAE) contribute no instances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    /// Entity order matches [`enumerate_entities`] for the scenario.
    pub entities: Vec<EntityId>,
    /// Total cores per entity.
    pub cores: Vec<u32>,
    /// Instance count per entity.
    pub instances: Vec<u32>,
    /// Cores of each instance, per entity; each inner list sums to the
    /// entity's core count.
    pub per_instance_cores: Vec<Vec<u32>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error("allocation has {got} core entries, expected {expected}")]
    WrongLength { got: usize, expected: usize },
}

/// Splits `cores` into `ceil(cores / cap)` buckets differing by at most one.
pub fn balanced_split(cores: u32, cap: u32) -> Vec<u32> {
    if cores == 0 {
        return Vec::new();
    }
    let instances = cores.div_ceil(cap);
    let base = cores / instances;
    let rem = cores % instances;
    (0..instances).map(|i| if i < rem { base + 1 } else { base }).collect()
}

impl Allocation {
    /// Builds the balanced instance layout for per-entity core totals.
    pub fn balanced(scenario: &NsosScenario, cores: &[u32]) -> Result<Self, AllocationError> {
        let entities = enumerate_entities(scenario.domains);
        if cores.len() != entities.len() {
            return Err(AllocationError::WrongLength {
                got: cores.len(),
                expected: entities.len(),
            });
        }
        let mut instances = Vec::with_capacity(entities.len());
        let mut per_instance = Vec::with_capacity(entities.len());
        for (entity, &m) in entities.iter().zip(cores) {
            let cap = scenario.max_cores_per_instance.get(entity.kind);
            let split = balanced_split(m, cap);
            instances.push(split.len() as u32);
            per_instance.push(split);
        }
        Ok(Self { entities, cores: cores.to_vec(), instances, per_instance_cores: per_instance })
    }

    pub fn total_cores(&self) -> u32 {
        self.cores.iter().sum()
    }

    /// Total number of queue nodes the allocation expands to.
    pub fn total_instances(&self) -> u32 {
        self.instances.iter().sum()
    }

    pub fn cores_of(&self, entity: EntityId) -> Option<u32> {
        self.entities.iter().position(|&e| e == entity).map(|i| self.cores[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nsos::scenario::test_scenario;

    #[test]
    fn split_is_balanced_and_capped() {
        assert_eq!(balanced_split(0, 4), Vec::<u32>::new());
        assert_eq!(balanced_split(3, 4), vec![3]);
        assert_eq!(balanced_split(4, 4), vec![4]);
        assert_eq!(balanced_split(5, 4), vec![3, 2]);
        assert_eq!(balanced_split(9, 4), vec![3, 3, 3]);
        assert_eq!(balanced_split(10, 4), vec![4, 3, 3]);
    }

    #[test]
    fn split_invariants_hold_over_a_sweep() {
        for cap in 1..=15u32 {
            for cores in 0..=60u32 {
                let split = balanced_split(cores, cap);
                assert_eq!(split.len() as u32, cores.div_ceil(cap));
                assert_eq!(split.iter().sum::<u32>(), cores);
                if let (Some(&max), Some(&min)) = (split.iter().max(), split.iter().min()) {
                    assert!(max - min <= 1, "unbalanced split {split:?}");
                    assert!(max <= cap && min >= 1);
                }
            }
        }
    }

    #[test]
    fn allocation_instance_counts_match() {
        let scenario = test_scenario(1);
        let cores = vec![17, 1, 0, 9, 8, 3, 8, 3, 3];
        let alloc = Allocation::balanced(&scenario, &cores).unwrap();
        assert_eq!(alloc.total_cores(), 52);
        // cap is 8 for every kind in the test scenario
        assert_eq!(alloc.instances, vec![3, 1, 0, 2, 1, 1, 1, 1, 1]);
        assert_eq!(alloc.total_instances(), 11);
        assert_eq!(alloc.per_instance_cores[0], vec![6, 6, 5]);
    }

    #[test]
    fn wrong_length_rejected() {
        let scenario = test_scenario(2);
        assert!(matches!(
            Allocation::balanced(&scenario, &[1, 2, 3]),
            Err(AllocationError::WrongLength { got: 3, expected: 15 })
        ));
    }
}
