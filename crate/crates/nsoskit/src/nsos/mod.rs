//! Domain model of the slicing orchestration system: entities, scenarios,
//! allocations and the end-to-end response-time computation.

mod allocation;
mod entities;
mod model;
mod scenario;

pub use allocation::{balanced_split, Allocation, AllocationError};
pub use entities::{enumerate_entities, EntityId, EntityKind, KindMap};
pub(crate) use model::response_parts_from_flow;
pub use model::{
    entity_transition_matrix, expand_to_instances, response_time, response_time_with,
    visit_ratio_map, visit_ratios, zero_load_response_time, EntityMatrix, ExpandedNetwork,
    NsosError, ResponseReport,
};
pub use scenario::{NsosScenario, ScenarioError};

#[cfg(test)]
pub(crate) use scenario::test_scenario;
