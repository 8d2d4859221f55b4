//! Discrete-event simulation: the ground-truth oracle for the analytic
//! model and the engine under the auto-scaling control loop.

mod engine;
pub mod flow;
pub mod generic;
mod sampling;

pub use flow::{
    simulate_scenario, simulate_scenario_traced, NodeStats, NsosFlowSim, SimConfig, SimError,
    SimStats, SorTrace, WindowStats,
};
pub use generic::{simulate_network, GenericNodeStats, GenericSimConfig, GenericSimError};
pub use sampling::{
    ArrivalProfile, InterarrivalFamily, ProfileError, ProfileSegment, SamplerError, ServiceFamily,
    ServiceSampler,
};
