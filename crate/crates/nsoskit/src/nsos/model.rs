//! Builds the orchestration-system queueing network and computes its
//! end-to-end mean response time.
//!
//! The message flow per orchestration request: the GO takes the request,
//! consults the SAE (and optionally the RAE), forwards it to one domain's
//! DSO, which forks parallel reservation requests to the DSNFVO/DSVIM and
//! DSRRO/DSeNBs branches, rejoins, drives the domain SDN controller and
//! finally replies through the GO. The two reservation branches form a
//! fork/join subnetwork whose response time is the slower branch's.

use thiserror::Error;

use crate::qna::{self, FlowSolution, QnaError, QueueNode, QueueingNetwork, ScvVariant};

use super::allocation::{Allocation, AllocationError};
use super::entities::{enumerate_entities, EntityId, EntityKind};
use super::scenario::{NsosScenario, ScenarioError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NsosError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error("entity {entity} carries traffic but has no cores allocated")]
    MissingCapacity { entity: EntityId },
    #[error("entity {entity} is unstable (utilization {utilization:.6})")]
    Unstable { entity: EntityId, utilization: f64 },
    #[error(transparent)]
    Qna(QnaError),
}

/// Mean number of visits per request, aligned with [`enumerate_entities`].
pub fn visit_ratios(scenario: &NsosScenario) -> Vec<f64> {
    let entities = enumerate_entities(scenario.domains);
    entities
        .iter()
        .map(|entity| {
            let share = entity.domain.map(|d| scenario.shares[(d - 1) as usize]).unwrap_or(1.0);
            match entity.kind {
                EntityKind::Go => {
                    if scenario.rae_in_flow {
                        4.0
                    } else {
                        3.0
                    }
                }
                EntityKind::Sae => 1.0,
                EntityKind::Rae => {
                    if scenario.rae_in_flow {
                        1.0
                    } else {
                        0.0
                    }
                }
                EntityKind::Dso => 3.0 * share,
                EntityKind::Dsnfvo => 2.0 * share,
                EntityKind::Dsvim => share,
                EntityKind::Dsrro => 2.0 * share,
                EntityKind::Dsenbs => share,
                EntityKind::Dssdnc => share,
            }
        })
        .collect()
}

/// Visit ratios paired with their entity ids.
pub fn visit_ratio_map(scenario: &NsosScenario) -> Vec<(EntityId, f64)> {
    enumerate_entities(scenario.domains).into_iter().zip(visit_ratios(scenario)).collect()
}

/// Entity-level flow-split matrix plus exit mass.
///
/// `matrix[a][b]` is the mean number of messages sent to entity `b` per
/// message processed at entity `a`. The DSO row sums to 4/3: its first
/// processing forks messages to both reservation branches. The join of the
/// two branch replies is carried by the DSNFVO side; the DSRRO-side reply
/// terminates at the join (its 0.5 share appears as exit mass), so the flow
/// balance reproduces the visit ratios exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityMatrix {
    pub entities: Vec<EntityId>,
    pub matrix: Vec<Vec<f64>>,
    pub exit: Vec<f64>,
}

pub fn entity_transition_matrix(scenario: &NsosScenario) -> EntityMatrix {
    let entities = enumerate_entities(scenario.domains);
    let n = entities.len();
    let idx = |kind: EntityKind, domain: Option<u32>| -> usize {
        entities.iter().position(|e| e.kind == kind && e.domain == domain).expect("entity present")
    };

    let mut matrix = vec![vec![0.0; n]; n];
    let mut exit = vec![0.0; n];

    let go = idx(EntityKind::Go, None);
    let sae = idx(EntityKind::Sae, None);
    let rae = idx(EntityKind::Rae, None);

    // Per processed message the GO forwards to the SAE, (optionally) the
    // RAE, the domain DSOs and the requester in equal proportions.
    let go_out = if scenario.rae_in_flow { 0.25 } else { 1.0 / 3.0 };
    matrix[go][sae] = go_out;
    if scenario.rae_in_flow {
        matrix[go][rae] = go_out;
        matrix[rae][go] = 1.0;
    }
    exit[go] = go_out;
    matrix[sae][go] = 1.0;

    for d in 1..=scenario.domains {
        let share = scenario.shares[(d - 1) as usize];
        let dso = idx(EntityKind::Dso, Some(d));
        let nfvo = idx(EntityKind::Dsnfvo, Some(d));
        let vim = idx(EntityKind::Dsvim, Some(d));
        let rro = idx(EntityKind::Dsrro, Some(d));
        let enbs = idx(EntityKind::Dsenbs, Some(d));
        let sdnc = idx(EntityKind::Dssdnc, Some(d));

        matrix[go][dso] = go_out * share;
        // Fork: visit 1 sends to both branches, visit 2 to the SDN
        // controller, visit 3 back to the GO. Coefficients are per
        // processed message (3 per request), so the row sums to 4/3.
        matrix[dso][nfvo] = 1.0 / 3.0;
        matrix[dso][rro] = 1.0 / 3.0;
        matrix[dso][sdnc] = 1.0 / 3.0;
        matrix[dso][go] = 1.0 / 3.0;

        matrix[nfvo][vim] = 0.5;
        matrix[nfvo][dso] = 0.5;
        matrix[vim][nfvo] = 1.0;

        matrix[rro][enbs] = 0.5;
        exit[rro] = 0.5; // branch reply absorbed at the join
        matrix[enbs][rro] = 1.0;

        matrix[sdnc][dso] = 1.0;
    }

    EntityMatrix { entities, matrix, exit }
}

/// The instance-level network produced by [`expand_to_instances`].
#[derive(Debug, Clone)]
pub struct ExpandedNetwork {
    pub network: QueueingNetwork,
    /// Owning entity of each queue node.
    pub node_entities: Vec<EntityId>,
}

/// Expands the entity-level matrix into one queue node per instance.
///
/// Workload splits toward an entity's instances in proportion to their
/// processing capacity, both for internal transitions and for the external
/// arrivals entering the GO.
pub fn expand_to_instances(
    scenario: &NsosScenario,
    entity_matrix: &EntityMatrix,
    allocation: &Allocation,
) -> Result<ExpandedNetwork, NsosError> {
    let visits = visit_ratios(scenario);
    for ((entity, &v), split) in
        entity_matrix.entities.iter().zip(&visits).zip(&allocation.per_instance_cores)
    {
        if v > 0.0 && split.is_empty() {
            return Err(NsosError::MissingCapacity { entity: *entity });
        }
    }

    // node index range per entity
    let mut first_node = Vec::with_capacity(entity_matrix.entities.len());
    let mut node_entities = Vec::new();
    let mut nodes = Vec::new();
    for (e, entity) in entity_matrix.entities.iter().enumerate() {
        first_node.push(nodes.len());
        let mu = scenario.service_rate.get(entity.kind);
        let scv = scenario.service_scv.get(entity.kind);
        for &cores in &allocation.per_instance_cores[e] {
            nodes.push(QueueNode::new(cores, mu, scv));
            node_entities.push(*entity);
        }
    }

    let k = nodes.len();
    let capacity_share = |e: usize, j: usize| -> f64 {
        let split = &allocation.per_instance_cores[e];
        f64::from(split[j]) / f64::from(allocation.cores[e])
    };

    let mut routing = vec![vec![0.0; k]; k];
    for (src_e, row) in entity_matrix.matrix.iter().enumerate() {
        for src_j in 0..allocation.per_instance_cores[src_e].len() {
            let src = first_node[src_e] + src_j;
            for (dst_e, &p) in row.iter().enumerate() {
                if p <= 0.0 {
                    continue;
                }
                for dst_j in 0..allocation.per_instance_cores[dst_e].len() {
                    let dst = first_node[dst_e] + dst_j;
                    routing[src][dst] = p * capacity_share(dst_e, dst_j);
                }
            }
        }
    }

    let mut ext_rate = vec![0.0; k];
    let mut ext_scv = vec![1.0; k];
    let go =
        entity_matrix.entities.iter().position(|e| e.kind == EntityKind::Go).expect("GO present");
    for j in 0..allocation.per_instance_cores[go].len() {
        let f = capacity_share(go, j);
        ext_rate[first_node[go] + j] = scenario.ext_rate * f;
        // Probabilistic thinning of the external stream scales its SCV.
        ext_scv[first_node[go] + j] = 1.0 + f * (scenario.ext_scv - 1.0);
    }

    Ok(ExpandedNetwork {
        network: QueueingNetwork { nodes, routing, ext_rate, ext_scv },
        node_entities,
    })
}

/// End-to-end response time of the system under one allocation.
#[derive(Debug, Clone)]
pub struct ResponseReport {
    /// Mean response time of the whole system, seconds.
    pub total: f64,
    /// Mean response time contributed by each entity.
    pub per_entity: Vec<(EntityId, f64)>,
    /// Per-node solution of the underlying queueing network.
    pub flow: FlowSolution,
    /// Owning entity per node, parallel to the vectors in `flow`.
    pub node_entities: Vec<EntityId>,
}

pub fn response_time(
    scenario: &NsosScenario,
    allocation: &Allocation,
) -> Result<ResponseReport, NsosError> {
    response_time_with(scenario, allocation, ScvVariant::Canonical)
}

pub fn response_time_with(
    scenario: &NsosScenario,
    allocation: &Allocation,
    variant: ScvVariant,
) -> Result<ResponseReport, NsosError> {
    let entity_matrix = entity_transition_matrix(scenario);
    let expanded = expand_to_instances(scenario, &entity_matrix, allocation)?;
    let flow = qna::analyze_network_with(&expanded.network, variant).map_err(|e| match e {
        QnaError::Unstable { node, utilization } => {
            NsosError::Unstable { entity: expanded.node_entities[node], utilization }
        }
        other => NsosError::Qna(other),
    })?;

    let per_entity = per_entity_times(scenario, &entity_matrix, &expanded.node_entities, &flow);
    let total = compose_total(scenario, &per_entity);
    Ok(ResponseReport { total, per_entity, flow, node_entities: expanded.node_entities })
}

/// T_e = sum over the entity's nodes of (W_k + 1/mu_k) V_k with the node
/// visit ratio V_k = lambda_k / lambda_0GO.
fn per_entity_times(
    scenario: &NsosScenario,
    entity_matrix: &EntityMatrix,
    node_entities: &[EntityId],
    flow: &FlowSolution,
) -> Vec<(EntityId, f64)> {
    let mut per_entity: Vec<(EntityId, f64)> =
        entity_matrix.entities.iter().map(|&entity| (entity, 0.0)).collect();
    for (node, &entity) in node_entities.iter().enumerate() {
        let v = flow.rate[node] / scenario.ext_rate;
        let slot = per_entity.iter_mut().find(|(e, _)| *e == entity).expect("entity present");
        slot.1 += flow.node_time[node] * v;
    }
    per_entity
}

/// Total response time: global entities in series, then per domain the DSO,
/// the SDN controller and the slower of the two reservation branches.
fn compose_total(scenario: &NsosScenario, per_entity: &[(EntityId, f64)]) -> f64 {
    let entity_time = |kind: EntityKind, domain: Option<u32>| -> f64 {
        per_entity
            .iter()
            .find(|(e, _)| e.kind == kind && e.domain == domain)
            .map(|(_, t)| *t)
            .unwrap_or(0.0)
    };

    let mut total = entity_time(EntityKind::Go, None)
        + entity_time(EntityKind::Sae, None)
        + entity_time(EntityKind::Rae, None);
    for d in 1..=scenario.domains {
        let reservation = f64::max(
            entity_time(EntityKind::Dsnfvo, Some(d)) + entity_time(EntityKind::Dsvim, Some(d)),
            entity_time(EntityKind::Dsrro, Some(d)) + entity_time(EntityKind::Dsenbs, Some(d)),
        );
        total += entity_time(EntityKind::Dso, Some(d)) + reservation;
        if !scenario.omit_dssdnc_in_total {
            total += entity_time(EntityKind::Dssdnc, Some(d));
        }
    }
    total
}

/// Total response time and per-entity contributions straight from a flow
/// solution; used by callers that already hold the expanded network (the
/// dimensioning inner loop).
pub(crate) fn response_parts_from_flow(
    scenario: &NsosScenario,
    entity_matrix: &EntityMatrix,
    node_entities: &[EntityId],
    flow: &FlowSolution,
) -> (f64, Vec<f64>) {
    let per_entity = per_entity_times(scenario, entity_matrix, node_entities, flow);
    let total = compose_total(scenario, &per_entity);
    (total, per_entity.into_iter().map(|(_, t)| t).collect())
}

/// Response-time floor at vanishing load: pure service demand with the
/// fork/join replacing its branches' sum by their maximum.
pub fn zero_load_response_time(scenario: &NsosScenario) -> f64 {
    let mu = |kind: EntityKind| scenario.service_rate.get(kind);
    let mut total = visit_ratio_map(scenario)
        .iter()
        .filter(|(e, _)| e.kind.is_global())
        .map(|(e, v)| v / mu(e.kind))
        .sum::<f64>();
    for (d, &share) in scenario.shares.iter().enumerate() {
        let _ = d;
        total += 3.0 * share / mu(EntityKind::Dso);
        if !scenario.omit_dssdnc_in_total {
            total += share / mu(EntityKind::Dssdnc);
        }
        total += f64::max(
            2.0 * share / mu(EntityKind::Dsnfvo) + share / mu(EntityKind::Dsvim),
            2.0 * share / mu(EntityKind::Dsrro) + share / mu(EntityKind::Dsenbs),
        );
    }
    total
}
