//! Analytic engine for open networks of G/G/m queues.
//!
//! Each node is decomposed into an independent G/G/m queue described by two
//! moments of its flows (Whitt's QNA method): aggregate arrival rates come
//! from the flow balance equations, arrival SCVs from a linear system built
//! out of superposition, splitting and departure approximations, and the
//! per-node waiting times from the Kraemer/Langenbach-Belz (single server)
//! and Allen-Cunneen (multi server) approximations.

use thiserror::Error;

use crate::linalg;

/// Utilizations at or above `1 - STABILITY_MARGIN` are treated as unstable
/// so waiting times never blow up right at the saturation boundary.
pub const STABILITY_MARGIN: f64 = 1e-6;

/// Rates below this are considered zero when forming flow proportions.
const RATE_EPS: f64 = 1e-12;

/// One G/G/m service station.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueNode {
    /// Number of parallel servers (m >= 1).
    pub servers: u32,
    /// Service rate of each server, messages per second.
    pub service_rate: f64,
    /// Squared coefficient of variation of the service times.
    pub service_scv: f64,
}

impl QueueNode {
    pub fn new(servers: u32, service_rate: f64, service_scv: f64) -> Self {
        Self { servers, service_rate, service_scv }
    }
}

/// An open network of G/G/m queues.
///
/// `routing[k][i]` is the mean number of messages sent to node `i` per
/// message processed at node `k`. Rows may sum to more than one at fork
/// points where one processed message spawns messages to several
/// successors; otherwise row sum plus the exit probability equals one.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueingNetwork {
    pub nodes: Vec<QueueNode>,
    pub routing: Vec<Vec<f64>>,
    /// External arrival rate per node (messages/s).
    pub ext_rate: Vec<f64>,
    /// SCV of the external arrival process per node.
    pub ext_scv: Vec<f64>,
}

/// Which reading of the SCV linear-system coefficients to use.
///
/// `Canonical` follows the original QNA formulas: the departure term uses
/// the upstream node's utilization and the hybrid weight is
/// `w_k = 1 / (1 + 4 (1-rho_k)^2 (1/gamma_k - 1))`. `LiteralTranscription`
/// keeps an alternative transcription that scales the departure and split
/// terms with the downstream utilization and leaves the weight uninverted;
/// it is retained only so the two can be compared against simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScvVariant {
    #[default]
    Canonical,
    LiteralTranscription,
}

/// Per-node output of [`analyze_network`].
#[derive(Debug, Clone)]
pub struct FlowSolution {
    /// Aggregate arrival rate per node.
    pub rate: Vec<f64>,
    /// Arrival-process SCV per node.
    pub arrival_scv: Vec<f64>,
    /// Utilization rho_k = lambda_k / (m_k mu_k).
    pub utilization: Vec<f64>,
    /// Mean queueing delay per node, seconds.
    pub waiting: Vec<f64>,
    /// Mean response time per node (waiting plus one service), seconds.
    pub node_time: Vec<f64>,
    /// Nodes whose solved arrival SCV came out negative and was clamped to 0.
    pub clamped_scv_nodes: Vec<usize>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QnaError {
    #[error("routing has no unique nonnegative flow solution (messages can circulate forever)")]
    SingularRouting,
    #[error("node {node} is unstable (utilization {utilization:.6})")]
    Unstable { node: usize, utilization: f64 },
    #[error("arrival-SCV linear system is singular")]
    SingularScvSystem,
    #[error("{0}")]
    OutOfDomain(String),
}

impl QueueingNetwork {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check_shape(&self) -> Result<(), QnaError> {
        let k = self.nodes.len();
        let ok = self.routing.len() == k
            && self.routing.iter().all(|row| row.len() == k)
            && self.ext_rate.len() == k
            && self.ext_scv.len() == k;
        if !ok {
            return Err(QnaError::OutOfDomain("network field lengths disagree".into()));
        }
        for node in &self.nodes {
            if node.servers < 1 || node.service_rate <= 0.0 || node.service_scv < 0.0 {
                return Err(QnaError::OutOfDomain("invalid queue node parameters".into()));
            }
        }
        if self.routing.iter().flatten().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(QnaError::OutOfDomain("negative routing coefficient".into()));
        }
        if self.ext_rate.iter().any(|&r| r < 0.0) || self.ext_scv.iter().any(|&c| c < 0.0) {
            return Err(QnaError::OutOfDomain("negative external arrival descriptor".into()));
        }
        Ok(())
    }
}

/// Solves the flow balance equations `lambda_k = lambda_0k + sum_i lambda_i p_ik`.
pub fn solve_traffic_rates(net: &QueueingNetwork) -> Result<Vec<f64>, QnaError> {
    net.check_shape()?;
    let k = net.len();
    // (I - P^T) lambda = lambda_0
    let mut a = vec![vec![0.0; k]; k];
    for (row, a_row) in a.iter_mut().enumerate() {
        a_row[row] = 1.0;
        for (i, routing_row) in net.routing.iter().enumerate() {
            a_row[i] -= routing_row[row];
        }
    }
    let lambda = linalg::solve(a, net.ext_rate.clone()).ok_or(QnaError::SingularRouting)?;

    let total_ext: f64 = net.ext_rate.iter().sum();
    let tol = 1e-9 * total_ext.max(1.0);
    if lambda.iter().any(|&l| l < -tol) {
        return Err(QnaError::SingularRouting);
    }
    Ok(lambda.into_iter().map(|l| l.max(0.0)).collect())
}

/// Per-node utilizations for a given rate vector.
pub fn utilizations(net: &QueueingNetwork, rates: &[f64]) -> Vec<f64> {
    net.nodes
        .iter()
        .zip(rates)
        .map(|(node, &l)| l / (node.service_rate * f64::from(node.servers)))
        .collect()
}

fn first_unstable(util: &[f64]) -> Option<(usize, f64)> {
    util.iter()
        .enumerate()
        .find(|(_, &rho)| rho >= 1.0 - STABILITY_MARGIN)
        .map(|(k, &rho)| (k, rho))
}

/// Result of [`solve_arrival_scvs`].
#[derive(Debug, Clone)]
pub struct ScvSolution {
    pub arrival_scv: Vec<f64>,
    pub clamped_nodes: Vec<usize>,
}

/// Estimates the SCV of the aggregate arrival process at every node by
/// solving the QNA linear system `c_ak^2 = a_k + sum_i c_ai^2 b_ik`.
pub fn solve_arrival_scvs(
    net: &QueueingNetwork,
    rates: &[f64],
    variant: ScvVariant,
) -> Result<ScvSolution, QnaError> {
    net.check_shape()?;
    let k = net.len();
    let util = utilizations(net, rates);
    if let Some((node, utilization)) = first_unstable(&util) {
        return Err(QnaError::Unstable { node, utilization });
    }

    // x_i: two-moment stand-in for the service variability of node i,
    // floored at 0.2 per the departure approximation.
    let x: Vec<f64> = net
        .nodes
        .iter()
        .map(|n| 1.0 + f64::from(n.servers).powf(-0.5) * (n.service_scv.max(0.2) - 1.0))
        .collect();

    // System matrix M c = rhs with M = I - B^T.
    let mut matrix = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];

    for node in 0..k {
        matrix[node][node] = 1.0;
        if rates[node] <= RATE_EPS {
            // No traffic: the SCV is irrelevant downstream (q_ik = 0 there);
            // pin it to the exponential value.
            rhs[node] = 1.0;
            continue;
        }

        let q0 = net.ext_rate[node] / rates[node];
        let mut gamma = q0 * q0;
        for i in 0..k {
            let q = rates[i] * net.routing[i][node] / rates[node];
            gamma += q * q;
        }

        let rho_k = util[node];
        let w = match variant {
            ScvVariant::Canonical => {
                1.0 / (1.0 + 4.0 * (1.0 - rho_k).powi(2) * (1.0 / gamma - 1.0))
            }
            ScvVariant::LiteralTranscription => {
                if (gamma - 1.0).abs() < 1e-12 {
                    1.0
                } else {
                    1.0 + 4.0 * (1.0 - rho_k).powi(2) / (gamma - 1.0)
                }
            }
        };

        let mut constant = 1.0 + w * (q0 * net.ext_scv[node] - 1.0);
        for i in 0..k {
            let p = net.routing[i][node];
            if p <= 0.0 || rates[i] <= RATE_EPS {
                continue;
            }
            let q = rates[i] * p / rates[node];
            let (rho_sq, inner_weight) = match variant {
                ScvVariant::Canonical => (util[i] * util[i], w),
                ScvVariant::LiteralTranscription => (rho_k * rho_k, 1.0),
            };
            constant += inner_weight * q * ((1.0 - p) + p * rho_sq * x[i]);
            let b = match variant {
                ScvVariant::Canonical => w * q * p * (1.0 - util[i] * util[i]),
                ScvVariant::LiteralTranscription => w * q * p * (1.0 - rho_k * rho_k),
            };
            matrix[node][i] -= b;
        }
        rhs[node] = constant;
    }

    let solved = linalg::solve(matrix, rhs).ok_or(QnaError::SingularScvSystem)?;
    let mut clamped = Vec::new();
    let arrival_scv = solved
        .into_iter()
        .enumerate()
        .map(|(node, c)| {
            if c < 0.0 {
                clamped.push(node);
                0.0
            } else {
                c
            }
        })
        .collect();
    Ok(ScvSolution { arrival_scv, clamped_nodes: clamped })
}

/// Erlang's C formula: probability that an arrival to an M/M/m queue with
/// per-server utilization `rho` has to wait.
///
/// Computed through the Erlang-B recurrence instead of raw factorials so it
/// stays stable for large m.
pub fn erlang_c(servers: u32, rho: f64) -> Result<f64, QnaError> {
    if servers < 1 {
        return Err(QnaError::OutOfDomain("erlang_c requires m >= 1".into()));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(QnaError::OutOfDomain(format!("erlang_c requires 0 <= rho < 1, got {rho}")));
    }
    let offered = rho * f64::from(servers);
    let mut blocking = 1.0; // Erlang B with 0 servers
    for m in 1..=servers {
        blocking = offered * blocking / (f64::from(m) + offered * blocking);
    }
    Ok(blocking / (1.0 - rho * (1.0 - blocking)))
}

/// Mean queueing delay of a G/G/1 queue via the Kraemer/Langenbach-Belz
/// refinement of the heavy-traffic approximation.
pub fn waiting_time_single(
    rate: f64,
    service_rate: f64,
    arrival_scv: f64,
    service_scv: f64,
) -> Result<f64, QnaError> {
    let rho = rate / service_rate;
    if rho >= 1.0 - STABILITY_MARGIN {
        return Err(QnaError::Unstable { node: 0, utilization: rho });
    }
    if rho <= 0.0 {
        return Ok(0.0);
    }
    let scv_sum = arrival_scv + service_scv;
    if scv_sum <= 0.0 {
        return Ok(0.0);
    }
    let beta = if arrival_scv < 1.0 {
        (-2.0 * (1.0 - rho) * (1.0 - arrival_scv).powi(2) / (3.0 * rho * scv_sum)).exp()
    } else {
        1.0
    };
    Ok(rho * scv_sum * beta / (2.0 * service_rate * (1.0 - rho)))
}

/// Mean queueing delay of a G/G/m queue (m >= 2): the Allen-Cunneen scaling
/// of the exact M/M/m waiting time.
pub fn waiting_time_multi(
    rate: f64,
    service_rate: f64,
    servers: u32,
    arrival_scv: f64,
    service_scv: f64,
) -> Result<f64, QnaError> {
    if servers < 2 {
        return Err(QnaError::OutOfDomain("waiting_time_multi requires m >= 2".into()));
    }
    let rho = rate / (service_rate * f64::from(servers));
    if rho >= 1.0 - STABILITY_MARGIN {
        return Err(QnaError::Unstable { node: 0, utilization: rho });
    }
    if rho <= 0.0 {
        return Ok(0.0);
    }
    let mmm_wait = erlang_c(servers, rho)? / (f64::from(servers) * service_rate - rate);
    Ok(0.5 * (arrival_scv + service_scv) * mmm_wait)
}

/// Full decomposition pass: rates, arrival SCVs, waiting and response time
/// for every node of the network.
pub fn analyze_network(net: &QueueingNetwork) -> Result<FlowSolution, QnaError> {
    analyze_network_with(net, ScvVariant::Canonical)
}

/// [`analyze_network`] with an explicit SCV formula variant.
pub fn analyze_network_with(
    net: &QueueingNetwork,
    variant: ScvVariant,
) -> Result<FlowSolution, QnaError> {
    let rates = solve_traffic_rates(net)?;
    let util = utilizations(net, &rates);
    if let Some((node, utilization)) = first_unstable(&util) {
        return Err(QnaError::Unstable { node, utilization });
    }
    let scv = solve_arrival_scvs(net, &rates, variant)?;

    let mut waiting = Vec::with_capacity(net.len());
    let mut node_time = Vec::with_capacity(net.len());
    for (k, node) in net.nodes.iter().enumerate() {
        let w = if node.servers == 1 {
            waiting_time_single(rates[k], node.service_rate, scv.arrival_scv[k], node.service_scv)
        } else {
            waiting_time_multi(
                rates[k],
                node.service_rate,
                node.servers,
                scv.arrival_scv[k],
                node.service_scv,
            )
        }
        .map_err(|e| match e {
            QnaError::Unstable { utilization, .. } => QnaError::Unstable { node: k, utilization },
            other => other,
        })?;
        waiting.push(w);
        node_time.push(w + 1.0 / node.service_rate);
    }

    Ok(FlowSolution {
        rate: rates,
        arrival_scv: scv.arrival_scv,
        utilization: util,
        waiting,
        node_time,
        clamped_scv_nodes: scv.clamped_nodes,
    })
}
