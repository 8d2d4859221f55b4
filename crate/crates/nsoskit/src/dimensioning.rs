//! Resource dimensioning: the minimum number of cores such that the mean
//! response time stays under the objective.
//!
//! The workhorse is a marginal-allocation greedy: start from the stability
//! minimum, then repeatedly give one core to the entity whose extra core
//! reduces the response time the most. An exhaustive search over weak
//! compositions serves as the optimality oracle.

use thiserror::Error;

use crate::nsos::{
    visit_ratios, zero_load_response_time, Allocation, EntityMatrix, NsosError, NsosScenario,
};
use crate::qna::{self, STABILITY_MARGIN};

/// Anything the dimensioning algorithms can size: a system with a fixed set
/// of entities whose response time is a function of per-entity core counts.
pub trait CapacityModel {
    fn entity_count(&self) -> usize;
    /// Offered load per entity, messages per second.
    fn offered_rates(&self) -> Vec<f64>;
    /// Service rate of one core at each entity.
    fn service_rates(&self) -> Vec<f64>;
    /// Mean response time and each entity's visit-weighted contribution to
    /// it, under the given per-entity core counts; `None` when the
    /// allocation is not stable (or not analyzable).
    fn evaluate_detailed(&self, cores: &[u32]) -> Option<(f64, Vec<f64>)>;
    /// Mean response time only.
    fn evaluate(&self, cores: &[u32]) -> Option<f64> {
        self.evaluate_detailed(cores).map(|(t, _)| t)
    }
    /// Response-time floor at vanishing load.
    fn zero_load_time(&self) -> f64;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DimensioningError {
    #[error("objective {t_max} s is below the zero-load response time {zero_load} s")]
    ZeroLoadInfeasible { t_max: f64, zero_load: f64 },
    #[error("exhaustive search would exceed the guard of {guard} response-time evaluations")]
    TooLarge { guard: u64 },
}

/// Outcome of a dimensioning run.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensioningResult {
    /// Cores per entity.
    pub cores: Vec<u32>,
    /// Response time predicted for `cores` (infinite when unstable).
    pub predicted_t: f64,
    pub total_cores: u32,
    /// Number of response-time evaluations performed.
    pub model_evaluations: u64,
    /// Committed greedy steps; equals `total_cores - stability minimum`.
    pub iterations: u32,
    /// Whether `predicted_t <= t_max` within the core budget.
    pub feasible: bool,
}

/// Stability-minimum cores: `ceil(lambda_e / mu_e)` per entity.
pub fn stability_minimum(model: &dyn CapacityModel) -> Vec<u32> {
    model
        .offered_rates()
        .iter()
        .zip(model.service_rates())
        .map(|(&l, mu)| (l / mu).ceil() as u32)
        .collect()
}

fn entity_utilization(rate: f64, mu: f64, cores: u32) -> f64 {
    if rate <= 0.0 {
        return 0.0;
    }
    if cores == 0 {
        return f64::INFINITY;
    }
    rate / (mu * f64::from(cores))
}

/// Greedy marginal allocation.
///
/// Each iteration evaluates the response time with one extra core on every
/// entity in turn, then commits the core where the entity's own
/// (visit-weighted) response contribution drops the most, ties to the
/// lowest entity index. The per-entity criterion matters: the fork/join
/// composition takes the maximum of the two reservation branches, so with
/// symmetric branches no single core moves the composed T until *both*
/// branches have been repaired — an argmax on the composed total would
/// starve exactly the entities that need cores.
///
/// While the starting point is still unstable no candidate may be fully
/// analyzable; the core then goes to the candidate that stabilizes the
/// network, or failing that to the lowest-index saturated entity, so the
/// loop always progresses toward stability.
pub fn heuristic(
    model: &dyn CapacityModel,
    t_max: f64,
    core_budget: u32,
) -> Result<DimensioningResult, DimensioningError> {
    let zero_load = model.zero_load_time();
    if t_max <= zero_load {
        return Err(DimensioningError::ZeroLoadInfeasible { t_max, zero_load });
    }

    let rates = model.offered_rates();
    let service = model.service_rates();
    let mut cores = stability_minimum(model);
    let mut total: u32 = cores.iter().sum();
    let mut evaluations: u64 = 1;
    let mut iterations: u32 = 0;
    let mut current = model.evaluate_detailed(&cores);

    let current_t = |c: &Option<(f64, Vec<f64>)>| c.as_ref().map_or(f64::INFINITY, |(t, _)| *t);

    while current_t(&current) > t_max && total < core_budget {
        let mut candidates: Vec<Option<(f64, Vec<f64>)>> = Vec::with_capacity(cores.len());
        for e in 0..cores.len() {
            cores[e] += 1;
            evaluations += 1;
            candidates.push(model.evaluate_detailed(&cores));
            cores[e] -= 1;
        }

        let committed = if let Some((_, per_entity)) = &current {
            // Stable: take the biggest per-entity contribution drop.
            let mut best: Option<(f64, usize)> = None;
            for (e, cand) in candidates.iter().enumerate() {
                if let Some((_, cand_per)) = cand {
                    let drop = per_entity[e] - cand_per[e];
                    if best.map_or(true, |(bd, _)| drop > bd) {
                        best = Some((drop, e));
                    }
                }
            }
            match best {
                Some((drop, e)) if drop > 0.0 => e,
                _ => break, // no core improves any entity: give up
            }
        } else {
            // Unstable: prefer a core that makes the network analyzable,
            // otherwise relieve the first saturated entity.
            let stabilizer = candidates
                .iter()
                .enumerate()
                .filter_map(|(e, c)| c.as_ref().map(|(t, _)| (*t, e)))
                .min_by(|a, b| a.partial_cmp(b).unwrap());
            match stabilizer {
                Some((_, e)) => e,
                None => (0..cores.len())
                    .find(|&e| {
                        entity_utilization(rates[e], service[e], cores[e]) >= 1.0 - STABILITY_MARGIN
                    })
                    .unwrap_or(0),
            }
        };

        current = candidates.swap_remove(committed);
        cores[committed] += 1;
        total += 1;
        iterations += 1;
    }

    let t = current_t(&current);
    Ok(DimensioningResult {
        feasible: t <= t_max,
        predicted_t: t,
        total_cores: total,
        model_evaluations: evaluations,
        iterations,
        cores,
    })
}

/// Local-search refinement of a feasible allocation: repeatedly drop any
/// core whose removal keeps the objective, and move single cores between
/// entities when the move unlocks a further drop. Keeps feasibility and
/// never increases the total. Deliberately separate from [`heuristic`]:
/// its extra evaluations fall outside the greedy's one-scan-per-core
/// budget, so callers opt in when they want the last core squeezed out.
pub fn refine_allocation(model: &dyn CapacityModel, t_max: f64, cores: &mut [u32]) -> u64 {
    let mut evaluations = 0;
    let feasible = |cores: &[u32], evals: &mut u64| -> bool {
        *evals += 1;
        model.evaluate(cores).is_some_and(|t| t <= t_max)
    };

    let drop_pass = |cores: &mut [u32], evals: &mut u64| -> bool {
        let mut any = false;
        loop {
            let mut dropped = false;
            for e in 0..cores.len() {
                if cores[e] == 0 {
                    continue;
                }
                cores[e] -= 1;
                if feasible(cores, evals) {
                    dropped = true;
                    any = true;
                } else {
                    cores[e] += 1;
                }
            }
            if !dropped {
                break;
            }
        }
        any
    };

    drop_pass(cores, &mut evaluations);
    loop {
        let mut improved = false;
        'swap: for from in 0..cores.len() {
            if cores[from] == 0 {
                continue;
            }
            for to in 0..cores.len() {
                if to == from {
                    continue;
                }
                cores[from] -= 1;
                cores[to] += 1;
                if feasible(cores, &mut evaluations) {
                    let mut trial = cores.to_vec();
                    if drop_pass(&mut trial, &mut evaluations) {
                        cores.copy_from_slice(&trial);
                        improved = true;
                        break 'swap;
                    }
                }
                cores[from] += 1;
                cores[to] -= 1;
            }
        }
        if !improved {
            break;
        }
    }
    evaluations
}

/// The one-evaluation-per-iteration variant: every iteration analyzes a
/// single network with one extra core on *every* entity, commits the core
/// where that entity's own contribution drops most, and tracks T through
/// the incremental update `T <- T - T_prev(e*) + T_aux(e*)` instead of a
/// full recompute. Needs only `M* - M_0 + 1` model evaluations, so its
/// wall time does not scale with the number of entities; kept for
/// complexity studies, while [`heuristic`] remains the default.
pub fn heuristic_incremental(
    model: &dyn CapacityModel,
    t_max: f64,
    core_budget: u32,
) -> Result<DimensioningResult, DimensioningError> {
    let zero_load = model.zero_load_time();
    if t_max <= zero_load {
        return Err(DimensioningError::ZeroLoadInfeasible { t_max, zero_load });
    }

    let rates = model.offered_rates();
    let service = model.service_rates();
    let mut cores = stability_minimum(model);
    let mut total: u32 = cores.iter().sum();
    let mut evaluations: u64 = 1;
    let mut iterations: u32 = 0;

    let mut current = model.evaluate_detailed(&cores);
    let mut t = current.as_ref().map_or(f64::INFINITY, |(t, _)| *t);

    while t > t_max && total < core_budget {
        let aux: Vec<u32> = cores.iter().map(|c| c + 1).collect();
        evaluations += 1;
        let Some((_, per_aux)) = model.evaluate_detailed(&aux) else {
            // Even the all-plus-one network is unstable; relieve the first
            // saturated entity and retry.
            let bump = (0..cores.len())
                .find(|&e| {
                    entity_utilization(rates[e], service[e], cores[e]) >= 1.0 - STABILITY_MARGIN
                })
                .unwrap_or(0);
            cores[bump] += 1;
            total += 1;
            iterations += 1;
            current = model.evaluate_detailed(&cores);
            t = current.as_ref().map_or(f64::INFINITY, |(t, _)| *t);
            continue;
        };

        match &mut current {
            Some((t_cur, per_cur)) => {
                let mut best: Option<(f64, usize)> = None;
                for e in 0..cores.len() {
                    let drop = per_cur[e] - per_aux[e];
                    if best.map_or(true, |(bd, _)| drop > bd) {
                        best = Some((drop, e));
                    }
                }
                let Some((drop, e)) = best else { break };
                if drop <= 0.0 {
                    break;
                }
                cores[e] += 1;
                *t_cur -= drop;
                per_cur[e] = per_aux[e];
                t = *t_cur;
            }
            None => {
                // Current allocation unstable but the aux one is fine:
                // commit where the utilization is worst.
                let bump = (0..cores.len())
                    .max_by(|&a, &b| {
                        entity_utilization(rates[a], service[a], cores[a])
                            .total_cmp(&entity_utilization(rates[b], service[b], cores[b]))
                    })
                    .unwrap_or(0);
                cores[bump] += 1;
                current = model.evaluate_detailed(&cores);
                t = current.as_ref().map_or(f64::INFINITY, |(t, _)| *t);
                evaluations += 1;
            }
        }
        total += 1;
        iterations += 1;
    }

    Ok(DimensioningResult {
        feasible: t <= t_max,
        predicted_t: t,
        total_cores: total,
        model_evaluations: evaluations,
        iterations,
        cores,
    })
}

/// Exhaustive-search oracle.
///
/// Starting at the stability minimum, enumerate for each growing total `M`
/// every way of spreading the `M - M_0` extra cores over the entities; stop
/// at the first `M` that admits `T <= t_max` and return the composition
/// minimizing `T` there (ties broken lexicographically). Aborts with
/// [`DimensioningError::TooLarge`] once `eval_guard` evaluations are spent.
pub fn brute_force(
    model: &dyn CapacityModel,
    t_max: f64,
    core_budget: u32,
    eval_guard: u64,
) -> Result<DimensioningResult, DimensioningError> {
    let zero_load = model.zero_load_time();
    if t_max <= zero_load {
        return Err(DimensioningError::ZeroLoadInfeasible { t_max, zero_load });
    }

    let base = stability_minimum(model);
    let m0: u32 = base.iter().sum();
    let n = base.len();
    let mut evaluations: u64 = 0;

    let mut best_overall: Option<(f64, Vec<u32>)> = None;
    let mut m = m0;
    while m <= core_budget {
        let extra_total = m - m0;
        let mut best_at_m: Option<(f64, Vec<u32>)> = None;

        // Walk all weak compositions of `extra_total` in ascending
        // lexicographic order.
        let mut extra = vec![0u32; n];
        extra[n - 1] = extra_total;
        loop {
            evaluations += 1;
            if evaluations > eval_guard {
                return Err(DimensioningError::TooLarge { guard: eval_guard });
            }
            let cores: Vec<u32> = base.iter().zip(&extra).map(|(b, e)| b + e).collect();
            if let Some(t) = model.evaluate(&cores) {
                if best_at_m.as_ref().map_or(true, |(bt, _)| t < *bt) {
                    best_at_m = Some((t, cores));
                }
            }
            if !next_composition(&mut extra) {
                break;
            }
        }

        if let Some((t, cores)) = &best_at_m {
            if *t <= t_max {
                return Ok(DimensioningResult {
                    feasible: true,
                    predicted_t: *t,
                    total_cores: m,
                    model_evaluations: evaluations,
                    iterations: extra_total,
                    cores: cores.clone(),
                });
            }
            best_overall = best_at_m;
        }
        m += 1;
    }

    // Budget exhausted: report the best composition found at the last total.
    let (predicted_t, cores) = best_overall.unwrap_or((f64::INFINITY, base));
    Ok(DimensioningResult {
        feasible: false,
        predicted_t,
        total_cores: cores.iter().sum(),
        model_evaluations: evaluations,
        iterations: core_budget.saturating_sub(m0),
        cores,
    })
}

/// Advances a weak composition to its lexicographic successor with the same
/// sum; returns false after the last one (`(total, 0, ..., 0)`).
fn next_composition(extra: &mut [u32]) -> bool {
    let n = extra.len();
    if n <= 1 {
        return false;
    }
    // Find the rightmost position before the tail that can still give one
    // unit to the positions after it.
    let tail = extra[n - 1];
    for i in (0..n - 1).rev() {
        let suffix: u32 = extra[i + 1..].iter().sum();
        if suffix > 0 {
            extra[i] += 1;
            let moved = suffix - 1;
            for slot in extra[i + 1..n - 1].iter_mut() {
                *slot = 0;
            }
            extra[n - 1] = moved;
            return true;
        }
    }
    let _ = tail;
    false
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("check count exceeds the representable range")]
pub struct CountOverflow;

/// Number of response-time evaluations the exhaustive search needs to go
/// from `m0` total cores to `m_star`:
/// `sum_{k=0}^{m_star-m0} C(n_entities + k - 1, k)`.
pub fn bruteforce_check_count(
    n_entities: u32,
    m0: u32,
    m_star: u32,
) -> Result<u128, CountOverflow> {
    if n_entities < 1 || m_star < m0 {
        return Err(CountOverflow);
    }
    let delta = m_star - m0;
    let mut term: u128 = 1; // C(n-1+k, k), starting at k = 0
    let mut total: u128 = 1;
    for k in 1..=u128::from(delta) {
        term = term.checked_mul(u128::from(n_entities) - 1 + k).ok_or(CountOverflow)? / k;
        total = total.checked_add(term).ok_or(CountOverflow)?;
    }
    Ok(total)
}

/// Capacity model backed by the orchestration-system scenario.
pub struct NsosModel<'a> {
    scenario: &'a NsosScenario,
    entity_matrix: EntityMatrix,
    variant: qna::ScvVariant,
}

impl<'a> NsosModel<'a> {
    pub fn new(scenario: &'a NsosScenario) -> Self {
        Self::with_variant(scenario, qna::ScvVariant::Canonical)
    }

    pub fn with_variant(scenario: &'a NsosScenario, variant: qna::ScvVariant) -> Self {
        Self { scenario, entity_matrix: crate::nsos::entity_transition_matrix(scenario), variant }
    }

    pub fn allocation(&self, cores: &[u32]) -> Result<Allocation, NsosError> {
        Ok(Allocation::balanced(self.scenario, cores)?)
    }
}

impl CapacityModel for NsosModel<'_> {
    fn entity_count(&self) -> usize {
        self.entity_matrix.entities.len()
    }

    fn offered_rates(&self) -> Vec<f64> {
        visit_ratios(self.scenario).into_iter().map(|v| v * self.scenario.ext_rate).collect()
    }

    fn service_rates(&self) -> Vec<f64> {
        self.entity_matrix.entities.iter().map(|e| self.scenario.service_rate.get(e.kind)).collect()
    }

    fn evaluate_detailed(&self, cores: &[u32]) -> Option<(f64, Vec<f64>)> {
        let allocation = Allocation::balanced(self.scenario, cores).ok()?;
        let expanded =
            crate::nsos::expand_to_instances(self.scenario, &self.entity_matrix, &allocation)
                .ok()?;
        qna::analyze_network_with(&expanded.network, self.variant).ok().map(|flow| {
            super::nsos::response_parts_from_flow(
                self.scenario,
                &self.entity_matrix,
                &expanded.node_entities,
                &flow,
            )
        })
    }

    fn zero_load_time(&self) -> f64 {
        zero_load_response_time(self.scenario)
    }
}

/// Greedy dimensioning of a scenario against its own SLO and budget.
pub fn dimension_heuristic(
    scenario: &NsosScenario,
) -> Result<(DimensioningResult, Allocation), DimensioningError> {
    let model = NsosModel::new(scenario);
    let result = heuristic(&model, scenario.slo, scenario.core_budget)?;
    let allocation = Allocation::balanced(scenario, &result.cores).expect("length matches");
    Ok((result, allocation))
}

/// Exhaustive-search dimensioning of a scenario.
pub fn dimension_bruteforce(
    scenario: &NsosScenario,
    eval_guard: u64,
) -> Result<(DimensioningResult, Allocation), DimensioningError> {
    let model = NsosModel::new(scenario);
    let result = brute_force(&model, scenario.slo, scenario.core_budget, eval_guard)?;
    let allocation = Allocation::balanced(scenario, &result.cores).expect("length matches");
    Ok((result, allocation))
}

/// Largest sustainable external arrival rate under an allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SustainableRate {
    /// Largest rate whose predicted response time still meets the SLO.
    pub max_rate: f64,
    /// Hard stability ceiling `min_e cores_e * mu_e / V_e`.
    pub stability_limit: f64,
}

/// Binary search for the largest external rate with `T <= slo`, to a
/// relative tolerance of 1e-4. Returns a zero rate when even a vanishing
/// load misses the objective.
pub fn max_sustainable_rate(scenario: &NsosScenario, allocation: &Allocation) -> SustainableRate {
    let visits = visit_ratios(scenario);
    let mut stability_limit = f64::INFINITY;
    for ((entity, &v), &cores) in allocation.entities.iter().zip(&visits).zip(&allocation.cores) {
        if v <= 0.0 {
            continue;
        }
        let cap = f64::from(cores) * scenario.service_rate.get(entity.kind) / v;
        stability_limit = stability_limit.min(cap);
    }
    if !stability_limit.is_finite() || stability_limit <= 0.0 {
        return SustainableRate { max_rate: 0.0, stability_limit: 0.0 };
    }

    let meets = |rate: f64| -> bool {
        crate::nsos::response_time(&scenario.with_external(rate, scenario.ext_scv), allocation)
            .map(|r| r.total <= scenario.slo)
            .unwrap_or(false)
    };

    let mut hi = stability_limit * (1.0 - 2.0 * STABILITY_MARGIN);
    if meets(hi) {
        return SustainableRate { max_rate: hi, stability_limit };
    }
    let mut lo = stability_limit * 1e-9;
    if !meets(lo) {
        return SustainableRate { max_rate: 0.0, stability_limit };
    }
    while (hi - lo) / hi > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if meets(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    SustainableRate { max_rate: lo, stability_limit }
}

/// One multi-server station dimensioned in isolation; handy both in tests
/// and for sizing a single pooled entity.
pub struct SingleStationModel {
    pub rate: f64,
    pub service_rate: f64,
    pub arrival_scv: f64,
    pub service_scv: f64,
}

impl CapacityModel for SingleStationModel {
    fn entity_count(&self) -> usize {
        1
    }

    fn offered_rates(&self) -> Vec<f64> {
        vec![self.rate]
    }

    fn service_rates(&self) -> Vec<f64> {
        vec![self.service_rate]
    }

    fn evaluate_detailed(&self, cores: &[u32]) -> Option<(f64, Vec<f64>)> {
        let m = cores[0];
        if m == 0 {
            return None;
        }
        let w = if m == 1 {
            qna::waiting_time_single(
                self.rate,
                self.service_rate,
                self.arrival_scv,
                self.service_scv,
            )
        } else {
            qna::waiting_time_multi(
                self.rate,
                self.service_rate,
                m,
                self.arrival_scv,
                self.service_scv,
            )
        };
        w.ok().map(|w| {
            let t = w + 1.0 / self.service_rate;
            (t, vec![t])
        })
    }

    fn zero_load_time(&self) -> f64 {
        1.0 / self.service_rate
    }
}
