//! Event list and multi-server FCFS station shared by the simulators.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

/// A pending event; ordering is by time, then insertion sequence, so event
/// processing is fully deterministic.
struct Entry<E> {
    time: f64,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl<E> Eq for Entry<E> {}
impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want earliest first.
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

pub(crate) struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    seq: u64,
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self { heap: BinaryHeap::new(), seq: 0 }
    }

    pub fn push(&mut self, time: f64, event: E) {
        self.heap.push(Entry { time, seq: self.seq, event });
        self.seq += 1;
    }

    pub fn next_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn pop(&mut self) -> Option<(f64, E)> {
        self.heap.pop().map(|e| (e.time, e.event))
    }
}

/// One FCFS station with `cores` identical servers.
///
/// Statistics (waits, busy time, number in system) accumulate only inside
/// the `[stats_start, stats_end)` window. A resize below the current busy
/// count never preempts: running jobs finish and no new service starts
/// until the busy count drops under the new core count.
pub(crate) struct ServerPool {
    pub cores: u32,
    pub active: bool,
    busy: u32,
    waiting: VecDeque<(u64, f64)>,

    stats_start: f64,
    stats_end: f64,
    last_t: f64,
    in_system: u32,
    pub area_in_system: f64,
    pub area_busy: f64,
    pub wait_sum: f64,
    pub wait_count: u64,
    pub service_sum: f64,
    pub service_count: u64,
    pub arrivals: u64,
    batch_len: f64,
    pub batch_wait: Vec<(f64, u64)>,
}

impl ServerPool {
    pub fn new(cores: u32, stats_start: f64, stats_end: f64, batches: u32) -> Self {
        let batch_len = if batches > 0 {
            (stats_end - stats_start) / f64::from(batches)
        } else {
            f64::INFINITY
        };
        Self {
            cores,
            active: true,
            busy: 0,
            waiting: VecDeque::new(),
            stats_start,
            stats_end,
            last_t: 0.0,
            in_system: 0,
            area_in_system: 0.0,
            area_busy: 0.0,
            wait_sum: 0.0,
            wait_count: 0,
            service_sum: 0.0,
            service_count: 0,
            arrivals: 0,
            batch_len,
            batch_wait: vec![(0.0, 0); batches as usize],
        }
    }

    fn in_window(&self, t: f64) -> bool {
        t >= self.stats_start && t < self.stats_end
    }

    fn advance(&mut self, t: f64) {
        let lo = self.last_t.clamp(self.stats_start, self.stats_end);
        let hi = t.clamp(self.stats_start, self.stats_end);
        if hi > lo {
            let dt = hi - lo;
            self.area_in_system += dt * f64::from(self.in_system);
            self.area_busy += dt * f64::from(self.busy);
        }
        self.last_t = t;
    }

    fn record_wait(&mut self, arrived: f64, wait: f64) {
        if !self.in_window(arrived) {
            return;
        }
        self.wait_sum += wait;
        self.wait_count += 1;
        if !self.batch_wait.is_empty() {
            let idx = ((arrived - self.stats_start) / self.batch_len) as usize;
            let idx = idx.min(self.batch_wait.len() - 1);
            self.batch_wait[idx].0 += wait;
            self.batch_wait[idx].1 += 1;
        }
    }

    /// A job joins the station. Returns true when it enters service at
    /// once (the caller then samples its service time).
    pub fn arrive(&mut self, token: u64, t: f64) -> bool {
        self.advance(t);
        if self.in_window(t) {
            self.arrivals += 1;
        }
        self.in_system += 1;
        if self.busy < self.cores {
            self.busy += 1;
            self.record_wait(t, 0.0);
            true
        } else {
            self.waiting.push_back((token, t));
            false
        }
    }

    /// A service completed. Returns the next job to start, if any.
    pub fn complete(&mut self, t: f64) -> Option<u64> {
        self.advance(t);
        self.in_system -= 1;
        self.busy -= 1;
        if self.busy < self.cores {
            if let Some((token, arrived)) = self.waiting.pop_front() {
                self.busy += 1;
                self.record_wait(arrived, t - arrived);
                return Some(token);
            }
        }
        None
    }

    pub fn record_service(&mut self, duration: f64, t: f64) {
        if self.in_window(t) {
            self.service_sum += duration;
            self.service_count += 1;
        }
    }

    pub fn resize(&mut self, cores: u32, t: f64) {
        self.advance(t);
        self.cores = cores;
        // Freed capacity can start queued work immediately; the caller
        // drains this by asking for starters.
    }

    /// Starts queued jobs onto idle cores after a resize upward.
    pub fn claim_starter(&mut self, t: f64) -> Option<u64> {
        if self.busy < self.cores {
            if let Some((token, arrived)) = self.waiting.pop_front() {
                self.advance(t);
                self.busy += 1;
                self.record_wait(arrived, t - arrived);
                return Some(token);
            }
        }
        None
    }

    pub fn mean_wait(&self) -> Option<f64> {
        (self.wait_count > 0).then(|| self.wait_sum / self.wait_count as f64)
    }

    /// Utilization over the stats window for a fixed-capacity run.
    pub fn utilization(&self) -> f64 {
        let window = self.stats_end - self.stats_start;
        if window <= 0.0 || self.cores == 0 {
            return 0.0;
        }
        self.area_busy / (window * f64::from(self.cores))
    }
}

/// Two-sided 97.5% Student-t quantiles for small degrees of freedom;
/// normal approximation beyond the table.
pub(crate) fn t_quantile_975(df: u64) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
        2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
        2.052, 2.048, 2.045, 2.042,
    ];
    if df == 0 {
        return f64::INFINITY;
    }
    if df <= 30 {
        TABLE[(df - 1) as usize]
    } else {
        1.96
    }
}

/// Mean and 95% half-width from batch means (batches with no samples are
/// dropped).
pub(crate) fn batch_ci(batches: &[(f64, u64)]) -> Option<(f64, f64)> {
    let means: Vec<f64> =
        batches.iter().filter(|(_, n)| *n > 0).map(|(sum, n)| sum / *n as f64).collect();
    if means.is_empty() {
        return None;
    }
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    if means.len() < 2 {
        return Some((mean, f64::INFINITY));
    }
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = t_quantile_975(means.len() as u64 - 1) * (var / n).sqrt();
    Some((mean, half))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_pop_in_time_then_insertion_order() {
        let mut q = EventQueue::new();
        q.push(2.0, "b");
        q.push(1.0, "a");
        q.push(2.0, "c");
        assert_eq!(q.pop(), Some((1.0, "a")));
        assert_eq!(q.pop(), Some((2.0, "b")));
        assert_eq!(q.pop(), Some((2.0, "c")));
        assert_eq!(q.pop(), None);
    }

    #[test]
    fn pool_serves_fcfs_with_two_cores() {
        let mut pool = ServerPool::new(2, 0.0, 100.0, 0);
        assert!(pool.arrive(1, 0.0));
        assert!(pool.arrive(2, 0.0));
        assert!(!pool.arrive(3, 1.0)); // queued
        assert_eq!(pool.complete(2.0), Some(3));
        assert_eq!(pool.wait_count, 3);
        assert_eq!(pool.wait_sum, 1.0); // token 3 waited 1 s
        assert_eq!(pool.complete(3.0), None);
        assert_eq!(pool.complete(4.0), None);
    }

    #[test]
    fn shrink_does_not_preempt() {
        let mut pool = ServerPool::new(2, 0.0, 100.0, 0);
        pool.arrive(1, 0.0);
        pool.arrive(2, 0.0);
        pool.resize(1, 1.0);
        // Two still running; a completion with busy (2) > cores (1) must
        // not admit the queued job.
        pool.arrive(3, 1.5);
        assert_eq!(pool.complete(2.0), None); // busy drops 2 -> 1 == cores
        assert_eq!(pool.complete(3.0), Some(3));
    }

    #[test]
    fn areas_accumulate_only_in_window() {
        let mut pool = ServerPool::new(1, 10.0, 20.0, 0);
        pool.arrive(1, 0.0);
        pool.complete(15.0);
        // Busy from 0 to 15, but only [10, 15) counts.
        assert!((pool.area_busy - 5.0).abs() < 1e-12);
        assert_eq!(pool.arrivals, 0);
    }

    #[test]
    fn batch_ci_drops_empty_batches() {
        let (mean, half) = batch_ci(&[(10.0, 10), (0.0, 0), (20.0, 10)]).unwrap();
        assert!((mean - 1.5).abs() < 1e-12);
        assert!(half.is_finite());
        assert_eq!(batch_ci(&[(0.0, 0)]), None);
    }
}
