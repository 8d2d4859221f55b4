//! Token-bucket request policer at the system entrance.

/// Tokens accrue continuously at `rate` up to `depth`; a request is
/// admitted iff a whole token is available. The bucket starts full.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenBucket {
    rate: f64,
    depth: f64,
    tokens: f64,
    last: f64,
}

impl TokenBucket {
    pub fn new(rate: f64, depth: f64) -> Self {
        let depth = depth.max(1.0);
        Self { rate: rate.max(0.0), depth, tokens: depth, last: 0.0 }
    }

    fn refill(&mut self, t: f64) {
        if t > self.last {
            self.tokens = (self.tokens + self.rate * (t - self.last)).min(self.depth);
            self.last = t;
        }
    }

    /// Admit or reject a request arriving at time `t`. The threshold has a
    /// small slack so accumulated float error in the refill times cannot
    /// starve an exactly-sustainable stream.
    pub fn admit(&mut self, t: f64) -> bool {
        self.refill(t);
        if self.tokens >= 1.0 - 1e-9 {
            self.tokens = (self.tokens - 1.0).max(0.0);
            true
        } else {
            false
        }
    }

    /// Update the token rate (refilling up to `t` first), as done whenever
    /// the active capacity changes.
    pub fn set_rate(&mut self, rate: f64, t: f64) {
        self.refill(t);
        self.rate = rate.max(0.0);
    }

    pub fn set_depth(&mut self, depth: f64, t: f64) {
        self.refill(t);
        self.depth = depth.max(1.0);
        self.tokens = self.tokens.min(self.depth);
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_rejects_after_initial_depth() {
        let mut bucket = TokenBucket::new(0.0, 3.0);
        let mut admitted = 0;
        for i in 0..100 {
            if bucket.admit(f64::from(i)) {
                admitted += 1;
            }
        }
        assert_eq!(admitted, 3);
    }

    #[test]
    fn deterministic_overload_rejects_half() {
        // Arrivals at 2x the token rate: asymptotically every other request
        // is dropped.
        let mut bucket = TokenBucket::new(1.0, 1.0);
        let mut admitted = 0u32;
        let n = 10_000u32;
        for i in 0..n {
            if bucket.admit(f64::from(i) * 0.5) {
                admitted += 1;
            }
        }
        let fraction = 1.0 - f64::from(admitted) / f64::from(n);
        assert!((fraction - 0.5).abs() < 0.01, "rejection fraction {fraction}");
    }

    #[test]
    fn rate_change_refills_before_applying() {
        let mut bucket = TokenBucket::new(1.0, 10.0);
        for i in 0..10 {
            assert!(bucket.admit(f64::from(i) * 0.1));
        }
        // Bucket nearly empty; raising the rate later refills generously.
        bucket.set_rate(100.0, 1.0);
        assert!(bucket.admit(1.5));
    }
}
