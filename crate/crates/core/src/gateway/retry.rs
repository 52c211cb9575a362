use std::time::Duration;

use rand::Rng;

/// Exponential backoff with jitter: attempt `k` waits a uniform draw from
/// `[d/2, d]` where `d = min(cap, base * 2^k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base: Duration,
    pub cap: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base: Duration::from_millis(500),
            cap: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; for tests and stubs.
    pub fn immediate(max_retries: u32) -> Self {
        RetryPolicy {
            max_retries,
            base: Duration::ZERO,
            cap: Duration::ZERO,
        }
    }

    pub fn ceiling(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt.min(31));
        self.base.saturating_mul(factor).min(self.cap)
    }

    pub fn delay(&self, attempt: u32) -> Duration {
        let d = self.ceiling(attempt);
        if d.is_zero() {
            return d;
        }
        let half = d / 2;
        half + rand::thread_rng().gen_range(Duration::ZERO..=d - half)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_doubles_then_caps() {
        let p = RetryPolicy::default();
        assert_eq!(p.ceiling(0), Duration::from_millis(500));
        assert_eq!(p.ceiling(3), Duration::from_secs(4));
        assert_eq!(p.ceiling(10), Duration::from_secs(30));
        assert_eq!(p.ceiling(40), Duration::from_secs(30));
        for attempt in 0..8 {
            let d = p.delay(attempt);
            assert!(d >= p.ceiling(attempt) / 2 && d <= p.ceiling(attempt));
        }
        assert_eq!(RetryPolicy::immediate(2).delay(5), Duration::ZERO);
    }
}
