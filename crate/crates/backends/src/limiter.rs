//! Token-bucket request limiter and backoff schedule.

use std::sync::Mutex;
use std::time::{Duration, Instant};

#[derive(Debug)]
pub struct RateLimiter {
    capacity: f64,
    per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    /// Allows `per_minute` requests per minute with bursts up to `burst`.
    pub fn new(per_minute: u32, burst: u32) -> Self {
        let capacity = f64::from(burst.max(1));
        RateLimiter {
            capacity,
            per_sec: f64::from(per_minute.max(1)) / 60.0,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Takes a token if one is available, otherwise reports how long to wait.
    pub fn try_acquire(&self) -> Result<(), Duration> {
        let mut st = self.state.lock().unwrap_or_else(|e| e.into_inner());
        let now = Instant::now();
        let elapsed = now.duration_since(st.1).as_secs_f64();
        st.0 = (st.0 + elapsed * self.per_sec).min(self.capacity);
        st.1 = now;
        if st.0 >= 1.0 {
            st.0 -= 1.0;
            Ok(())
        } else {
            Err(Duration::from_secs_f64((1.0 - st.0) / self.per_sec))
        }
    }

    /// Blocks until a token is available.
    pub fn acquire(&self) {
        while let Err(wait) = self.try_acquire() {
            std::thread::sleep(wait);
        }
    }
}

/// Delay before retry number `attempt` (0-based): `initial * 2^attempt`,
/// capped at `max`.
pub fn backoff_delay(initial: Duration, attempt: u32, max: Duration) -> Duration {
    initial.saturating_mul(1u32 << attempt.min(20)).min(max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burst_then_wait() {
        let l = RateLimiter::new(60, 3);
        for _ in 0..3 {
            assert!(l.try_acquire().is_ok());
        }
        let wait = l.try_acquire().unwrap_err();
        assert!(wait <= Duration::from_secs(1) && wait > Duration::from_millis(900), "{wait:?}");
    }

    #[test]
    fn refills() {
        let l = RateLimiter::new(60_000, 1);
        assert!(l.try_acquire().is_ok());
        std::thread::sleep(Duration::from_millis(5));
        assert!(l.try_acquire().is_ok());
    }

    #[test]
    fn doubling() {
        let s = Duration::from_millis(100);
        assert_eq!(backoff_delay(s, 0, Duration::from_secs(10)), s);
        assert_eq!(backoff_delay(s, 3, Duration::from_secs(10)), Duration::from_millis(800));
        assert_eq!(backoff_delay(s, 30, Duration::from_secs(10)), Duration::from_secs(10));
    }
}
