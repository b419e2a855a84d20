use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RetryConfig;

/// Exponential backoff with bounded multiplicative jitter.
///
/// The delay after attempt `n` is `min(max, base * 2^(n-1) * (1 + j/2))`
/// with `j` in `[0, 1)`. The jitter factor stays below 2, so the schedule is
/// non-decreasing and never exceeds `max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff: Duration,
    pub max_backoff: Duration,
}

impl From<RetryConfig> for RetryPolicy {
    fn from(c: RetryConfig) -> Self {
        Self {
            max_attempts: c.max_attempts.max(1),
            base_backoff: Duration::from_millis(c.base_backoff_ms),
            max_backoff: Duration::from_millis(c.max_backoff_ms),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32, jitter: f64) -> Duration {
        let exp = attempt.saturating_sub(1).min(62);
        let raw = self.base_backoff.as_secs_f64() * (1u64 << exp) as f64 * (1.0 + jitter.clamp(0.0, 1.0) / 2.0);
        Duration::from_secs_f64(raw.min(self.max_backoff.as_secs_f64()))
    }

    /// Delays between consecutive attempts (`max_attempts - 1` entries).
    pub fn schedule(&self, jitter_seed: u64) -> Vec<Duration> {
        let mut rng = ChaCha8Rng::seed_from_u64(jitter_seed);
        (1..self.max_attempts)
            .map(|n| self.delay(n, rng.random::<f64>()))
            .collect()
    }
}

/// Spaces request starts at least `1 / rate` seconds apart across threads.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Option<Duration>,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(requests_per_second: Option<f64>) -> Self {
        let interval = requests_per_second
            .filter(|r| *r > 0.0 && r.is_finite())
            .map(|r| Duration::from_secs_f64(1.0 / r));
        Self {
            interval,
            next: Mutex::new(None),
        }
    }

    /// Blocks until this caller's slot arrives.
    pub fn acquire(&self) {
        let Some(interval) = self.interval else {
            return;
        };
        let wait_until = {
            let mut next = self.next.lock().expect("rate limiter lock");
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + interval);
            slot
        };
        let now = Instant::now();
        if wait_until > now {
            thread::sleep(wait_until - now);
        }
    }
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
pub struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

pub struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut p = self.permits.lock().expect("semaphore lock");
        while *p == 0 {
            p = self.cv.wait(p).expect("semaphore lock");
        }
        *p -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().expect("semaphore lock") += 1;
        self.0.cv.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    proptest! {
        #[test]
        fn schedule_is_monotone_and_capped(
            attempts in 1u32..40,
            base_ms in 1u64..2_000,
            extra_ms in 0u64..60_000,
            seed in any::<u64>(),
        ) {
            let policy = RetryPolicy {
                max_attempts: attempts,
                base_backoff: Duration::from_millis(base_ms),
                max_backoff: Duration::from_millis(base_ms + extra_ms),
            };
            let s = policy.schedule(seed);
            prop_assert_eq!(s.len() as u32, attempts - 1);
            for w in s.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            for d in &s {
                prop_assert!(*d <= policy.max_backoff);
                prop_assert!(*d >= policy.base_backoff.min(policy.max_backoff));
            }
        }
    }

    #[test]
    fn doubling_without_jitter() {
        let p = RetryPolicy {
            max_attempts: 5,
            base_backoff: Duration::from_millis(100),
            max_backoff: Duration::from_millis(500),
        };
        let got: Vec<u128> = (1..=4).map(|n| p.delay(n, 0.0).as_millis()).collect();
        assert_eq!(got, vec![100, 200, 400, 500]);
    }

    #[test]
    fn semaphore_bounds_concurrency() {
        let sem = Arc::new(Semaphore::new(2));
        let live = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        thread::scope(|s| {
            for _ in 0..8 {
                let (sem, live, peak) = (sem.clone(), live.clone(), peak.clone());
                s.spawn(move || {
                    let _p = sem.acquire();
                    let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    thread::sleep(Duration::from_millis(5));
                    live.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }

    #[test]
    fn rate_limiter_spaces_requests() {
        let limiter = RateLimiter::new(Some(200.0));
        let start = Instant::now();
        for _ in 0..5 {
            limiter.acquire();
        }
        // first slot is immediate, the next four are 5 ms apart
        assert!(start.elapsed() >= Duration::from_millis(19));
        let unlimited = RateLimiter::new(None);
        let t = Instant::now();
        for _ in 0..1000 {
            unlimited.acquire();
        }
        assert!(t.elapsed() < Duration::from_millis(100));
    }
}
