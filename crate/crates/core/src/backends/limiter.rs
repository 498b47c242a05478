use std::collections::VecDeque;
use std::future::Future;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use tokio::time::Instant;

use super::BackendError;
use crate::model::RetryPolicy;

const WINDOW: Duration = Duration::from_secs(60);

#[async_trait]
pub trait Clock: Send + Sync {
    /// Time elapsed since the clock's origin.
    fn now(&self) -> Duration;
    async fn sleep(&self, d: Duration);
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

#[async_trait]
impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    async fn sleep(&self, d: Duration) {
        tokio::time::sleep(d).await;
    }
}

/// Virtual clock: `sleep` advances time instantly.
#[derive(Debug, Default)]
pub struct ManualClock {
    now: Mutex<Duration>,
    slept: Mutex<Vec<Duration>>,
}

impl ManualClock {
    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }

    /// Every sleep requested so far.
    pub fn sleeps(&self) -> Vec<Duration> {
        self.slept.lock().unwrap().clone()
    }
}

#[async_trait]
impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    async fn sleep(&self, d: Duration) {
        self.slept.lock().unwrap().push(d);
        self.advance(d);
        tokio::task::yield_now().await;
    }
}

/// Sliding-window limiter: at most `per_minute` acquisitions in any 60 s window.
pub struct RateLimiter {
    per_minute: u32,
    clock: Arc<dyn Clock>,
    window: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn new(per_minute: u32, clock: Arc<dyn Clock>) -> Self {
        assert!(per_minute > 0, "rate limit must be positive");
        Self {
            per_minute,
            clock,
            window: Mutex::new(VecDeque::new()),
        }
    }

    /// Takes a slot now, or returns how long to wait before trying again.
    fn try_acquire(&self) -> Result<(), Duration> {
        let now = self.clock.now();
        let mut window = self.window.lock().unwrap();
        while window.front().is_some_and(|&t| now.saturating_sub(t) >= WINDOW) {
            window.pop_front();
        }
        if window.len() < self.per_minute as usize {
            window.push_back(now);
            Ok(())
        } else {
            let oldest = *window.front().expect("window is full");
            Err((oldest + WINDOW).saturating_sub(now).max(Duration::from_millis(1)))
        }
    }

    pub async fn acquire(&self) {
        loop {
            match self.try_acquire() {
                Ok(()) => return,
                Err(wait) => self.clock.sleep(wait).await,
            }
        }
    }

    /// Acquisition timestamps still inside the window.
    pub fn recent(&self) -> Vec<Duration> {
        self.window.lock().unwrap().iter().copied().collect()
    }
}

/// Retry with exponential backoff plus optional rate limiting for one backend.
#[derive(Clone)]
pub struct CallPolicy {
    retry: RetryPolicy,
    limiter: Option<Arc<RateLimiter>>,
    clock: Arc<dyn Clock>,
}

impl CallPolicy {
    pub fn new(retry: RetryPolicy, requests_per_minute: Option<u32>, clock: Arc<dyn Clock>) -> Self {
        let limiter = requests_per_minute.map(|n| Arc::new(RateLimiter::new(n, clock.clone())));
        Self {
            retry,
            limiter,
            clock,
        }
    }

    pub fn unlimited(retry: RetryPolicy) -> Self {
        Self::new(retry, None, Arc::new(SystemClock::default()))
    }

    pub fn limiter(&self) -> Option<&Arc<RateLimiter>> {
        self.limiter.as_ref()
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt.saturating_sub(1)).unwrap_or(u64::MAX);
        let ms = self
            .retry
            .base_delay_ms
            .saturating_mul(factor)
            .min(self.retry.max_delay_ms);
        Duration::from_millis(ms)
    }

    /// Runs `op` until it succeeds, fails with a non-retryable class, or the
    /// attempt budget is spent. The last error is returned.
    pub async fn run<T, F, Fut>(&self, mut op: F) -> Result<T, BackendError>
    where
        F: FnMut() -> Fut,
        Fut: Future<Output = Result<T, BackendError>>,
    {
        let mut attempt = 1;
        loop {
            if let Some(l) = &self.limiter {
                l.acquire().await;
            }
            match op().await {
                Ok(v) => return Ok(v),
                Err(e) if e.class.is_retryable() && attempt < self.retry.max_attempts => {
                    tracing::debug!(attempt, error = %e, "retrying backend call");
                    self.clock.sleep(self.backoff(attempt)).await;
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}
