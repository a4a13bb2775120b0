//! Uniform access to text-completion backends.
//!
//! A [`Gateway`] wraps one [`Backend`] (a real HTTP chat API or the
//! deterministic [`mock::MockBackend`]) and adds retries with exponential
//! backoff, a semaphore bounding in-flight requests, and a content-addressed
//! response cache. Batch fan-out goes through [`pool::map_ordered`], which
//! preserves input order regardless of completion order.

pub mod cache;
pub mod http;
pub mod mock;
pub mod pool;

use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::digest::sha256_hex;
use crate::error::{Error, Result};

/// One prompt sent to a backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub model_tag: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub request_id: String,
}

impl CompletionRequest {
    pub fn validate(&self) -> Result<()> {
        if self.prompt.is_empty() {
            return Err(Error::Backend {
                request_id: self.request_id.clone(),
                detail: "empty prompt".into(),
            });
        }
        if !(self.temperature >= 0.0) || self.max_tokens == 0 {
            return Err(Error::Backend {
                request_id: self.request_id.clone(),
                detail: format!(
                    "invalid decoding parameters: temperature {} max_tokens {}",
                    self.temperature, self.max_tokens
                ),
            });
        }
        Ok(())
    }
}

/// Backend text plus provenance for one completed request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub request_id: String,
    pub backend: String,
    pub cached: bool,
    pub attempt_count: u32,
    /// Epoch seconds when the text was first obtained; cache hits carry the
    /// stored entry's timestamp, keeping derived artifacts stable across
    /// resumed runs.
    pub created_at: u64,
}

/// Failure modes a backend reports; the gateway decides what to do with each.
#[derive(Debug, Clone)]
pub enum BackendFailure {
    /// Worth retrying: rate limits, 5xx, connect/timeout failures.
    Transient(String),
    /// Not worth retrying: auth failures, 4xx, refused configuration.
    Permanent(String),
    /// The backend answered but the payload could not be decoded.
    Malformed(String),
}

pub trait Backend: Send + Sync {
    /// Stable identifier that becomes part of the cache key.
    fn name(&self) -> &str;

    fn complete(&self, request: &CompletionRequest) -> std::result::Result<String, BackendFailure>;
}

/// Exponential backoff settings for transient failures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay_ms: 250,
            max_delay_ms: 8_000,
            jitter: true,
        }
    }
}

impl RetryPolicy {
    /// Delay before the next attempt. Jitter is derived from the request id
    /// and attempt number, so it spreads concurrent retries without
    /// introducing nondeterminism into outputs.
    fn delay(&self, request_id: &str, attempt: u32) -> Duration {
        let exp = self.base_delay_ms.saturating_mul(1u64 << (attempt - 1).min(16));
        let capped = exp.min(self.max_delay_ms);
        if !self.jitter || capped == 0 {
            return Duration::from_millis(capped);
        }
        let digest = sha256_hex(format!("{request_id}:{attempt}").as_bytes());
        let byte = u64::from_str_radix(&digest[..2], 16).unwrap_or(0);
        // uniform in [capped/2, capped]
        Duration::from_millis(capped / 2 + (capped / 2) * byte / 255)
    }
}

/// Counting semaphore bounding in-flight backend calls.
struct Limiter {
    max: usize,
    in_flight: Mutex<usize>,
    released: Condvar,
}

struct LimiterGuard<'a>(&'a Limiter);

impl Limiter {
    fn new(max: usize) -> Self {
        Limiter {
            max: max.max(1),
            in_flight: Mutex::new(0),
            released: Condvar::new(),
        }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut count = self.in_flight.lock().unwrap();
        while *count >= self.max {
            count = self.released.wait(count).unwrap();
        }
        *count += 1;
        LimiterGuard(self)
    }
}

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        let mut count = self.0.in_flight.lock().unwrap();
        *count -= 1;
        self.0.released.notify_one();
    }
}

/// Retrying, rate-bounded, optionally caching front door to a backend.
pub struct Gateway {
    backend: Box<dyn Backend>,
    retry: RetryPolicy,
    limiter: Limiter,
    cache: Option<cache::Cache>,
    concurrency: usize,
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>, retry: RetryPolicy, concurrency: usize) -> Self {
        let concurrency = concurrency.max(1);
        Gateway {
            backend,
            retry,
            limiter: Limiter::new(concurrency),
            cache: None,
            concurrency,
        }
    }

    /// Enable the on-disk response cache rooted at `dir`.
    pub fn with_cache(mut self, dir: &Path) -> Self {
        self.cache = Some(cache::Cache::new(dir));
        self
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn concurrency(&self) -> usize {
        self.concurrency
    }

    /// Complete a request against the backend, retrying transient failures
    /// with exponential backoff up to the configured attempt limit.
    pub fn complete(&self, request: &CompletionRequest) -> Result<Completion> {
        request.validate()?;
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let outcome = {
                let _slot = self.limiter.acquire();
                self.backend.complete(request)
            };
            match outcome {
                Ok(text) => {
                    return Ok(Completion {
                        text,
                        request_id: request.request_id.clone(),
                        backend: self.backend.name().to_string(),
                        cached: false,
                        attempt_count: attempt,
                        created_at: now_epoch_secs(),
                    });
                }
                Err(BackendFailure::Transient(detail)) => {
                    if attempt >= self.retry.max_attempts {
                        return Err(Error::RetriesExhausted {
                            request_id: request.request_id.clone(),
                            attempts: attempt,
                            last: detail,
                        });
                    }
                    let delay = self.retry.delay(&request.request_id, attempt);
                    tracing::warn!(
                        request_id = %request.request_id,
                        attempt,
                        delay_ms = delay.as_millis() as u64,
                        detail = %detail,
                        "transient backend failure, retrying"
                    );
                    std::thread::sleep(delay);
                }
                Err(BackendFailure::Permanent(detail)) => {
                    return Err(Error::Backend {
                        request_id: request.request_id.clone(),
                        detail,
                    });
                }
                Err(BackendFailure::Malformed(detail)) => {
                    return Err(Error::MalformedPayload {
                        request_id: request.request_id.clone(),
                        detail,
                    });
                }
            }
        }
    }

    /// Complete through the cache: a hit returns the stored bytes with
    /// `cached = true`; a miss delegates to [`Gateway::complete`] and stores
    /// the result. Without a configured cache this is plain completion.
    pub fn complete_cached(&self, request: &CompletionRequest) -> Result<Completion> {
        request.validate()?;
        let Some(store) = &self.cache else {
            return self.complete(request);
        };
        let key = cache::cache_key(self.backend.name(), request);
        if let Some(entry) = store.read(&key)? {
            return Ok(Completion {
                text: entry.text,
                request_id: request.request_id.clone(),
                backend: entry.backend,
                cached: true,
                attempt_count: 1,
                created_at: entry.created_at,
            });
        }
        let completion = self.complete(request)?;
        store.write(
            &key,
            &cache::CacheEntry {
                request: request.clone(),
                text: completion.text.clone(),
                backend: completion.backend.clone(),
                created_at: completion.created_at,
            },
        )?;
        Ok(completion)
    }

    /// Complete bypassing any cached entry, then write the fresh result
    /// through to the cache. Used by parse-retry paths where the cached
    /// completion is known to be unusable.
    pub fn complete_fresh(&self, request: &CompletionRequest) -> Result<Completion> {
        let completion = self.complete(request)?;
        if let Some(store) = &self.cache {
            let key = cache::cache_key(self.backend.name(), request);
            store.write(
                &key,
                &cache::CacheEntry {
                    request: request.clone(),
                    text: completion.text.clone(),
                    backend: completion.backend.clone(),
                    created_at: completion.created_at,
                },
            )?;
        }
        Ok(completion)
    }

    /// Fan a batch out through the worker pool, bounded by this gateway's
    /// concurrency limit, preserving input order in the returned vector.
    pub fn map_ordered<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync,
    {
        pool::map_ordered(items, self.concurrency, f)
    }
}

fn now_epoch_secs() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};

    fn request(id: &str) -> CompletionRequest {
        CompletionRequest {
            prompt: "hello".into(),
            model_tag: "test-model".into(),
            temperature: 1.0,
            max_tokens: 64,
            request_id: id.into(),
        }
    }

    /// Fails with a transient error `failures` times, then succeeds.
    struct FlakyBackend {
        failures: u32,
        calls: AtomicU32,
    }

    impl Backend for FlakyBackend {
        fn name(&self) -> &str {
            "flaky"
        }
        fn complete(&self, _req: &CompletionRequest) -> std::result::Result<String, BackendFailure> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(BackendFailure::Transient(format!("failure {n}")))
            } else {
                Ok("recovered".into())
            }
        }
    }

    fn fast_retry(max_attempts: u32) -> RetryPolicy {
        RetryPolicy {
            max_attempts,
            base_delay_ms: 0,
            max_delay_ms: 0,
            jitter: false,
        }
    }

    #[test]
    fn two_transient_failures_then_success_counts_three_attempts() {
        let gateway = Gateway::new(
            Box::new(FlakyBackend {
                failures: 2,
                calls: AtomicU32::new(0),
            }),
            fast_retry(5),
            1,
        );
        let completion = gateway.complete(&request("r1")).unwrap();
        assert_eq!(completion.text, "recovered");
        assert_eq!(completion.attempt_count, 3);
        assert!(!completion.cached);
    }

    #[test]
    fn attempt_limit_three_with_three_failures_exhausts_retries() {
        let gateway = Gateway::new(
            Box::new(FlakyBackend {
                failures: 3,
                calls: AtomicU32::new(0),
            }),
            fast_retry(3),
            1,
        );
        let err = gateway.complete(&request("r2")).unwrap_err();
        match err {
            Error::RetriesExhausted { attempts, .. } => assert_eq!(attempts, 3),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn permanent_failure_is_not_retried() {
        struct DeadBackend(AtomicU32);
        impl Backend for DeadBackend {
            fn name(&self) -> &str {
                "dead"
            }
            fn complete(
                &self,
                _req: &CompletionRequest,
            ) -> std::result::Result<String, BackendFailure> {
                self.0.fetch_add(1, Ordering::SeqCst);
                Err(BackendFailure::Permanent("401".into()))
            }
        }
        let backend = DeadBackend(AtomicU32::new(0));
        let gateway = Gateway::new(Box::new(backend), fast_retry(5), 1);
        assert!(matches!(
            gateway.complete(&request("r3")),
            Err(Error::Backend { .. })
        ));
    }

    #[test]
    fn empty_prompt_is_rejected_before_the_backend_sees_it() {
        let gateway = Gateway::new(
            Box::new(FlakyBackend {
                failures: 0,
                calls: AtomicU32::new(0),
            }),
            fast_retry(1),
            1,
        );
        let mut req = request("r4");
        req.prompt.clear();
        assert!(gateway.complete(&req).is_err());
    }

    /// Records the maximum number of concurrent entries.
    struct CountingBackend {
        current: std::sync::Arc<AtomicUsize>,
        peak: std::sync::Arc<AtomicUsize>,
    }

    impl Backend for CountingBackend {
        fn name(&self) -> &str {
            "counting"
        }
        fn complete(&self, req: &CompletionRequest) -> std::result::Result<String, BackendFailure> {
            let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(3));
            self.current.fetch_sub(1, Ordering::SeqCst);
            Ok(format!("done {}", req.request_id))
        }
    }

    #[test]
    fn in_flight_requests_never_exceed_the_configured_limit() {
        let peak = std::sync::Arc::new(AtomicUsize::new(0));
        let backend = Box::new(CountingBackend {
            current: std::sync::Arc::new(AtomicUsize::new(0)),
            peak: peak.clone(),
        });
        let gateway = Gateway::new(backend, fast_retry(1), 3);

        let items: Vec<CompletionRequest> = (0..24).map(|i| request(&format!("c{i}"))).collect();
        let results = gateway.map_ordered(&items, |_, req| gateway.complete(req).unwrap());

        // results arrive in input order
        for (i, completion) in results.iter().enumerate() {
            assert_eq!(completion.text, format!("done c{i}"));
        }
        let peak = peak.load(Ordering::SeqCst);
        assert!(peak <= 3, "peak concurrency {peak} exceeded limit 3");
        assert!(peak >= 2, "pool never ran concurrently");
    }
}
