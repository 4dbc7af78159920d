use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::clock::Clock;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dispatch {
    pub host: String,
    pub at: Duration,
}

/// Per-host minimum spacing between dispatched requests, shared across threads.
///
/// Callers reserve the next free slot under a lock and then sleep until it,
/// so reserved slots on one host are always at least `1 / rate` apart.
pub struct RateLimiter {
    clock: Arc<dyn Clock>,
    next_free: Mutex<HashMap<String, Duration>>,
    log: Mutex<Vec<Dispatch>>,
}

impl RateLimiter {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Self {
            clock,
            next_free: Mutex::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Blocks until `host` may be contacted at `rate` requests per second and
    /// returns the dispatch time.
    pub fn acquire(&self, host: &str, rate: f64) -> Duration {
        let spacing = Duration::from_secs_f64(1.0 / rate.max(f64::MIN_POSITIVE));
        let slot = {
            let mut map = self.next_free.lock().expect("limiter lock");
            let now = self.clock.now();
            let slot = map.get(host).map_or(now, |&free| free.max(now));
            map.insert(host.to_string(), slot + spacing);
            self.log.lock().expect("limiter log").push(Dispatch { host: host.to_string(), at: slot });
            slot
        };
        self.clock.sleep_until(slot);
        slot
    }

    pub fn dispatches(&self) -> Vec<Dispatch> {
        self.log.lock().expect("limiter log").clone()
    }

    pub fn dispatches_for(&self, host: &str) -> Vec<Duration> {
        let mut v: Vec<Duration> = self
            .dispatches()
            .into_iter()
            .filter(|d| d.host == host)
            .map(|d| d.at)
            .collect();
        v.sort();
        v
    }
}

impl std::fmt::Debug for RateLimiter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RateLimiter").field("hosts", &self.next_free.lock().map(|m| m.len()).unwrap_or(0)).finish()
    }
}
