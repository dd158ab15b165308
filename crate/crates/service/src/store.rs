use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use veil_core::pipeline::Session;

use crate::error::ApiError;

pub struct SessionSlot {
    session: Mutex<Session>,
    busy: AtomicBool,
    last_used: Mutex<Instant>,
}

/// Held while a mutation runs; dropping it frees the session.
pub struct BusyGuard<'a>(&'a AtomicBool);

impl Drop for BusyGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

impl SessionSlot {
    fn new(session: Session) -> Self {
        Self {
            session: Mutex::new(session),
            busy: AtomicBool::new(false),
            last_used: Mutex::new(Instant::now()),
        }
    }

    pub fn lock(&self) -> MutexGuard<'_, Session> {
        self.session.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Claims the session for one mutation, or fails with 409.
    pub fn begin(&self) -> Result<BusyGuard<'_>, ApiError> {
        self.busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .map(|_| BusyGuard(&self.busy))
            .map_err(|_| ApiError::busy())
    }

    pub fn is_busy(&self) -> bool {
        self.busy.load(Ordering::Acquire)
    }

    fn touch(&self, now: Instant) {
        *self.last_used.lock().unwrap_or_else(|p| p.into_inner()) = now;
    }

    fn idle_since(&self) -> Instant {
        *self.last_used.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// In-memory sessions with idle expiry.
pub struct SessionStore {
    slots: Mutex<HashMap<String, Arc<SessionSlot>>>,
    ttl: Duration,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        Self {
            slots: Mutex::new(HashMap::new()),
            ttl,
        }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    fn map(&self) -> MutexGuard<'_, HashMap<String, Arc<SessionSlot>>> {
        self.slots.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn create(&self) -> (String, u64) {
        let s = Session::new();
        let (id, version) = (s.id().to_string(), s.version());
        self.map().insert(id.clone(), Arc::new(SessionSlot::new(s)));
        (id, version)
    }

    pub fn get(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        let slot = self
            .map()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))?;
        slot.touch(Instant::now());
        Ok(slot)
    }

    pub fn remove(&self, id: &str) -> bool {
        self.map().remove(id).is_some()
    }

    pub fn len(&self) -> usize {
        self.map().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops sessions idle for longer than the TTL, except busy ones.
    /// Returns how many were removed.
    pub fn sweep(&self, now: Instant) -> usize {
        let mut map = self.map();
        let before = map.len();
        map.retain(|_, s| s.is_busy() || now.saturating_duration_since(s.idle_since()) <= self.ttl);
        before - map.len()
    }
}
