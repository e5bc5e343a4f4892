use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tokio::sync::Mutex as SessionLock;

use crate::engine::Session;
use crate::error::ServiceError;

pub type SharedSession = Arc<SessionLock<Session>>;

const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    sessions: Vec<Session>,
}

struct Slot {
    session: SharedSession,
    touched: Instant,
}

/// In-memory sessions keyed by id. A session idle for longer than the TTL
/// is evicted and lookups for it fail.
pub struct SessionStore {
    ttl: Duration,
    slots: Mutex<HashMap<String, Slot>>,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        SessionStore {
            ttl,
            slots: Mutex::new(HashMap::new()),
        }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    fn slots(&self) -> std::sync::MutexGuard<'_, HashMap<String, Slot>> {
        self.slots.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn insert(&self, session: Session) -> SharedSession {
        let shared = Arc::new(SessionLock::new(session));
        let id = shared.try_lock().expect("new session is unlocked").session_id.clone();
        self.slots().insert(
            id,
            Slot {
                session: shared.clone(),
                touched: Instant::now(),
            },
        );
        shared
    }

    /// Looks a session up and refreshes its idle timer.
    pub fn get(&self, id: &str) -> Option<SharedSession> {
        let mut slots = self.slots();
        let now = Instant::now();
        match slots.get_mut(id) {
            Some(slot) if now.duration_since(slot.touched) <= self.ttl => {
                slot.touched = now;
                Some(slot.session.clone())
            }
            Some(_) => {
                slots.remove(id);
                None
            }
            None => None,
        }
    }

    pub fn remove(&self, id: &str) -> bool {
        self.slots().remove(id).is_some()
    }

    /// Drops every expired session and returns how many were dropped.
    pub fn sweep(&self) -> usize {
        let now = Instant::now();
        let mut slots = self.slots();
        let before = slots.len();
        slots.retain(|_, slot| now.duration_since(slot.touched) <= self.ttl);
        before - slots.len()
    }

    pub fn len(&self) -> usize {
        self.slots().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Copies of all live sessions, ordered by id. Each session is locked
    /// in turn, so in-flight messages finish first.
    pub async fn sessions(&self) -> Vec<Session> {
        let shared: Vec<SharedSession> = self.slots().values().map(|s| s.session.clone()).collect();
        let mut out = Vec::with_capacity(shared.len());
        for session in shared {
            out.push(session.lock().await.clone());
        }
        out.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        out
    }

    pub async fn save_snapshot(&self, path: &Path) -> Result<usize, ServiceError> {
        let snapshot = Snapshot {
            version: SNAPSHOT_VERSION,
            sessions: self.sessions().await,
        };
        let err = |message: String| ServiceError::Snapshot {
            path: path.display().to_string(),
            message,
        };
        let bytes = serde_json::to_vec(&snapshot).map_err(|e| err(e.to_string()))?;
        std::fs::write(path, bytes).map_err(|e| err(e.to_string()))?;
        Ok(snapshot.sessions.len())
    }

    /// Restores sessions from a snapshot; restored sessions start a fresh idle timer.
    pub fn load_snapshot(&self, path: &Path) -> Result<usize, ServiceError> {
        let err = |message: String| ServiceError::Snapshot {
            path: path.display().to_string(),
            message,
        };
        let bytes = std::fs::read(path).map_err(|e| err(e.to_string()))?;
        let snapshot: Snapshot = serde_json::from_slice(&bytes).map_err(|e| err(e.to_string()))?;
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(err(format!("unsupported version {}", snapshot.version)));
        }
        let n = snapshot.sessions.len();
        for session in snapshot.sessions {
            self.insert(session);
        }
        Ok(n)
    }
}
