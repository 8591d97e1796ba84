use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use satbot_core::corpus::Persona;
use satbot_core::dialogue::{DialogueEngine, DialogueError, SessionState, Turn, UserInput};
use satbot_core::protocols::ProtocolRef;
use serde::Serialize;
use tokio::sync::Mutex;
use zeroize::Zeroize;

use crate::auth::Credentials;
use crate::ServiceError;

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(60 * 60);

#[derive(Debug, Clone, Copy)]
pub struct ServiceConfig {
    pub idle_timeout: Duration,
    /// Base seed for per-session generators; `None` draws from the OS.
    pub seed: Option<u64>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PersonaInfo {
    pub id: &'static str,
    pub name: &'static str,
    pub description: &'static str,
}

impl From<Persona> for PersonaInfo {
    fn from(p: Persona) -> Self {
        Self {
            id: p.id(),
            name: p.display_name(),
            description: p.description(),
        }
    }
}

pub fn persona_menu() -> Vec<PersonaInfo> {
    Persona::ALL.into_iter().map(PersonaInfo::from).collect()
}

struct SessionRecord {
    username: String,
    created_at: Instant,
    last_active: Instant,
    state: Option<SessionState>,
    closed: bool,
}

impl SessionRecord {
    fn close(&mut self) {
        if let Some(mut s) = self.state.take() {
            s.wipe();
        }
        self.username.zeroize();
        self.closed = true;
    }
}

impl Drop for SessionRecord {
    fn drop(&mut self) {
        self.close();
    }
}

enum Slot {
    Live(Arc<Mutex<SessionRecord>>),
    /// Ended by the flow; only the time is kept so later calls can say so.
    Ended(Instant),
}

pub struct ChatService {
    engine: DialogueEngine,
    credentials: Credentials,
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Slot>>,
    issued: AtomicU64,
}

impl ChatService {
    pub fn new(engine: DialogueEngine, credentials: Credentials, config: ServiceConfig) -> Self {
        Self {
            engine,
            credentials,
            config,
            sessions: RwLock::new(HashMap::new()),
            issued: AtomicU64::new(0),
        }
    }

    pub fn engine(&self) -> &DialogueEngine {
        &self.engine
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn personas(&self) -> Vec<PersonaInfo> {
        persona_menu()
    }

    pub fn create_session(
        &self,
        username: &str,
        password: &str,
    ) -> Result<(String, Vec<PersonaInfo>), ServiceError> {
        if !self.credentials.verify(username, password) {
            return Err(ServiceError::Unauthorized);
        }
        let id = uuid::Uuid::new_v4().simple().to_string();
        let now = Instant::now();
        let record = SessionRecord {
            username: username.to_string(),
            created_at: now,
            last_active: now,
            state: None,
            closed: false,
        };
        self.write()
            .insert(id.clone(), Slot::Live(Arc::new(Mutex::new(record))));
        Ok((id, persona_menu()))
    }

    pub async fn select_persona(&self, id: &str, persona: &str) -> Result<Turn, ServiceError> {
        let persona: Persona = persona
            .parse()
            .map_err(|_| ServiceError::UnknownPersona(persona.to_string()))?;
        let record = self.live(id)?;
        let mut rec = record.lock().await;
        if rec.closed {
            return Err(ServiceError::NotFound);
        }
        rec.last_active = Instant::now();
        if rec.state.is_some() {
            return Err(ServiceError::Conflict("persona already chosen".into()));
        }
        let seed = self.next_seed();
        let (state, turn) = self.engine.start(id, persona, seed).map_err(internal)?;
        rec.state = Some(state);
        if turn.ended {
            self.finish(id, &mut rec);
        }
        Ok(turn)
    }

    /// Runs one turn. Turns for the same session run one at a time in the
    /// order their calls reached the session lock.
    pub async fn post_message(&self, id: &str, input: UserInput) -> Result<Turn, ServiceError> {
        let record = self.live(id)?;
        let mut rec = record.lock().await;
        if rec.closed {
            return Err(ServiceError::NotFound);
        }
        rec.last_active = Instant::now();
        let state = rec
            .state
            .as_mut()
            .ok_or_else(|| ServiceError::Conflict("choose a persona first".into()))?;
        match self.engine.step(state, input) {
            Ok(turn) => {
                if turn.ended {
                    self.finish(id, &mut rec);
                }
                Ok(turn)
            }
            Err(DialogueError::Input { reason, remaining }) => Err(ServiceError::InvalidInput {
                message: reason.to_string(),
                remaining_attempts: remaining,
                choices: self
                    .engine
                    .flow
                    .node(&state.current_node)
                    .map(|n| n.choice_labels())
                    .unwrap_or_default(),
            }),
            Err(DialogueError::Ended) => Err(ServiceError::Gone),
            Err(e) => Err(internal(e)),
        }
    }

    pub async fn suggestions(&self, id: &str) -> Result<Vec<ProtocolRef>, ServiceError> {
        let record = self.live(id)?;
        let mut rec = record.lock().await;
        if rec.closed {
            return Err(ServiceError::NotFound);
        }
        rec.last_active = Instant::now();
        let state = rec
            .state
            .as_ref()
            .ok_or_else(|| ServiceError::Conflict("choose a persona first".into()))?;
        Ok(self.engine.recommend(state))
    }

    /// Deletes the session and everything in it. Later calls see not-found.
    pub async fn end_session(&self, id: &str) -> Result<(), ServiceError> {
        let slot = self.write().remove(id).ok_or(ServiceError::NotFound)?;
        if let Slot::Live(record) = slot {
            record.lock().await.close();
        }
        Ok(())
    }

    /// Ends sessions idle for longer than the configured timeout and forgets
    /// old tombstones. Sessions mid-turn are skipped. Returns how many live
    /// sessions were ended.
    pub fn reap_idle(&self, now: Instant) -> usize {
        let timeout = self.config.idle_timeout;
        let expired = |t: Instant| now.saturating_duration_since(t) >= timeout;
        let mut ended = 0;
        self.write().retain(|_, slot| match slot {
            Slot::Ended(at) => !expired(*at),
            Slot::Live(record) => match record.try_lock() {
                Ok(mut rec) if expired(rec.last_active) => {
                    rec.close();
                    ended += 1;
                    false
                }
                _ => true,
            },
        });
        ended
    }

    pub fn live_sessions(&self) -> usize {
        self.read()
            .values()
            .filter(|s| matches!(s, Slot::Live(_)))
            .count()
    }

    /// Everything the store currently holds, rendered as text, for audits.
    pub async fn storage_dump(&self) -> String {
        let slots: Vec<(String, Option<Arc<Mutex<SessionRecord>>>)> = self
            .read()
            .iter()
            .map(|(id, slot)| match slot {
                Slot::Live(r) => (id.clone(), Some(r.clone())),
                Slot::Ended(_) => (id.clone(), None),
            })
            .collect();
        let mut out = String::new();
        for (id, record) in slots {
            out.push_str(&format!("session {id}\n"));
            let Some(record) = record else {
                out.push_str("  ended\n");
                continue;
            };
            let rec = record.lock().await;
            out.push_str(&format!(
                "  user {}\n  age {:?}\n",
                rec.username,
                rec.created_at.elapsed()
            ));
            if let Some(s) = &rec.state {
                out.push_str(&format!(
                    "  persona {}\n  node {}\n  emotion {:?}\n  suggestions {:?}\n  feedback {:?}\n",
                    s.persona, s.current_node, s.detected_emotion, s.suggestions, s.feedback
                ));
                for t in &s.transcript {
                    out.push_str(&format!("  {:?}: {}\n", t.speaker, t.text));
                }
                for m in s.memory.texts() {
                    out.push_str(&format!("  memory: {m}\n"));
                }
            }
        }
        out
    }

    fn finish(&self, id: &str, rec: &mut SessionRecord) {
        rec.close();
        if let Some(slot) = self.write().get_mut(id) {
            *slot = Slot::Ended(Instant::now());
        }
    }

    fn live(&self, id: &str) -> Result<Arc<Mutex<SessionRecord>>, ServiceError> {
        match self.read().get(id) {
            Some(Slot::Live(r)) => Ok(r.clone()),
            Some(Slot::Ended(_)) => Err(ServiceError::Gone),
            None => Err(ServiceError::NotFound),
        }
    }

    fn next_seed(&self) -> u64 {
        let n = self.issued.fetch_add(1, Ordering::Relaxed);
        match self.config.seed {
            Some(base) => base.wrapping_add(n.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            None => rand::random(),
        }
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, HashMap<String, Slot>> {
        self.sessions.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, HashMap<String, Slot>> {
        self.sessions.write().unwrap_or_else(|e| e.into_inner())
    }
}

// Not logged: engine errors can quote the user's message.
fn internal(e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Internal(e.to_string())
}

/// Periodically reaps idle sessions until the service is dropped.
pub fn spawn_reaper(service: Arc<ChatService>) -> tokio::task::JoinHandle<()> {
    let period = (service.config.idle_timeout / 4).clamp(Duration::from_secs(1), Duration::from_secs(60));
    let weak = Arc::downgrade(&service);
    drop(service);
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let Some(svc) = weak.upgrade() else { break };
            svc.reap_idle(Instant::now());
        }
    })
}
