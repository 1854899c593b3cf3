//! Session registry and on-disk snapshots.
//!
//! A snapshot holds the source ontologies, the configuration and the journal
//! of mutations. Loading replays the journal against fresh sources, so a
//! restarted service ends up in the same state.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use ontomerge::advisor::{Advisor, AdvisorError};
use ontomerge::engine::{MergeSession, Operation, SessionConfig};
use ontomerge::matcher::MatchConfig;
use ontomerge::Ontology;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

/// One mutation, as recorded in the journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Apply { operation: Operation },
    Undo,
    SetPreferred { preferred: Option<String> },
    Dismiss { operation: Operation },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Snapshot {
    id: Uuid,
    created_at: DateTime<Utc>,
    config: SessionConfig,
    threshold: f64,
    sources: Vec<Ontology>,
    journal: Vec<Event>,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Advisor(#[from] AdvisorError),
    #[error("snapshot `{path}`: {message}")]
    Snapshot { path: PathBuf, message: String },
    #[error("cannot write snapshot `{path}`: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub struct Entry {
    pub id: Uuid,
    pub created_at: DateTime<Utc>,
    /// Number of mutations applied since creation.
    pub version: u64,
    pub advisor: Advisor,
    /// Configuration at creation; the journal replays later changes.
    initial: SessionConfig,
    journal: Vec<Event>,
}

impl Entry {
    fn new(id: Uuid, created_at: DateTime<Utc>, sources: Vec<Ontology>, config: SessionConfig, threshold: f64) -> Result<Self, AdvisorError> {
        let session = MergeSession::new(sources, config.clone())?;
        let matching = MatchConfig { threshold, ..MatchConfig::default() };
        let advisor = Advisor::new(session, matching)?;
        Ok(Self { id, created_at, version: 0, advisor, initial: config, journal: Vec::new() })
    }

    /// Records a mutation that already succeeded on the advisor.
    pub fn record(&mut self, event: Event) {
        self.journal.push(event);
        self.version += 1;
    }

    pub fn journal(&self) -> &[Event] {
        &self.journal
    }

    fn replay(&mut self, event: &Event) -> Result<(), AdvisorError> {
        match event {
            Event::Apply { operation } => self.advisor.step(operation.clone()).map(drop),
            Event::Undo => self.advisor.undo(),
            Event::SetPreferred { preferred } => self.advisor.set_preferred(preferred.clone()),
            Event::Dismiss { operation } => self.advisor.dismiss(operation),
        }
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            id: self.id,
            created_at: self.created_at,
            config: self.initial.clone(),
            threshold: self.advisor.config().threshold,
            sources: self.advisor.session().sources().to_vec(),
            journal: self.journal.clone(),
        }
    }
}

pub type SharedEntry = Arc<Mutex<Entry>>;

/// All live sessions, optionally mirrored to a directory.
#[derive(Default)]
pub struct SessionStore {
    sessions: RwLock<HashMap<Uuid, SharedEntry>>,
    dir: Option<PathBuf>,
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens `dir`, creating it if needed, and restores every snapshot in it.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|source| StoreError::Io { path: dir.clone(), source })?;
        let store = Self { sessions: RwLock::new(HashMap::new()), dir: Some(dir.clone()) };
        let entries = fs::read_dir(&dir).map_err(|source| StoreError::Io { path: dir.clone(), source })?;
        for entry in entries {
            let path = entry.map_err(|source| StoreError::Io { path: dir.clone(), source })?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let restored = load(&path)?;
                store.sessions.write().insert(restored.id, Arc::new(Mutex::new(restored)));
            }
        }
        Ok(store)
    }

    pub fn create(&self, sources: Vec<Ontology>, config: SessionConfig, threshold: f64) -> Result<SharedEntry, StoreError> {
        let entry = Entry::new(Uuid::new_v4(), Utc::now(), sources, config, threshold)?;
        self.persist(&entry)?;
        let shared = Arc::new(Mutex::new(entry));
        let id = shared.lock().id;
        self.sessions.write().insert(id, shared.clone());
        Ok(shared)
    }

    pub fn get(&self, id: &Uuid) -> Option<SharedEntry> {
        self.sessions.read().get(id).cloned()
    }

    pub fn ids(&self) -> Vec<Uuid> {
        let mut ids: Vec<Uuid> = self.sessions.read().keys().copied().collect();
        ids.sort();
        ids
    }

    /// Writes the entry's snapshot, replacing the previous one atomically.
    pub fn persist(&self, entry: &Entry) -> Result<(), StoreError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(format!("{}.json", entry.id));
        let tmp = dir.join(format!("{}.json.tmp", entry.id));
        let text = serde_json::to_string_pretty(&entry.snapshot()).expect("snapshots serialize");
        fs::write(&tmp, text).map_err(|source| StoreError::Io { path: tmp.clone(), source })?;
        fs::rename(&tmp, &path).map_err(|source| StoreError::Io { path, source })
    }
}

fn load(path: &Path) -> Result<Entry, StoreError> {
    let bad = |message: String| StoreError::Snapshot { path: path.to_path_buf(), message };
    let text = fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let snap: Snapshot = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let mut entry = Entry::new(snap.id, snap.created_at, snap.sources, snap.config, snap.threshold)?;
    for (i, event) in snap.journal.into_iter().enumerate() {
        entry.replay(&event).map_err(|e| bad(format!("journal entry {}: {e}", i + 1)))?;
        entry.record(event);
    }
    Ok(entry)
}
