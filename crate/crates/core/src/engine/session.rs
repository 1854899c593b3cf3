use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::apply::Apply;
use super::{EngineError, Operation, SessionConfig};
use crate::datatype::{is_ncname, XsdKind};
use crate::model::{FrameId, FrameKind, FrameRef, Ontology};

/// One side of an unresolved datatype-range disagreement on a merged slot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RangeCandidate {
    /// Source ontology the kind comes from.
    pub origin: String,
    pub kind: XsdKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FollowUpKind {
    SlotMerge,
    InstanceValue,
}

/// An operation the engine proposes after applying another one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowUp {
    pub kind: FollowUpKind,
    pub operation: Operation,
    pub reason: String,
    pub frames: Vec<FrameId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub operation: Operation,
    /// Preferred source in effect when the operation was applied.
    #[serde(default)]
    pub preferred: Option<String>,
}

/// What an applied operation did to the merged ontology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppliedRecord {
    pub operation: Operation,
    /// The frame the operation produced or edited, if any.
    pub result: Option<FrameRef>,
    pub created: Vec<FrameRef>,
    pub deleted: Vec<FrameRef>,
    /// Frames present before and after whose content changed.
    pub rewritten: Vec<FrameRef>,
    pub follow_ups: Vec<FollowUp>,
}

impl AppliedRecord {
    /// Operation arguments plus every created, deleted or rewritten frame.
    pub fn touched(&self, merged: &str) -> BTreeSet<FrameId> {
        self.operation
            .frame_args(merged)
            .into_iter()
            .chain(self.created.iter().cloned())
            .chain(self.deleted.iter().cloned())
            .chain(self.rewritten.iter().cloned())
            .map(|r| r.id)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct State {
    pub merged: Ontology,
    pub images: BTreeMap<FrameRef, String>,
    /// Merged frames introduced by explicit edits rather than as images.
    pub created: BTreeSet<(FrameKind, String)>,
    pub pending: BTreeMap<String, Vec<RangeCandidate>>,
}

impl State {
    fn new(merged_name: &str) -> Self {
        Self { merged: Ontology::new(merged_name), images: BTreeMap::new(), created: BTreeSet::new(), pending: BTreeMap::new() }
    }
}

/// Source ontologies, the merged ontology and the bookkeeping between them.
///
/// Operations run on a copy of the state and are committed only when they
/// succeed and leave the merged ontology well-formed.
#[derive(Debug, Clone)]
pub struct MergeSession {
    sources: Vec<Ontology>,
    config: SessionConfig,
    state: State,
    log: Vec<LogEntry>,
}

impl MergeSession {
    pub fn new(sources: Vec<Ontology>, config: SessionConfig) -> Result<Self, EngineError> {
        let bad = |m: String| Err(EngineError::InvalidConfig(m));
        if sources.len() < 2 {
            return bad("at least two source ontologies are required".into());
        }
        if !is_ncname(&config.merged_name) {
            return bad(format!("merged ontology name `{}` is not an NCName", config.merged_name));
        }
        let mut names = BTreeSet::new();
        for source in &sources {
            if !is_ncname(&source.name) {
                return bad(format!("source ontology name `{}` is not an NCName", source.name));
            }
            if source.name == config.merged_name {
                return bad(format!("source `{}` has the merged ontology's name", source.name));
            }
            if !names.insert(source.name.as_str()) {
                return bad(format!("duplicate source name `{}`", source.name));
            }
            let violations = source.validate();
            if !violations.is_empty() {
                return bad(format!("source `{}` is ill-formed: {}", source.name, violations[0]));
            }
        }
        if let Some(p) = &config.preferred {
            if !names.contains(p.as_str()) {
                return bad(format!("preferred source `{p}` is not loaded"));
            }
        }
        let state = State::new(&config.merged_name);
        Ok(Self { sources, config, state, log: Vec::new() })
    }

    pub fn sources(&self) -> &[Ontology] {
        &self.sources
    }

    pub fn source(&self, name: &str) -> Option<&Ontology> {
        self.sources.iter().find(|s| s.name == name)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn merged(&self) -> &Ontology {
        &self.state.merged
    }

    pub fn merged_name(&self) -> &str {
        &self.config.merged_name
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn preferred(&self) -> Option<&str> {
        self.config.preferred.as_deref()
    }

    pub fn set_preferred(&mut self, preferred: Option<String>) -> Result<(), EngineError> {
        if let Some(p) = &preferred {
            if self.source(p).is_none() {
                return Err(EngineError::InvalidConfig(format!("preferred source `{p}` is not loaded")));
            }
        }
        self.config.preferred = preferred;
        Ok(())
    }

    /// Source frame to merged local name.
    pub fn images(&self) -> &BTreeMap<FrameRef, String> {
        &self.state.images
    }

    pub fn image(&self, frame: &FrameRef) -> Option<&str> {
        self.state.images.get(frame).map(String::as_str)
    }

    /// Source frames whose image is the merged frame `name`.
    pub fn preimages(&self, kind: FrameKind, name: &str) -> Vec<FrameId> {
        self.state.images.iter().filter(|(r, v)| r.kind == kind && *v == name).map(|(r, _)| r.id.clone()).collect()
    }

    pub fn is_created(&self, kind: FrameKind, name: &str) -> bool {
        self.state.created.contains(&(kind, name.to_string()))
    }

    pub fn created(&self) -> &BTreeSet<(FrameKind, String)> {
        &self.state.created
    }

    /// Merged slots with a datatype-range disagreement awaiting resolution.
    pub fn pending_mismatches(&self) -> &BTreeMap<String, Vec<RangeCandidate>> {
        &self.state.pending
    }

    /// The merged frame `frame` denotes: itself for a merged id, the image for
    /// a source id. `None` if it does not resolve or has no image.
    pub fn current(&self, kind: FrameKind, frame: &FrameId) -> Option<String> {
        if frame.ontology == self.config.merged_name {
            return self.state.merged.contains(kind, &frame.name).then(|| frame.name.clone());
        }
        self.state.images.get(&FrameRef::new(kind, frame.clone())).cloned()
    }

    pub fn resolves(&self, kind: FrameKind, frame: &FrameId) -> bool {
        if frame.ontology == self.config.merged_name {
            self.state.merged.contains(kind, &frame.name)
        } else {
            self.source(&frame.ontology).is_some_and(|o| o.contains(kind, &frame.name))
        }
    }

    /// Source ontologies a frame stems from. A merged frame made by an
    /// explicit edit also counts the merged ontology itself.
    pub fn origins(&self, kind: FrameKind, frame: &FrameId) -> BTreeSet<String> {
        match self.current(kind, frame) {
            Some(name) => {
                let mut out: BTreeSet<String> =
                    self.preimages(kind, &name).into_iter().map(|id| id.ontology).collect();
                if self.is_created(kind, &name) {
                    out.insert(self.config.merged_name.clone());
                }
                out
            }
            None => BTreeSet::from([frame.ontology.clone()]),
        }
    }

    pub fn apply(&mut self, operation: Operation) -> Result<AppliedRecord, EngineError> {
        let preferred = self.config.preferred.clone();
        let (state, record) = self.run(&operation, preferred.as_deref())?;
        self.state = state;
        self.log.push(LogEntry { operation, preferred });
        Ok(record)
    }

    fn run(&self, operation: &Operation, preferred: Option<&str>) -> Result<(State, AppliedRecord), EngineError> {
        let mut ap = Apply::new(&self.sources, &self.config, preferred, self.state.clone());
        let result = ap.run(operation)?;
        let (state, follow_ups) = ap.finish()?;
        let mut record = diff(&self.state.merged, &state.merged, operation.clone(), follow_ups);
        record.result = result;
        Ok((state, record))
    }

    /// Reverts the last operation by replaying the log without it.
    pub fn undo(&mut self) -> Result<Operation, EngineError> {
        let len = self.log.len().checked_sub(1).ok_or(EngineError::EmptyLog)?;
        let last = self.log[len].operation.clone();
        self.truncate(len)?;
        Ok(last)
    }

    /// Drops log entries past `len` and rebuilds the state from the rest.
    pub fn truncate(&mut self, len: usize) -> Result<(), EngineError> {
        if len >= self.log.len() {
            return Ok(());
        }
        let entries: Vec<LogEntry> = self.log.drain(..).take(len).collect();
        self.state = State::new(&self.config.merged_name);
        for entry in entries {
            let (state, _) = self.run(&entry.operation, entry.preferred.as_deref())?;
            self.state = state;
            self.log.push(entry);
        }
        Ok(())
    }

    /// Replays `log` onto a fresh session over the same sources.
    pub fn replay(&self, log: &[LogEntry]) -> Result<MergeSession, (usize, EngineError)> {
        let mut fresh = MergeSession {
            sources: self.sources.clone(),
            config: self.config.clone(),
            state: State::new(&self.config.merged_name),
            log: Vec::new(),
        };
        for (i, entry) in log.iter().enumerate() {
            let (state, _) = fresh.run(&entry.operation, entry.preferred.as_deref()).map_err(|e| (i, e))?;
            fresh.state = state;
            fresh.log.push(entry.clone());
        }
        Ok(fresh)
    }

    /// Whether two sessions hold the same merged ontology and bookkeeping.
    pub fn same_state(&self, other: &MergeSession) -> bool {
        self.state == other.state
    }
}

fn diff(before: &Ontology, after: &Ontology, operation: Operation, follow_ups: Vec<FollowUp>) -> AppliedRecord {
    let mut record =
        AppliedRecord { operation, result: None, created: vec![], deleted: vec![], rewritten: vec![], follow_ups };
    let r = |kind, name: &String| FrameRef::new(kind, FrameId::new(&after.name, name.clone()));
    macro_rules! compare {
        ($field:ident, $kind:expr) => {
            for (name, frame) in &after.$field {
                match before.$field.get(name) {
                    None => record.created.push(r($kind, name)),
                    Some(old) if old != frame => record.rewritten.push(r($kind, name)),
                    Some(_) => {}
                }
            }
            for name in before.$field.keys().filter(|n| !after.$field.contains_key(*n)) {
                record.deleted.push(r($kind, name));
            }
        };
    }
    compare!(classes, FrameKind::Class);
    compare!(slots, FrameKind::Slot);
    compare!(instances, FrameKind::Instance);
    record
}
