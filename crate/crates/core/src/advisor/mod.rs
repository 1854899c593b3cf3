//! The suggest/apply/check cycle around a [`MergeSession`].
//!
//! An [`Advisor`] keeps a ranked suggestion list. Each [`Advisor::step`]
//! applies one operation, turns the engine's follow-ups into suggestions,
//! drops suggestions the operation made pointless, resolves conflicts in
//! favour of the preferred source when one is set, reports the conflicts
//! around the touched frames and moves related suggestions forward.

mod conflicts;

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use conflicts::{detect_conflicts, detect_structural, Conflict, ConflictKind, Resolution};

use crate::engine::{AppliedRecord, EngineError, FollowUpKind, MergeSession, Operation};
use crate::matcher::{initial_matches_all, MatchConfig, MatchError};
use crate::model::{FrameId, FrameKind};

/// Operations kept for focus maintenance.
pub const FOCUS_WINDOW: usize = 3;
/// Score given to follow-up suggestions.
pub const FOLLOW_UP_SCORE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplanationKind {
    LexicalMatch,
    SlotMergeFollowup,
    InstanceValueFollowup,
    FocusMove,
    PreferredResolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub kind: ExplanationKind,
    pub text: String,
    #[serde(default)]
    pub frames: Vec<FrameId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub operation: Operation,
    pub score: f64,
    pub explanations: Vec<Explanation>,
    pub related: BTreeSet<FrameId>,
}

impl Suggestion {
    /// Identity of the proposed operation; merges are unordered in their arguments.
    pub fn key(&self) -> String {
        operation_key(&self.operation)
    }
}

pub fn operation_key(op: &Operation) -> String {
    let pair = |a: &FrameId, b: &FrameId| {
        let (x, y) = (a.to_string(), b.to_string());
        if x <= y { format!("{x} {y}") } else { format!("{y} {x}") }
    };
    match op {
        Operation::MergeClasses { a, b, name: None } => format!("merge-classes {}", pair(a, b)),
        Operation::MergeSlots { a, b, name: None } => format!("merge-slots {}", pair(a, b)),
        Operation::MergeInstances { a, b, name: None, .. } => format!("merge-instances {}", pair(a, b)),
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdvisorError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("no preferred source is set")]
    NoPreferredSet,
    #[error("no resolution of the conflict favours `{0}`")]
    Unresolvable(String),
    #[error("no standing suggestion `{0}`")]
    UnknownSuggestion(String),
    #[error("automatic merge stopped after {ops} operations (bound {bound})")]
    GuardExceeded { ops: usize, bound: usize },
    #[error("{} conflicts remain unresolved", .0.len())]
    UnresolvedConflicts(Vec<Conflict>),
}

/// A conflict fixed in favour of the preferred source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub conflict: Conflict,
    pub record: AppliedRecord,
    pub explanation: Explanation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub record: AppliedRecord,
    pub resolved: Vec<Resolved>,
    pub suggestions: Vec<Suggestion>,
    /// Conflicts involving frames the step touched.
    pub conflicts: Vec<Conflict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecentOp {
    pub operation: String,
    pub touched: BTreeSet<FrameId>,
}

/// Moves suggestions related to the recent operations to the front, keeping
/// relative order on both sides, and explains each move once per operation.
pub fn refocus(suggestions: Vec<Suggestion>, recent: &[RecentOp]) -> Vec<Suggestion> {
    let window = &recent[recent.len().saturating_sub(FOCUS_WINDOW)..];
    let (mut front, back): (Vec<Suggestion>, Vec<Suggestion>) = suggestions
        .into_iter()
        .partition(|s| window.iter().any(|r| !r.touched.is_disjoint(&s.related)));
    for s in &mut front {
        let Some(op) = window.iter().rev().find(|r| !r.touched.is_disjoint(&s.related)) else { continue };
        let text = format!("moved forward: involves frames touched by `{}`", op.operation);
        if !s.explanations.iter().any(|e| e.kind == ExplanationKind::FocusMove && e.text == text) {
            let frames = op.touched.intersection(&s.related).cloned().collect();
            s.explanations.push(Explanation { kind: ExplanationKind::FocusMove, text, frames, score: None });
        }
    }
    front.extend(back);
    front
}

/// Whether a suggestion still makes sense for the session.
pub fn is_applicable(session: &MergeSession, s: &Suggestion) -> bool {
    let pair = |kind, a: &FrameId, b: &FrameId| {
        if !session.resolves(kind, a) || !session.resolves(kind, b) {
            return false;
        }
        let (ca, cb) = (session.current(kind, a), session.current(kind, b));
        if ca.is_some() && ca == cb {
            return false;
        }
        session.origins(kind, a).is_disjoint(&session.origins(kind, b))
    };
    let unimaged = |kind, f: &FrameId| {
        f.ontology != session.merged_name() && session.resolves(kind, f) && session.current(kind, f).is_none()
    };
    match &s.operation {
        Operation::MergeClasses { a, b, .. } => pair(FrameKind::Class, a, b),
        Operation::MergeSlots { a, b, .. } => pair(FrameKind::Slot, a, b),
        Operation::MergeInstances { a, b, .. } => pair(FrameKind::Instance, a, b),
        Operation::ShallowCopy { class } | Operation::DeepCopy { class } => unimaged(FrameKind::Class, class),
        Operation::CopySlot { slot } => unimaged(FrameKind::Slot, slot),
        other => other.frame_args(session.merged_name()).iter().all(|r| session.resolves(r.kind, &r.id)),
    }
}

#[derive(Debug, Clone)]
struct Checkpoint {
    log_len: usize,
    suggestions: Vec<Suggestion>,
    recent: VecDeque<RecentOp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoReport {
    /// Suggestions and instance pairings applied.
    pub merges: usize,
    /// Deep copies and slot copies applied afterwards.
    pub copies: usize,
    /// Operations that failed and were skipped, with the error text.
    pub skipped: Vec<(Operation, String)>,
    pub unresolved: Vec<Conflict>,
}

#[derive(Debug, Clone)]
pub struct Advisor {
    session: MergeSession,
    config: MatchConfig,
    suggestions: Vec<Suggestion>,
    dismissed: BTreeSet<String>,
    recent: VecDeque<RecentOp>,
    checkpoints: Vec<Checkpoint>,
}

impl Advisor {
    /// Seeds the suggestion list with lexical matches between every pair of sources.
    pub fn new(session: MergeSession, config: MatchConfig) -> Result<Self, AdvisorError> {
        config.validate()?;
        let suggestions = initial_matches_all(session.sources(), &config);
        let mut advisor =
            Self { session, config, suggestions, dismissed: BTreeSet::new(), recent: VecDeque::new(), checkpoints: vec![] };
        advisor.prune();
        Ok(advisor)
    }

    pub fn session(&self) -> &MergeSession {
        &self.session
    }

    pub fn into_session(self) -> MergeSession {
        self.session
    }

    pub fn config(&self) -> &MatchConfig {
        &self.config
    }

    pub fn suggestions(&self) -> &[Suggestion] {
        &self.suggestions
    }

    pub fn dismissed(&self) -> &BTreeSet<String> {
        &self.dismissed
    }

    pub fn recent(&self) -> impl Iterator<Item = &RecentOp> {
        self.recent.iter()
    }

    /// Number of steps that [`Advisor::undo`] can revert.
    pub fn depth(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn conflicts(&self) -> Vec<Conflict> {
        detect_conflicts(&self.session)
    }

    pub fn set_preferred(&mut self, preferred: Option<String>) -> Result<(), AdvisorError> {
        Ok(self.session.set_preferred(preferred)?)
    }

    /// Removes a standing suggestion and keeps it from coming back.
    pub fn dismiss(&mut self, operation: &Operation) -> Result<(), AdvisorError> {
        let key = operation_key(operation);
        let before = self.suggestions.len();
        self.suggestions.retain(|s| s.key() != key);
        if self.suggestions.len() == before {
            return Err(AdvisorError::UnknownSuggestion(key));
        }
        self.dismissed.insert(key);
        Ok(())
    }

    fn prune(&mut self) {
        let session = &self.session;
        let dismissed = &self.dismissed;
        self.suggestions.retain(|s| !dismissed.contains(&s.key()) && is_applicable(session, s));
    }

    fn absorb(&mut self, record: &AppliedRecord) {
        for f in &record.follow_ups {
            let kind = match f.kind {
                FollowUpKind::SlotMerge => ExplanationKind::SlotMergeFollowup,
                FollowUpKind::InstanceValue => ExplanationKind::InstanceValueFollowup,
            };
            let explanation = Explanation { kind, text: f.reason.clone(), frames: f.frames.clone(), score: Some(FOLLOW_UP_SCORE) };
            let key = operation_key(&f.operation);
            if self.dismissed.contains(&key) {
                continue;
            }
            match self.suggestions.iter_mut().find(|s| s.key() == key) {
                Some(existing) => {
                    if !existing.explanations.contains(&explanation) {
                        existing.explanations.push(explanation);
                    }
                }
                None => self.suggestions.push(Suggestion {
                    operation: f.operation.clone(),
                    score: FOLLOW_UP_SCORE,
                    explanations: vec![explanation],
                    related: f.frames.iter().cloned().collect(),
                }),
            }
        }
    }

    /// Touched frames plus the source frames whose images were touched.
    fn widen(&self, touched: &BTreeSet<FrameId>) -> BTreeSet<FrameId> {
        let mut out = touched.clone();
        for id in touched.iter().filter(|id| id.ontology == self.session.merged_name()) {
            for kind in [FrameKind::Class, FrameKind::Slot, FrameKind::Instance] {
                out.extend(self.session.preimages(kind, &id.name));
            }
        }
        out
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint { log_len: self.session.log().len(), suggestions: self.suggestions.clone(), recent: self.recent.clone() }
    }

    /// Applies `op` and runs one round of the cycle.
    pub fn step(&mut self, op: Operation) -> Result<StepOutcome, AdvisorError> {
        let checkpoint = self.checkpoint();
        let record = self.session.apply(op.clone())?;
        self.absorb(&record);
        let mut touched = record.touched(self.session.merged_name());

        let mut resolved = Vec::new();
        if self.session.preferred().is_some() {
            let mut tried = BTreeSet::new();
            loop {
                let candidate = self
                    .conflicts()
                    .into_iter()
                    .filter(|c| c.frames.iter().any(|f| touched.contains(f)))
                    .find(|c| !tried.contains(&c.key()));
                let Some(conflict) = candidate else { break };
                tried.insert(conflict.key());
                if let Ok(Some(r)) = self.resolve_inner(&conflict) {
                    touched.extend(r.record.touched(self.session.merged_name()));
                    resolved.push(r);
                }
            }
        }

        let touched = self.widen(&touched);
        self.prune();
        self.recent.push_back(RecentOp { operation: op.to_string(), touched: touched.clone() });
        while self.recent.len() > FOCUS_WINDOW {
            self.recent.pop_front();
        }
        self.suggestions = refocus(std::mem::take(&mut self.suggestions), self.recent.make_contiguous());
        self.checkpoints.push(checkpoint);

        let conflicts = self.conflicts().into_iter().filter(|c| c.frames.iter().any(|f| touched.contains(f))).collect();
        Ok(StepOutcome { record, resolved, suggestions: self.suggestions.clone(), conflicts })
    }

    /// Reverts the last step, including conflict resolutions it applied.
    pub fn undo(&mut self) -> Result<(), AdvisorError> {
        let checkpoint = self.checkpoints.pop().ok_or(EngineError::EmptyLog)?;
        self.session.truncate(checkpoint.log_len)?;
        self.suggestions = checkpoint.suggestions;
        self.recent = checkpoint.recent;
        self.prune();
        Ok(())
    }

    fn resolve_inner(&mut self, conflict: &Conflict) -> Result<Option<Resolved>, AdvisorError> {
        let preferred = self.session.preferred().ok_or(AdvisorError::NoPreferredSet)?.to_string();
        if !self.conflicts().iter().any(|c| c.key() == conflict.key()) {
            return Ok(None);
        }
        let choice = match conflict.resolutions.iter().find(|r| r.favors.as_deref() == Some(preferred.as_str())) {
            Some(r) => r,
            None if conflict.resolutions.len() == 1 => &conflict.resolutions[0],
            None => return Err(AdvisorError::Unresolvable(preferred)),
        };
        let record = self.session.apply(choice.operation.clone())?;
        self.absorb(&record);
        let explanation = Explanation {
            kind: ExplanationKind::PreferredResolution,
            text: format!("{} resolved for preferred source `{preferred}`: {}", conflict.kind, choice.description),
            frames: conflict.frames.clone(),
            score: None,
        };
        Ok(Some(Resolved { conflict: conflict.clone(), record, explanation }))
    }

    /// Applies the resolution that sides with the preferred source. `None`
    /// if the conflict is no longer present.
    pub fn resolve_with_preferred(&mut self, conflict: &Conflict) -> Result<Option<Resolved>, AdvisorError> {
        let checkpoint = self.checkpoint();
        let out = self.resolve_inner(conflict)?;
        if out.is_some() {
            self.prune();
            self.checkpoints.push(checkpoint);
        }
        Ok(out)
    }

    /// Applies the best suggestion until none reaches the threshold, then
    /// deep-copies every unimaged class and copies every unimaged slot.
    pub fn auto_merge(&mut self, strict: bool) -> Result<AutoReport, AdvisorError> {
        let total: usize = self.session.sources().iter().map(|s| s.frame_count()).sum();
        let bound = 10 * total.max(1);
        let mut report = AutoReport { merges: 0, copies: 0, skipped: vec![], unresolved: vec![] };
        let mut skip = BTreeSet::new();
        let mut ops = 0;
        let tick = |ops: &mut usize| {
            *ops += 1;
            if *ops > bound { Err(AdvisorError::GuardExceeded { ops: *ops, bound }) } else { Ok(()) }
        };
        loop {
            let threshold = self.config.threshold;
            let best = self
                .suggestions
                .iter()
                .filter(|s| s.score >= threshold && !skip.contains(&s.key()))
                .fold(None::<&Suggestion>, |best, s| match best {
                    Some(b) if b.score >= s.score => Some(b),
                    _ => Some(s),
                })
                .cloned();
            let Some(best) = best else { break };
            tick(&mut ops)?;
            match self.step(best.operation.clone()) {
                Ok(_) => report.merges += 1,
                Err(e) => {
                    skip.insert(best.key());
                    report.skipped.push((best.operation, e.to_string()));
                }
            }
        }
        let sources: Vec<(String, Vec<String>, Vec<String>)> = self
            .session
            .sources()
            .iter()
            .map(|o| (o.name.clone(), o.names(FrameKind::Class), o.names(FrameKind::Slot)))
            .collect();
        for (source, classes, slots) in sources {
            let copies = classes
                .into_iter()
                .map(|c| (FrameKind::Class, c))
                .chain(slots.into_iter().map(|s| (FrameKind::Slot, s)));
            for (kind, name) in copies {
                let id = FrameId::new(&source, name);
                if self.session.current(kind, &id).is_some() {
                    continue;
                }
                tick(&mut ops)?;
                let op = match kind {
                    FrameKind::Class => Operation::DeepCopy { class: id },
                    _ => Operation::CopySlot { slot: id },
                };
                match self.step(op.clone()) {
                    Ok(_) => report.copies += 1,
                    Err(e) => report.skipped.push((op, e.to_string())),
                }
            }
        }
        // Instances enter the merged ontology only through instance merges,
        // so lexically matching instances of different sources are paired up.
        let mut pairs = Vec::new();
        let threshold = self.config.threshold;
        let sources = self.session.sources();
        for (i, x) in sources.iter().enumerate() {
            for y in &sources[i + 1..] {
                for a in x.instances.keys() {
                    for b in y.instances.keys() {
                        let score = crate::matcher::score_names(a, b, &self.config).value;
                        if score >= threshold {
                            pairs.push((score, x.frame_id(a), y.frame_id(b)));
                        }
                    }
                }
            }
        }
        pairs.sort_by(|p, q| q.0.total_cmp(&p.0).then_with(|| (&p.1, &p.2).cmp(&(&q.1, &q.2))));
        for (_, a, b) in pairs {
            let merged = self.session.merged_name().to_string();
            let arg = |id: FrameId, s: &MergeSession| match s.current(FrameKind::Instance, &id) {
                Some(image) => (true, FrameId::new(&merged, image)),
                None => (false, id),
            };
            let ((a_done, a), (b_done, b)) = (arg(a, &self.session), arg(b, &self.session));
            if a_done && b_done {
                continue;
            }
            tick(&mut ops)?;
            let op = Operation::MergeInstances { a, b, name: None, confirm: false };
            match self.step(op.clone()) {
                Ok(_) => report.merges += 1,
                Err(e) => report.skipped.push((op, e.to_string())),
            }
        }
        report.unresolved = self.conflicts();
        if strict && !report.unresolved.is_empty() {
            return Err(AdvisorError::UnresolvedConflicts(report.unresolved));
        }
        Ok(report)
    }
}
