//! Merge operations over a [`MergeSession`].
//!
//! Operation arguments that name frames use [`FrameId`]s. An id whose
//! ontology is the merged ontology names a merged frame; any other id names
//! a source frame. A source frame that already has an image is treated as
//! its image wherever an operation would replace a merged frame.
//!
//! Edits that only make sense inside the merged ontology (creating classes,
//! editing edges, renaming, removing, changing ranges and values) take merged
//! local names.

mod apply;
mod session;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FrameId, FrameKind, FrameRef, RangeSpec, Value, Violation};

pub use session::{AppliedRecord, FollowUp, FollowUpKind, LogEntry, MergeSession, RangeCandidate};

pub const DEFAULT_MERGED_NAME: &str = "GlobalOntology";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum Operation {
    MergeClasses {
        a: FrameId,
        b: FrameId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    MergeSlots {
        a: FrameId,
        b: FrameId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    MergeInstances {
        a: FrameId,
        b: FrameId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        /// Allows merging two distinct type images.
        #[serde(default)]
        confirm: bool,
    },
    ShallowCopy {
        class: FrameId,
    },
    DeepCopy {
        class: FrameId,
    },
    CopySlot {
        slot: FrameId,
    },
    CreateClass {
        name: String,
        /// Empty means a direct child of the top class.
        #[serde(default)]
        superclasses: BTreeSet<String>,
    },
    AddSuperclass {
        class: String,
        superclass: String,
    },
    RemoveSuperclass {
        class: String,
        superclass: String,
    },
    RenameFrame {
        kind: FrameKind,
        frame: String,
        name: String,
    },
    RemoveFrame {
        kind: FrameKind,
        frame: String,
    },
    SetSlotRange {
        slot: String,
        range: RangeSpec,
    },
    RemoveValue {
        instance: String,
        slot: String,
        value: Value,
    },
}

impl Operation {
    /// Script and JSON tag of the operation.
    pub fn name(&self) -> &'static str {
        match self {
            Operation::MergeClasses { .. } => "merge-classes",
            Operation::MergeSlots { .. } => "merge-slots",
            Operation::MergeInstances { .. } => "merge-instances",
            Operation::ShallowCopy { .. } => "shallow-copy",
            Operation::DeepCopy { .. } => "deep-copy",
            Operation::CopySlot { .. } => "copy-slot",
            Operation::CreateClass { .. } => "create-class",
            Operation::AddSuperclass { .. } => "add-superclass",
            Operation::RemoveSuperclass { .. } => "remove-superclass",
            Operation::RenameFrame { .. } => "rename-frame",
            Operation::RemoveFrame { .. } => "remove-frame",
            Operation::SetSlotRange { .. } => "set-slot-range",
            Operation::RemoveValue { .. } => "remove-value",
        }
    }

    /// Every frame the operation names, as qualified references.
    pub fn frame_args(&self, merged: &str) -> Vec<FrameRef> {
        let m = |kind, name: &str| FrameRef::new(kind, FrameId::new(merged, name));
        match self {
            Operation::MergeClasses { a, b, .. } => {
                vec![FrameRef::new(FrameKind::Class, a.clone()), FrameRef::new(FrameKind::Class, b.clone())]
            }
            Operation::MergeSlots { a, b, .. } => {
                vec![FrameRef::new(FrameKind::Slot, a.clone()), FrameRef::new(FrameKind::Slot, b.clone())]
            }
            Operation::MergeInstances { a, b, .. } => {
                vec![FrameRef::new(FrameKind::Instance, a.clone()), FrameRef::new(FrameKind::Instance, b.clone())]
            }
            Operation::ShallowCopy { class } | Operation::DeepCopy { class } => {
                vec![FrameRef::new(FrameKind::Class, class.clone())]
            }
            Operation::CopySlot { slot } => vec![FrameRef::new(FrameKind::Slot, slot.clone())],
            Operation::CreateClass { superclasses, .. } => {
                superclasses.iter().map(|s| m(FrameKind::Class, s)).collect()
            }
            Operation::AddSuperclass { class, superclass } | Operation::RemoveSuperclass { class, superclass } => {
                vec![m(FrameKind::Class, class), m(FrameKind::Class, superclass)]
            }
            Operation::RenameFrame { kind, frame, .. } | Operation::RemoveFrame { kind, frame } => vec![m(*kind, frame)],
            Operation::SetSlotRange { slot, range } => {
                let mut out = vec![m(FrameKind::Slot, slot)];
                if let RangeSpec::Classes(classes) = range {
                    out.extend(classes.iter().map(|c| m(FrameKind::Class, c)));
                }
                out
            }
            Operation::RemoveValue { instance, slot, .. } => {
                vec![m(FrameKind::Instance, instance), m(FrameKind::Slot, slot)]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuffixPolicy {
    /// Copies keep their name unless it is taken.
    #[default]
    SuffixOnCollision,
    /// Copies are always named `<name>_<source>`.
    AlwaysSuffix,
}

impl fmt::Display for SuffixPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SuffixPolicy::SuffixOnCollision => "suffix-on-collision",
            SuffixPolicy::AlwaysSuffix => "always-suffix",
        })
    }
}

impl FromStr for SuffixPolicy {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "suffix-on-collision" => Ok(SuffixPolicy::SuffixOnCollision),
            "always-suffix" => Ok(SuffixPolicy::AlwaysSuffix),
            other => Err(EngineError::InvalidConfig(format!("unknown suffix policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub merged_name: String,
    #[serde(default)]
    pub suffix_policy: SuffixPolicy,
    #[serde(default)]
    pub preferred: Option<String>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { merged_name: DEFAULT_MERGED_NAME.into(), suffix_policy: SuffixPolicy::default(), preferred: None }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid session: {0}")]
    InvalidConfig(String),
    #[error("unknown frame {0}")]
    UnknownFrame(FrameRef),
    #[error("both arguments denote the same frame {0}")]
    SameFrame(FrameRef),
    #[error("cannot merge an object property with a datatype property ({a}, {b})")]
    KindMismatch { a: FrameRef, b: FrameRef },
    #[error("{frame} already has image `{image}`")]
    AlreadyImaged { frame: FrameRef, image: String },
    #[error("{0} is not a source frame")]
    NotASourceFrame(FrameRef),
    #[error("a {kind} named `{name}` already exists in the merged ontology")]
    NameCollision { kind: FrameKind, name: String },
    #[error("`{0}` is not a valid frame name")]
    InvalidName(String),
    #[error("operation would create a subclass cycle through {}", .0.join(", "))]
    Cycle(Vec<String>),
    #[error("merging instance types `{a}` and `{b}` needs confirmation")]
    ConfirmationRequired { a: String, b: String },
    #[error("`{class}` is not a direct subclass of `{superclass}`")]
    UnknownEdge { class: String, superclass: String },
    #[error("instance `{instance}` has no such value on `{slot}`")]
    UnknownValue { instance: String, slot: String },
    #[error("no operation to undo")]
    EmptyLog,
    #[error("operation leaves the merged ontology ill-formed: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}
