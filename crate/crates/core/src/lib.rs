//! Ontology lifting and interactive merging.
//!
//! XML data sources are lifted into local frame ontologies ([`ingest`]),
//! compared lexically ([`matcher`]) and merged into one global ontology
//! through the merge operation set ([`engine`]), driven either
//! interactively or in batch by the suggestion/conflict cycle ([`advisor`]).
//! [`io`] holds the OWL-subset reader/writer, the canonical text export and
//! merge scripts.

pub mod advisor;
pub mod datatype;
pub mod engine;
pub mod ingest;
pub mod io;
pub mod matcher;
pub mod model;
pub mod xml;

pub use datatype::XsdKind;
pub use model::{FrameId, FrameKind, FrameRef, Ontology, RangeSpec, SlotFrame, SlotKind, Value, TOP_CLASS};
