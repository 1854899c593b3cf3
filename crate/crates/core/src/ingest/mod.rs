//! Lifting XML data sources into local ontologies.

mod lift;
mod schema;
mod xsd;

use thiserror::Error;

pub use lift::{lift, LiftConfig, Lifted};
pub use schema::{infer_schema, ChildRef, Document, ElementDecl, ElementSchema, LeafField};
pub use xsd::read_xsd;

use crate::model::Violation;
use crate::xml::XmlError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("documents have different root elements: `{expected}` and `{found}`")]
    MixedRoots { expected: String, found: String },
    #[error("`{name}` under `{parent}` is used both as an attribute and as a complex element")]
    NameClash { parent: String, name: String },
    #[error("object property and datatype property would both be named `{0}`")]
    SlotNameClash(String),
    #[error("invalid object-property prefix `{0}`")]
    InvalidPrefix(String),
    #[error("value `{value}` of `{field}` is not a valid {kind}")]
    InvalidValue { field: String, value: String, kind: crate::XsdKind },
    #[error("unsupported XSD: {0}")]
    Xsd(String),
    #[error("lifted ontology is not well-formed: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// Parses `documents`, takes the schema from `xsd` when given (otherwise
/// infers it) and lifts the result.
pub fn lift_xml(name: &str, documents: &[&str], xsd: Option<&str>, config: &LiftConfig) -> Result<Lifted, IngestError> {
    let docs = documents.iter().map(|t| Document::parse(t)).collect::<Result<Vec<_>, _>>()?;
    let (schema, mut warnings) = match xsd {
        Some(text) => {
            let root = docs.first().map(|d| d.root.name.as_str());
            read_xsd(text, root)?
        }
        None => (infer_schema(&docs)?, Vec::new()),
    };
    let mut lifted = lift(name, &schema, &docs, config)?;
    warnings.append(&mut lifted.warnings);
    lifted.warnings = warnings;
    Ok(lifted)
}
