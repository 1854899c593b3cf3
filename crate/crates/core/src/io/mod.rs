//! Serialization: OWL subset, canonical text and merge scripts.

pub mod canonical;
pub mod owl;
pub mod script;

pub use canonical::write_canonical;
pub use owl::{read_owl, write_owl, OwlDocument, OwlError};
pub use script::{parse_operation, MergeScript, ScriptConfig, ScriptError, ScriptSource, ScriptStep};
