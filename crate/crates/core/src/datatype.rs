//! XSD datatype kinds used for datatype-property ranges and primitive values.
//!
//! Only five built-in kinds are modelled. Inference tries them in a fixed
//! order, from the narrowest lexical space to the widest:
//! `integer`, `decimal`, `NCName`, `NMTOKEN`, `string`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum XsdKind {
    #[serde(rename = "integer")]
    Integer,
    #[serde(rename = "decimal")]
    Decimal,
    #[serde(rename = "NCName")]
    NCName,
    #[serde(rename = "NMTOKEN")]
    NmToken,
    #[serde(rename = "string")]
    String,
}

/// Inference order. Earlier kinds have narrower lexical spaces.
pub const INFERENCE_ORDER: [XsdKind; 5] = [
    XsdKind::Integer,
    XsdKind::Decimal,
    XsdKind::NCName,
    XsdKind::NmToken,
    XsdKind::String,
];

pub const XSD_NAMESPACE: &str = "http://www.w3.org/2001/XMLSchema#";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatatypeError {
    #[error("cannot infer a datatype from an empty value list")]
    EmptyInput,
    #[error("unknown XSD kind `{0}`")]
    UnknownKind(String),
}

impl XsdKind {
    pub fn local_name(self) -> &'static str {
        match self {
            XsdKind::Integer => "integer",
            XsdKind::Decimal => "decimal",
            XsdKind::NCName => "NCName",
            XsdKind::NmToken => "NMTOKEN",
            XsdKind::String => "string",
        }
    }

    /// Position in [`INFERENCE_ORDER`].
    pub fn rank(self) -> usize {
        INFERENCE_ORDER.iter().position(|k| *k == self).unwrap()
    }

    pub fn iri(self) -> String {
        format!("{XSD_NAMESPACE}{}", self.local_name())
    }

    /// Whether `lexical` belongs to this kind's lexical space.
    pub fn admits(self, lexical: &str) -> bool {
        match self {
            XsdKind::Integer => is_integer(lexical),
            XsdKind::Decimal => is_decimal(lexical),
            XsdKind::NCName => is_ncname(lexical),
            XsdKind::NmToken => is_nmtoken(lexical),
            XsdKind::String => lexical.chars().all(is_xml_char),
        }
    }
}

impl fmt::Display for XsdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.local_name())
    }
}

impl FromStr for XsdKind {
    type Err = DatatypeError;

    /// Accepts the bare local name, an `xsd:`/`xs:` prefixed name or a full IRI.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let local = s
            .strip_prefix(XSD_NAMESPACE)
            .or_else(|| s.strip_prefix("xsd:"))
            .or_else(|| s.strip_prefix("xs:"))
            .unwrap_or(s);
        INFERENCE_ORDER
            .into_iter()
            .find(|k| k.local_name() == local)
            .ok_or_else(|| DatatypeError::UnknownKind(s.to_string()))
    }
}

/// Picks the first kind in [`INFERENCE_ORDER`] whose lexical space admits every value.
pub fn infer_datatype<S: AsRef<str>>(values: &[S]) -> Result<XsdKind, DatatypeError> {
    if values.is_empty() {
        return Err(DatatypeError::EmptyInput);
    }
    Ok(INFERENCE_ORDER
        .into_iter()
        .find(|kind| values.iter().all(|v| kind.admits(v.as_ref())))
        .unwrap_or(XsdKind::String))
}

pub fn is_integer(s: &str) -> bool {
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

pub fn is_decimal(s: &str) -> bool {
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    match frac {
        None => !int.is_empty() && all_digits(int),
        Some(f) => (!int.is_empty() || !f.is_empty()) && all_digits(int) && all_digits(f),
    }
}

pub fn is_name_start_char(c: char) -> bool {
    matches!(c,
        ':' | 'A'..='Z' | '_' | 'a'..='z'
        | '\u{C0}'..='\u{D6}' | '\u{D8}'..='\u{F6}' | '\u{F8}'..='\u{2FF}'
        | '\u{370}'..='\u{37D}' | '\u{37F}'..='\u{1FFF}' | '\u{200C}'..='\u{200D}'
        | '\u{2070}'..='\u{218F}' | '\u{2C00}'..='\u{2FEF}' | '\u{3001}'..='\u{D7FF}'
        | '\u{F900}'..='\u{FDCF}' | '\u{FDF0}'..='\u{FFFD}' | '\u{10000}'..='\u{EFFFF}')
}

pub fn is_name_char(c: char) -> bool {
    is_name_start_char(c)
        || matches!(c, '-' | '.' | '0'..='9' | '\u{B7}' | '\u{300}'..='\u{36F}' | '\u{203F}'..='\u{2040}')
}

fn is_xml_char(c: char) -> bool {
    matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..='\u{10FFFF}')
}

/// XML name without colons.
pub fn is_ncname(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c != ':' && is_name_start_char(c) => chars.all(|c| c != ':' && is_name_char(c)),
        _ => false,
    }
}

pub fn is_nmtoken(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_name_char)
}
