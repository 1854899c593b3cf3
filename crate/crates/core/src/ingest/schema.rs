//! Schema inference from instance documents.
//!
//! Element declarations are global by name. An element is *complex* (and
//! later becomes a class) when it is the document root, carries attributes or
//! child elements in any occurrence, or never carries text (an always-empty
//! element). Every other element is a leaf field of its parents, as are
//! attributes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::datatype::{infer_datatype, XsdKind};
use crate::xml::{self, XmlElement};

/// A parsed XML source document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub root: XmlElement,
}

impl Document {
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        Ok(Self { root: xml::parse(text)? })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementSchema {
    pub root: String,
    /// Complex element declarations by name.
    pub elements: BTreeMap<String, ElementDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementDecl {
    pub name: String,
    /// Complex child elements in first-seen order.
    pub children: Vec<ChildRef>,
    pub fields: Vec<LeafField>,
    /// Occurs more than once under a single parent somewhere.
    pub repeatable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildRef {
    pub name: String,
    pub min_occurs: u32,
    /// `None` is unbounded.
    pub max_occurs: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafField {
    pub name: String,
    pub kind: XsdKind,
    pub min_occurs: u32,
    pub max_occurs: Option<u32>,
    /// Observed lexical values; empty for declared (XSD) fields.
    pub samples: Vec<String>,
}

impl ElementSchema {
    pub fn decl(&self, name: &str) -> Option<&ElementDecl> {
        self.elements.get(name)
    }

    pub fn is_complex(&self, name: &str) -> bool {
        self.elements.contains_key(name)
    }
}

#[derive(Default)]
struct ElementStats {
    occurrences: u32,
    structured: bool,
    has_text: bool,
    texts: Vec<String>,
    /// Child or attribute name to per-parent statistics, in first-seen order.
    members: Vec<(String, MemberStats)>,
}

#[derive(Default)]
struct MemberStats {
    present_in: u32,
    max_count: u32,
    values: Vec<String>,
    as_attribute: bool,
    as_element: bool,
}

impl ElementStats {
    fn member(&mut self, name: &str) -> &mut MemberStats {
        let idx = match self.members.iter().position(|(n, _)| n == name) {
            Some(i) => i,
            None => {
                self.members.push((name.to_string(), MemberStats::default()));
                self.members.len() - 1
            }
        };
        &mut self.members[idx].1
    }
}

/// Infers the union schema of `documents`, which must share one root element name.
pub fn infer_schema(documents: &[Document]) -> Result<ElementSchema, IngestError> {
    let first = documents.first().ok_or_else(|| IngestError::Malformed("no documents given".into()))?;
    let root = first.root.name.clone();
    for doc in documents {
        if doc.root.name != root {
            return Err(IngestError::MixedRoots { expected: root, found: doc.root.name.clone() });
        }
    }

    let mut stats: BTreeMap<String, ElementStats> = BTreeMap::new();
    for doc in documents {
        collect(&doc.root, &mut stats);
    }

    let complex: BTreeSet<String> = stats
        .iter()
        .filter(|(name, s)| **name == root || s.structured || !s.has_text)
        .map(|(name, _)| name.clone())
        .collect();

    let mut repeatable = BTreeSet::new();
    for s in stats.values() {
        for (name, m) in &s.members {
            if m.as_element && m.max_count > 1 {
                repeatable.insert(name.clone());
            }
        }
    }

    let mut elements = BTreeMap::new();
    for name in &complex {
        let s = &stats[name];
        let mut children = Vec::new();
        let mut fields = Vec::new();
        for (member, m) in &s.members {
            let min_occurs = u32::from(m.present_in == s.occurrences);
            let max_occurs = if m.max_count > 1 { None } else { Some(1) };
            if m.as_element && complex.contains(member) {
                if m.as_attribute {
                    return Err(IngestError::NameClash { parent: name.clone(), name: member.clone() });
                }
                children.push(ChildRef { name: member.clone(), min_occurs, max_occurs });
            } else {
                let samples: Vec<String> = m.values.iter().filter(|v| !v.is_empty()).cloned().collect();
                let kind = if samples.is_empty() {
                    stats.get(member).map(|g| g.texts.as_slice()).filter(|t| !t.is_empty()).map_or(
                        XsdKind::String,
                        |t| infer_datatype(t).unwrap_or(XsdKind::String),
                    )
                } else {
                    infer_datatype(&samples).unwrap_or(XsdKind::String)
                };
                fields.push(LeafField { name: member.clone(), kind, min_occurs, max_occurs, samples });
            }
        }
        elements.insert(
            name.clone(),
            ElementDecl { name: name.clone(), children, fields, repeatable: repeatable.contains(name) },
        );
    }
    Ok(ElementSchema { root, elements })
}

fn collect(element: &XmlElement, stats: &mut BTreeMap<String, ElementStats>) {
    let mut counts: Vec<(String, u32, Vec<String>, bool)> = Vec::new();
    let mut bump = |name: &str, value: String, attribute: bool| match counts.iter_mut().find(|c| c.0 == name) {
        Some(c) => {
            c.1 += 1;
            c.2.push(value);
        }
        None => counts.push((name.to_string(), 1, vec![value], attribute)),
    };
    let attributes: Vec<_> = element.attributes.iter().filter(|a| a.namespace.is_none()).collect();
    for attr in &attributes {
        bump(&attr.name, attr.value.trim().to_string(), true);
    }
    for child in &element.children {
        bump(&child.name, child.trimmed_text().to_string(), false);
    }

    let entry = stats.entry(element.name.clone()).or_default();
    entry.occurrences += 1;
    entry.structured |= !attributes.is_empty() || !element.children.is_empty();
    let text = element.trimmed_text();
    if !text.is_empty() {
        entry.has_text = true;
        entry.texts.push(text.to_string());
    }
    for (name, count, values, attribute) in counts {
        let m = entry.member(&name);
        m.present_in += 1;
        m.max_count = m.max_count.max(count);
        m.values.extend(values);
        if attribute {
            m.as_attribute = true;
        } else {
            m.as_element = true;
        }
    }
    for child in &element.children {
        collect(child, stats);
    }
}
