//! Restricted XSD profile: global and local element declarations, named and
//! anonymous complex types, sequences and attributes with built-in types.
//! `choice` and `all` groups are read like sequences, with every member of
//! a `choice` made optional. Other constructs are skipped with a warning.

use std::collections::{BTreeMap, BTreeSet};

use super::schema::{ChildRef, ElementDecl, ElementSchema, LeafField};
use super::IngestError;
use crate::datatype::XsdKind;
use crate::xml::{self, XmlElement};

const XS: &str = "http://www.w3.org/2001/XMLSchema";

/// Maps a built-in XSD type name onto one of the five supported kinds. The
/// flag is false for names outside the known set, which fall back to string.
fn builtin_kind(local: &str) -> (XsdKind, bool) {
    match local {
        "integer" | "int" | "long" | "short" | "byte" | "nonNegativeInteger" | "positiveInteger"
        | "negativeInteger" | "nonPositiveInteger" | "unsignedLong" | "unsignedInt" | "unsignedShort"
        | "unsignedByte" => (XsdKind::Integer, true),
        "decimal" => (XsdKind::Decimal, true),
        "NCName" | "ID" | "IDREF" | "ENTITY" => (XsdKind::NCName, true),
        "NMTOKEN" => (XsdKind::NmToken, true),
        "string" | "normalizedString" | "token" => (XsdKind::String, true),
        _ => (XsdKind::String, false),
    }
}

struct Reader<'a> {
    elements: BTreeMap<&'a str, &'a XmlElement>,
    types: BTreeMap<&'a str, &'a XmlElement>,
    decls: BTreeMap<String, ElementDecl>,
    repeatable: BTreeSet<String>,
    warnings: Vec<String>,
}

enum Content<'a> {
    Simple(XsdKind),
    Complex(Option<&'a XmlElement>),
}

/// Reads an XSD document. `root` picks the global element used as the
/// document root; when absent the first global element is used.
pub fn read_xsd(text: &str, root: Option<&str>) -> Result<(ElementSchema, Vec<String>), IngestError> {
    let doc = xml::parse(text)?;
    if !doc.is(XS, "schema") {
        return Err(IngestError::Xsd(format!("expected xs:schema, found `{}`", doc.name)));
    }
    let mut reader = Reader { elements: BTreeMap::new(), types: BTreeMap::new(), decls: BTreeMap::new(), repeatable: BTreeSet::new(), warnings: Vec::new() };
    let mut first = None;
    for child in doc.children.iter().filter(|c| c.namespace.as_deref() == Some(XS)) {
        match (child.name.as_str(), child.attr("name")) {
            ("element", Some(name)) => {
                first.get_or_insert(name);
                reader.elements.insert(name, child);
            }
            ("complexType", Some(name)) => {
                reader.types.insert(name, child);
            }
            ("annotation" | "import" | "include", _) => {}
            (other, _) => reader.warnings.push(format!("skipping top-level xs:{other}")),
        }
    }
    let root = match root.or(first) {
        Some(r) => r.to_string(),
        None => return Err(IngestError::Xsd("schema declares no global element".into())),
    };
    let decl = *reader.elements.get(root.as_str()).ok_or_else(|| IngestError::Xsd(format!("no global element `{root}`")))?;
    match reader.content(decl)? {
        Content::Complex(body) => reader.declare(&root, body)?,
        Content::Simple(_) => return Err(IngestError::Xsd(format!("root element `{root}` has simple content"))),
    }
    for name in &reader.repeatable {
        if let Some(decl) = reader.decls.get_mut(name) {
            decl.repeatable = true;
        }
    }
    Ok((ElementSchema { root, elements: reader.decls }, reader.warnings))
}

fn occurs(el: &XmlElement, attr: &str) -> Result<Option<u32>, IngestError> {
    match el.attr(attr) {
        None => Ok(Some(1)),
        Some("unbounded") => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|_| IngestError::Xsd(format!("bad {attr} `{v}`"))),
    }
}

fn strip_prefix(qname: &str) -> &str {
    qname.rsplit_once(':').map_or(qname, |(_, l)| l)
}

impl<'a> Reader<'a> {
    /// Resolves an element declaration (following `ref`) to its name and declaration node.
    fn resolve(&self, el: &'a XmlElement) -> Result<(String, &'a XmlElement), IngestError> {
        if let Some(r) = el.attr("ref") {
            let name = strip_prefix(r);
            let target = self.elements.get(name).ok_or_else(|| IngestError::Xsd(format!("unresolved element ref `{r}`")))?;
            return Ok((name.to_string(), target));
        }
        let name = el.attr("name").ok_or_else(|| IngestError::Xsd("element without name or ref".into()))?;
        Ok((name.to_string(), el))
    }

    fn content(&mut self, decl: &'a XmlElement) -> Result<Content<'a>, IngestError> {
        if let Some(ty) = decl.attr("type") {
            let local = strip_prefix(ty);
            if let Some(named) = self.types.get(local) {
                return Ok(Content::Complex(Some(named)));
            }
            let (kind, known) = builtin_kind(local);
            if !known {
                self.warnings.push(format!("unknown XSD type `{ty}` mapped to string"));
            }
            return Ok(Content::Simple(kind));
        }
        if let Some(ct) = decl.children.iter().find(|c| c.is(XS, "complexType")) {
            return Ok(Content::Complex(Some(ct)));
        }
        if decl.children.iter().any(|c| c.is(XS, "simpleType")) {
            self.warnings.push(format!("simple type restriction on `{}` read as string", decl.attr("name").unwrap_or("?")));
        } else {
            self.warnings.push(format!("untyped element `{}` read as string", decl.attr("name").unwrap_or("?")));
        }
        Ok(Content::Simple(XsdKind::String))
    }

    fn declare(&mut self, name: &str, body: Option<&'a XmlElement>) -> Result<(), IngestError> {
        if self.decls.contains_key(name) {
            return Ok(());
        }
        // placeholder guards recursive content models
        self.decls.insert(
            name.to_string(),
            ElementDecl { name: name.to_string(), children: vec![], fields: vec![], repeatable: false },
        );
        let mut children = Vec::new();
        let mut fields = Vec::new();
        let mut nested = Vec::new();
        if let Some(ct) = body {
            self.walk_type(ct, false, &mut children, &mut fields, &mut nested)?;
        }
        let decl = self.decls.get_mut(name).unwrap();
        decl.children = children;
        decl.fields = fields;
        for (child, body) in nested {
            self.declare(&child, body)?;
        }
        Ok(())
    }

    fn walk_type(
        &mut self,
        node: &'a XmlElement,
        optional: bool,
        children: &mut Vec<ChildRef>,
        fields: &mut Vec<LeafField>,
        nested: &mut Vec<(String, Option<&'a XmlElement>)>,
    ) -> Result<(), IngestError> {
        for part in node.children.iter().filter(|c| c.namespace.as_deref() == Some(XS)) {
            match part.name.as_str() {
                "sequence" | "all" => self.walk_type(part, optional, children, fields, nested)?,
                "choice" => self.walk_type(part, true, children, fields, nested)?,
                "element" => {
                    let (name, decl) = self.resolve(part)?;
                    let min = if optional { 0 } else { occurs(part, "minOccurs")?.unwrap_or(0) };
                    let max = occurs(part, "maxOccurs")?;
                    match self.content(decl)? {
                        Content::Complex(body) => {
                            children.push(ChildRef { name: name.clone(), min_occurs: min, max_occurs: max });
                            if max.is_none_or(|m| m > 1) {
                                self.repeatable.insert(name.clone());
                            }
                            nested.push((name, body));
                        }
                        Content::Simple(kind) => {
                            fields.push(LeafField { name, kind, min_occurs: min, max_occurs: max, samples: vec![] })
                        }
                    }
                }
                "attribute" => {
                    let name = part
                        .attr("name")
                        .or(part.attr("ref").map(strip_prefix))
                        .ok_or_else(|| IngestError::Xsd("attribute without name".into()))?;
                    let kind = match part.attr("type") {
                        Some(ty) => {
                            let (kind, known) = builtin_kind(strip_prefix(ty));
                            if !known {
                                self.warnings.push(format!("unknown XSD type `{ty}` mapped to string"));
                            }
                            kind
                        }
                        None => XsdKind::String,
                    };
                    let min = u32::from(part.attr("use") == Some("required"));
                    fields.push(LeafField { name: name.to_string(), kind, min_occurs: min, max_occurs: Some(1), samples: vec![] });
                }
                "complexContent" | "simpleContent" => {
                    self.warnings.push(format!("xs:{} read through its extension body only", part.name));
                    for ext in &part.children {
                        self.walk_type(ext, optional, children, fields, nested)?;
                    }
                }
                "annotation" => {}
                other => self.warnings.push(format!("skipping xs:{other}")),
            }
        }
        Ok(())
    }
}
