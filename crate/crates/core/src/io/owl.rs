//! Reader and writer for the OWL subset in RDF/XML.
//!
//! The profile covers `owl:Class` with `rdfs:subClassOf`, `owl:ObjectProperty`
//! and `owl:DatatypeProperty` with `rdfs:domain`/`rdfs:range`, cardinality as
//! `om:minCardinality`/`om:maxCardinality` annotations (`*` is unbounded) and
//! `owl:NamedIndividual` with `rdf:type` and property assertions. Several
//! `rdfs:domain` elements are read as a union of classes. Frames are named by
//! `rdf:about="#name"`, a full IRI ending in `#name`, or `rdf:ID="name"`.
//!
//! The writer is deterministic: frames in name order, one element per fact.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::datatype::{XsdKind, XSD_NAMESPACE};
use crate::model::{FrameKind, InstanceFrame, Ontology, RangeSpec, SlotFrame, Value, Violation, TOP_CLASS};
use crate::xml::{self, XmlElement, XmlError};

pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const OWL: &str = "http://www.w3.org/2002/07/owl#";
pub const OM: &str = "http://ontomerge.local/annotations#";
pub const BASE_PREFIX: &str = "http://ontomerge.local/";
const XML_NS: &str = "http://www.w3.org/XML/1998/namespace";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OwlError {
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("malformed OWL document: {0}")]
    Malformed(String),
    #[error("unresolvable reference to {kind} `{name}` from `{from}`")]
    UnresolvableReference { kind: FrameKind, name: String, from: String },
    #[error("ontology is ill-formed: {}", .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OwlDocument {
    pub ontology: Ontology,
    /// Constructs outside the profile that were skipped.
    pub warnings: Vec<String>,
}

/// Reads an OWL-subset document. The ontology name comes from the
/// `rdfs:label` of `owl:Ontology`, then the last segment of `xml:base`,
/// then `fallback_name`.
pub fn read_owl(text: &str, fallback_name: &str) -> Result<OwlDocument, OwlError> {
    let root = xml::parse(text)?;
    if !root.is(RDF, "RDF") {
        return Err(OwlError::Malformed(format!("root element is `{}`, expected rdf:RDF", root.name)));
    }
    let mut warnings = Vec::new();
    let mut label = None;
    let mut classes: Vec<(String, &XmlElement)> = Vec::new();
    let mut slots: Vec<(String, bool, &XmlElement)> = Vec::new();
    let mut individuals: Vec<(String, &XmlElement)> = Vec::new();
    for el in &root.children {
        let kind = match el.namespace.as_deref() {
            Some(OWL) => el.name.as_str(),
            _ => "",
        };
        match kind {
            "Ontology" => {
                label = el.children.iter().find(|c| c.is(RDFS, "label")).map(|c| c.trimmed_text().to_string());
                warn_children(el, &[(RDFS, "label")], &mut warnings);
            }
            "Class" => classes.push((subject(el)?, el)),
            "ObjectProperty" => slots.push((subject(el)?, true, el)),
            "DatatypeProperty" => slots.push((subject(el)?, false, el)),
            "NamedIndividual" => individuals.push((subject(el)?, el)),
            _ => warnings.push(format!("skipped unsupported element `{}`", qualified(el))),
        }
    }
    let name = label
        .filter(|l| !l.is_empty())
        .or_else(|| {
            root.attr_ns(XML_NS, "base")
                .and_then(|b| b.trim_end_matches(['/', '#']).rsplit('/').next())
                .filter(|s| !s.is_empty())
                .map(str::to_string)
        })
        .unwrap_or_else(|| fallback_name.to_string());
    let mut o = Ontology::new(name);

    let dup = |kind: FrameKind, n: &str| OwlError::Malformed(format!("{kind} `{n}` is declared twice"));
    for (name, _) in &classes {
        if o.classes.insert(name.clone(), Default::default()).is_some() {
            return Err(dup(FrameKind::Class, name));
        }
    }
    let class_ref = |o: &Ontology, iri: &str, from: &str| -> Result<String, OwlError> {
        let n = local(iri);
        if o.classes.contains_key(&n) {
            Ok(n)
        } else {
            Err(OwlError::UnresolvableReference { kind: FrameKind::Class, name: n, from: from.to_string() })
        }
    };

    for (name, el) in &classes {
        let mut supers = BTreeSet::new();
        for c in &el.children {
            if c.is(RDFS, "subClassOf") {
                let Some(target) = c.attr_ns(RDF, "resource") else {
                    warnings.push(format!("class `{name}`: skipped anonymous rdfs:subClassOf"));
                    continue;
                };
                if target == format!("{OWL}Thing") || local(target) == TOP_CLASS && !o.classes.contains_key(TOP_CLASS) {
                    continue;
                }
                supers.insert(class_ref(&o, target, name)?);
            } else {
                warnings.push(format!("class `{name}`: skipped `{}`", qualified(c)));
            }
        }
        o.classes.get_mut(name).unwrap().superclasses = supers;
    }

    for (name, object, el) in &slots {
        let mut domain = BTreeSet::new();
        let mut range_classes = BTreeSet::new();
        let mut datatype = None;
        let (mut min, mut max) = (0u32, None);
        for c in &el.children {
            let resource = c.attr_ns(RDF, "resource");
            if c.is(RDFS, "domain") {
                let r = resource.ok_or_else(|| OwlError::Malformed(format!("slot `{name}`: rdfs:domain without rdf:resource")))?;
                domain.insert(class_ref(&o, r, name)?);
            } else if c.is(RDFS, "range") {
                let r = resource.ok_or_else(|| OwlError::Malformed(format!("slot `{name}`: rdfs:range without rdf:resource")))?;
                if *object {
                    range_classes.insert(class_ref(&o, r, name)?);
                } else {
                    let kind: XsdKind = r.parse().map_err(|_| OwlError::Malformed(format!("slot `{name}`: unsupported datatype `{r}`")))?;
                    if datatype.replace(kind).is_some_and(|k| k != kind) {
                        return Err(OwlError::Malformed(format!("slot `{name}` has several datatype ranges")));
                    }
                }
            } else if c.is(OM, "minCardinality") {
                min = c.trimmed_text().parse().map_err(|_| OwlError::Malformed(format!("slot `{name}`: bad minCardinality")))?;
            } else if c.is(OM, "maxCardinality") {
                max = match c.trimmed_text() {
                    "*" => None,
                    t => Some(t.parse().map_err(|_| OwlError::Malformed(format!("slot `{name}`: bad maxCardinality")))?),
                };
            } else {
                warnings.push(format!("slot `{name}`: skipped `{}`", qualified(c)));
            }
        }
        let range = match object {
            true => RangeSpec::Classes(range_classes),
            false => RangeSpec::Datatype(datatype.unwrap_or(XsdKind::String)),
        };
        let slot = SlotFrame { domain, range, min_card: min, max_card: max };
        if o.slots.insert(name.clone(), slot).is_some() {
            return Err(dup(FrameKind::Slot, name));
        }
    }

    for (name, _) in &individuals {
        if o.instances.insert(name.clone(), Default::default()).is_some() {
            return Err(dup(FrameKind::Instance, name));
        }
    }
    for (name, el) in &individuals {
        let mut inst = InstanceFrame::default();
        for c in &el.children {
            if c.is(RDF, "type") {
                let r = c.attr_ns(RDF, "resource").ok_or_else(|| OwlError::Malformed(format!("individual `{name}`: rdf:type without rdf:resource")))?;
                if r == format!("{OWL}NamedIndividual") {
                    continue;
                }
                inst.types.insert(class_ref(&o, r, name)?);
                continue;
            }
            let Some(slot) = o.slots.get(&c.name) else {
                return Err(OwlError::UnresolvableReference { kind: FrameKind::Slot, name: c.name.clone(), from: name.clone() });
            };
            let value = match (&slot.range, c.attr_ns(RDF, "resource")) {
                (RangeSpec::Classes(_), Some(r)) => {
                    let target = local(r);
                    if !o.instances.contains_key(&target) {
                        return Err(OwlError::UnresolvableReference { kind: FrameKind::Instance, name: target, from: name.clone() });
                    }
                    Value::Frame(target)
                }
                (RangeSpec::Datatype(declared), None) => {
                    let kind = match c.attr_ns(RDF, "datatype") {
                        Some(dt) => dt.parse().map_err(|_| OwlError::Malformed(format!("individual `{name}`: unsupported datatype `{dt}`")))?,
                        None => *declared,
                    };
                    Value::literal(c.text.clone(), kind)
                }
                _ => return Err(OwlError::Malformed(format!("individual `{name}`: value of `{}` does not fit its property kind", c.name))),
            };
            inst.values.entry(c.name.clone()).or_default().insert(value);
        }
        o.instances.insert(name.clone(), inst);
    }

    let violations = o.validate();
    if !violations.is_empty() {
        return Err(OwlError::Invalid(violations));
    }
    Ok(OwlDocument { ontology: o, warnings })
}

fn subject(el: &XmlElement) -> Result<String, OwlError> {
    if let Some(id) = el.attr_ns(RDF, "ID") {
        return Ok(id.to_string());
    }
    match el.attr_ns(RDF, "about") {
        Some(about) if !local(about).is_empty() => Ok(local(about)),
        _ => Err(OwlError::Malformed(format!("`{}` without rdf:about or rdf:ID", qualified(el)))),
    }
}

/// Fragment of an IRI reference.
fn local(iri: &str) -> String {
    iri.rsplit_once('#').map_or(iri, |(_, f)| f).to_string()
}

fn qualified(el: &XmlElement) -> String {
    match el.namespace.as_deref() {
        Some(RDF) => format!("rdf:{}", el.name),
        Some(RDFS) => format!("rdfs:{}", el.name),
        Some(OWL) => format!("owl:{}", el.name),
        Some(ns) => format!("{{{ns}}}{}", el.name),
        None => el.name.clone(),
    }
}

fn warn_children(el: &XmlElement, allowed: &[(&str, &str)], warnings: &mut Vec<String>) {
    for c in &el.children {
        if !allowed.iter().any(|(ns, n)| c.is(ns, n)) {
            warnings.push(format!("`{}`: skipped `{}`", qualified(el), qualified(c)));
        }
    }
}

fn text(s: &str) -> String {
    xml::escape(s).replace('\r', "&#13;")
}

pub fn write_owl(o: &Ontology) -> String {
    let base = format!("{BASE_PREFIX}{}", o.name);
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!("<rdf:RDF xmlns=\"{base}#\"\n"));
    out.push_str(&format!("     xml:base=\"{base}\"\n"));
    out.push_str(&format!("     xmlns:rdf=\"{RDF}\"\n"));
    out.push_str(&format!("     xmlns:rdfs=\"{RDFS}\"\n"));
    out.push_str(&format!("     xmlns:owl=\"{OWL}\"\n"));
    out.push_str(&format!("     xmlns:xsd=\"{XSD_NAMESPACE}\"\n"));
    out.push_str(&format!("     xmlns:om=\"{OM}\">\n"));
    out.push_str("  <owl:Ontology rdf:about=\"\">\n");
    out.push_str(&format!("    <rdfs:label>{}</rdfs:label>\n", text(&o.name)));
    out.push_str("  </owl:Ontology>\n");

    let element = |out: &mut String, tag: &str, name: &str, body: Vec<String>| {
        if body.is_empty() {
            out.push_str(&format!("  <{tag} rdf:about=\"#{name}\"/>\n"));
        } else {
            out.push_str(&format!("  <{tag} rdf:about=\"#{name}\">\n"));
            for line in body {
                out.push_str(&format!("    {line}\n"));
            }
            out.push_str(&format!("  </{tag}>\n"));
        }
    };
    for (name, class) in &o.classes {
        let body = class.superclasses.iter().map(|s| format!("<rdfs:subClassOf rdf:resource=\"#{s}\"/>")).collect();
        element(&mut out, "owl:Class", name, body);
    }
    for (name, slot) in &o.slots {
        let mut body: Vec<String> = slot.domain.iter().map(|d| format!("<rdfs:domain rdf:resource=\"#{d}\"/>")).collect();
        let tag = match &slot.range {
            RangeSpec::Classes(range) => {
                body.extend(range.iter().map(|r| format!("<rdfs:range rdf:resource=\"#{r}\"/>")));
                "owl:ObjectProperty"
            }
            RangeSpec::Datatype(kind) => {
                body.push(format!("<rdfs:range rdf:resource=\"{}\"/>", kind.iri()));
                "owl:DatatypeProperty"
            }
        };
        if slot.min_card != 0 {
            body.push(format!("<om:minCardinality>{}</om:minCardinality>", slot.min_card));
        }
        if let Some(max) = slot.max_card {
            body.push(format!("<om:maxCardinality>{max}</om:maxCardinality>"));
        }
        element(&mut out, tag, name, body);
    }
    for (name, inst) in &o.instances {
        let mut body: Vec<String> = inst.types.iter().map(|t| format!("<rdf:type rdf:resource=\"#{t}\"/>")).collect();
        for (slot, values) in &inst.values {
            for v in values {
                body.push(match v {
                    Value::Frame(r) => format!("<{slot} rdf:resource=\"#{r}\"/>"),
                    Value::Literal { lexical, kind } => {
                        format!("<{slot} rdf:datatype=\"{}\">{}</{slot}>", kind.iri(), text(lexical))
                    }
                });
            }
        }
        element(&mut out, "owl:NamedIndividual", name, body);
    }
    out.push_str("</rdf:RDF>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::write_canonical;

    fn sample() -> Ontology {
        let mut o = Ontology::new("Shop");
        o.add_class("vendor", Vec::<String>::new()).unwrap();
        o.add_class("book", Vec::<String>::new()).unwrap();
        o.add_class("novel", ["book"]).unwrap();
        o.add_slot("hasbook", SlotFrame::object(["vendor".to_string()], ["book".to_string()])).unwrap();
        o.add_slot("title", SlotFrame::datatype(["book".to_string()], XsdKind::String).with_cardinality(1, Some(1))).unwrap();
        let mut b = InstanceFrame::default();
        b.types.insert("book".into());
        b.values.entry("title".into()).or_default().insert(Value::literal("Tom & \"Jerry\"\r\n <x>", XsdKind::String));
        o.add_instance("b1", b).unwrap();
        let mut v = InstanceFrame::default();
        v.types.insert("vendor".into());
        v.values.entry("hasbook".into()).or_default().insert(Value::Frame("b1".into()));
        o.add_instance("v1", v).unwrap();
        o
    }

    #[test]
    fn round_trip_is_a_fixpoint() {
        let o = sample();
        let first = write_owl(&o);
        let back = read_owl(&first, "x").unwrap();
        assert!(back.warnings.is_empty(), "{:?}", back.warnings);
        assert_eq!(back.ontology, o);
        assert_eq!(write_owl(&back.ontology), first);
        assert_eq!(write_canonical(&back.ontology), write_canonical(&o));
    }

    #[test]
    fn unknown_axiom_is_a_warning() {
        let mut doc = write_owl(&sample());
        doc = doc.replace("</rdf:RDF>", "  <owl:AllDisjointClasses/>\n</rdf:RDF>");
        let read = read_owl(&doc, "x").unwrap();
        assert_eq!(read.warnings.len(), 1);
        assert_eq!(read.ontology, sample());
    }

    #[test]
    fn undeclared_class_is_an_error() {
        let doc = write_owl(&sample()).replace("rdf:resource=\"#vendor\"/>", "rdf:resource=\"#shop\"/>");
        assert!(matches!(
            read_owl(&doc, "x"),
            Err(OwlError::UnresolvableReference { kind: FrameKind::Class, ref name, .. }) if name == "shop"
        ));
    }

    #[test]
    fn accepts_rdf_id_and_full_iris() {
        let doc = format!(
            r##"<rdf:RDF xmlns:rdf="{RDF}" xmlns:rdfs="{RDFS}" xmlns:owl="{OWL}" xml:base="http://example.org/Lib">
  <owl:Class rdf:ID="a"/>
  <owl:Class rdf:about="http://example.org/Lib#b"><rdfs:subClassOf rdf:resource="#a"/></owl:Class>
  <owl:Class rdf:about="#c"><rdfs:subClassOf rdf:resource="http://www.w3.org/2002/07/owl#Thing"/></owl:Class>
</rdf:RDF>"##
        );
        let read = read_owl(&doc, "x").unwrap();
        assert_eq!(read.ontology.name, "Lib");
        assert_eq!(read.ontology.names(FrameKind::Class), ["a", "b", "c"]);
        assert!(read.ontology.classes["c"].superclasses.is_empty());
        assert!(read.ontology.classes["b"].superclasses.contains("a"));
    }

    #[test]
    fn rejects_other_roots() {
        assert!(matches!(read_owl("<a/>", "x"), Err(OwlError::Malformed(_))));
        assert!(matches!(read_owl("<a>", "x"), Err(OwlError::Xml(_))));
    }
}
