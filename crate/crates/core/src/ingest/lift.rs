//! Element schema to local ontology.
//!
//! * every complex element becomes a class;
//! * a complex child `C` of class `P` becomes the object property
//!   `<prefix>C` with domain `P` and range `C`;
//! * leaf fields (simple elements and attributes) become datatype
//!   properties whose range is inferred over every observed value;
//! * cardinality follows occurrence counts, with repeatable members unbounded.
//!
//! A property name shared by several parents yields a single slot whose
//! domain lists all of them.

use std::collections::{BTreeMap, BTreeSet};

use super::schema::{Document, ElementSchema};
use super::IngestError;
use crate::datatype::{infer_datatype, is_name_char, XsdKind};
use crate::model::{InstanceFrame, Ontology, RangeSpec, SlotFrame, Value};
use crate::xml::XmlElement;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftConfig {
    pub object_property_prefix: String,
    pub root_as_class: bool,
    /// Also lift element occurrences into instances.
    pub with_instances: bool,
}

impl Default for LiftConfig {
    fn default() -> Self {
        Self { object_property_prefix: "has".into(), root_as_class: true, with_instances: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lifted {
    pub ontology: Ontology,
    pub warnings: Vec<String>,
}

struct FieldAcc {
    domain: BTreeSet<String>,
    samples: Vec<String>,
    declared: BTreeSet<XsdKind>,
    all_sampled: bool,
    min: u32,
    max: Option<u32>,
}

fn widen(a: Option<u32>, b: Option<u32>) -> Option<u32> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        _ => None,
    }
}

pub fn lift(
    name: &str,
    schema: &ElementSchema,
    documents: &[Document],
    config: &LiftConfig,
) -> Result<Lifted, IngestError> {
    if !config.object_property_prefix.chars().all(is_name_char) {
        return Err(IngestError::InvalidPrefix(config.object_property_prefix.clone()));
    }
    let mut warnings = Vec::new();
    let mut onto = Ontology::new(name);
    let is_class = |el: &str| schema.is_complex(el) && (config.root_as_class || el != schema.root);

    for decl in schema.elements.values() {
        if is_class(&decl.name) {
            onto.add_class(&decl.name, std::iter::empty::<String>()).expect("schema names are unique");
        }
    }

    let mut objects: BTreeMap<String, SlotFrame> = BTreeMap::new();
    let mut fields: BTreeMap<String, FieldAcc> = BTreeMap::new();
    for decl in schema.elements.values() {
        if !is_class(&decl.name) {
            if !decl.fields.is_empty() || !decl.children.is_empty() {
                warnings.push(format!("members of root element `{}` are not lifted", decl.name));
            }
            continue;
        }
        for child in &decl.children {
            if !is_class(&child.name) {
                continue;
            }
            let slot = format!("{}{}", config.object_property_prefix, child.name);
            let entry = objects.entry(slot).or_insert_with(|| {
                SlotFrame::object([], [child.name.clone()]).with_cardinality(child.min_occurs, child.max_occurs)
            });
            entry.domain.insert(decl.name.clone());
            entry.min_card = entry.min_card.min(child.min_occurs);
            entry.max_card = widen(entry.max_card, child.max_occurs);
        }
        for field in &decl.fields {
            let acc = fields.entry(field.name.clone()).or_insert_with(|| FieldAcc {
                domain: BTreeSet::new(),
                samples: Vec::new(),
                declared: BTreeSet::new(),
                all_sampled: true,
                min: field.min_occurs,
                max: field.max_occurs,
            });
            acc.domain.insert(decl.name.clone());
            acc.samples.extend(field.samples.iter().cloned());
            acc.declared.insert(field.kind);
            acc.all_sampled &= !field.samples.is_empty();
            acc.min = acc.min.min(field.min_occurs);
            acc.max = widen(acc.max, field.max_occurs);
        }
    }

    for (slot, frame) in objects {
        if fields.contains_key(&slot) {
            return Err(IngestError::SlotNameClash(slot));
        }
        onto.add_slot(&slot, frame).expect("object slot names are unique");
    }
    for (slot, acc) in fields {
        let kind = if acc.all_sampled {
            infer_datatype(&acc.samples).unwrap_or(XsdKind::String)
        } else if acc.declared.len() == 1 {
            *acc.declared.first().unwrap()
        } else {
            warnings.push(format!("field `{slot}` has conflicting declared types; using string"));
            XsdKind::String
        };
        let frame = SlotFrame::datatype(acc.domain, kind).with_cardinality(acc.min, acc.max.map(|m| m.max(1)));
        onto.add_slot(&slot, frame).expect("field names are unique");
    }

    if config.with_instances {
        let mut lifter = InstanceLifter { onto: &mut onto, config, counters: BTreeMap::new() };
        for doc in documents {
            lifter.lift_element(&doc.root)?;
        }
    }

    let violations = onto.validate();
    if !violations.is_empty() {
        return Err(IngestError::Invalid(violations));
    }
    Ok(Lifted { ontology: onto, warnings })
}

struct InstanceLifter<'a> {
    onto: &'a mut Ontology,
    config: &'a LiftConfig,
    counters: BTreeMap<String, usize>,
}

impl InstanceLifter<'_> {
    fn literal(&self, slot: &str, lexical: &str) -> Result<Option<Value>, IngestError> {
        if lexical.is_empty() {
            return Ok(None);
        }
        let Some(RangeSpec::Datatype(kind)) = self.onto.slots.get(slot).map(|s| &s.range) else {
            return Ok(None);
        };
        if !kind.admits(lexical) {
            return Err(IngestError::InvalidValue { field: slot.to_string(), value: lexical.to_string(), kind: *kind });
        }
        Ok(Some(Value::literal(lexical, *kind)))
    }

    /// Lifts `el` and its descendants; returns the instance name when `el` is a class.
    fn lift_element(&mut self, el: &XmlElement) -> Result<Option<String>, IngestError> {
        let is_class = self.onto.classes.contains_key(&el.name);
        let mut values: BTreeMap<String, BTreeSet<Value>> = BTreeMap::new();
        for attr in el.attributes.iter().filter(|a| a.namespace.is_none()) {
            if let Some(v) = self.literal(&attr.name, attr.value.trim())? {
                values.entry(attr.name.clone()).or_default().insert(v);
            }
        }
        for child in &el.children {
            match self.lift_element(child)? {
                Some(instance) => {
                    let slot = format!("{}{}", self.config.object_property_prefix, child.name);
                    if self.onto.slots.contains_key(&slot) {
                        values.entry(slot).or_default().insert(Value::Frame(instance));
                    }
                }
                None if !self.onto.classes.contains_key(&child.name) => {
                    if let Some(v) = self.literal(&child.name, child.trimmed_text())? {
                        values.entry(child.name.clone()).or_default().insert(v);
                    }
                }
                None => {}
            }
        }
        if !is_class {
            return Ok(None);
        }
        let n = self.counters.entry(el.name.clone()).or_default();
        *n += 1;
        let name = format!("{}_{}", el.name, n);
        let types = BTreeSet::from([el.name.clone()]);
        values.retain(|slot, _| self.onto.slot_applies_to(slot, &types));
        self.onto.add_instance(&name, InstanceFrame { types, values }).expect("instance counters are unique");
        Ok(Some(name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::infer_schema;
    use crate::model::SlotKind;

    fn lift_docs(docs: &[&str], config: &LiftConfig) -> Ontology {
        let docs: Vec<Document> = docs.iter().map(|d| Document::parse(d).unwrap()).collect();
        let schema = infer_schema(&docs).unwrap();
        lift("t", &schema, &docs, config).unwrap().ontology
    }

    #[test]
    fn text_only_children_give_one_class() {
        let o = lift_docs(&["<person><name>Ann</name><age>7</age></person>"], &LiftConfig::default());
        assert_eq!(o.names(crate::FrameKind::Class), vec!["person"]);
        assert!(o.slots.values().all(|s| s.kind() == SlotKind::DatatypeProperty));
        assert_eq!(o.slots["age"].range, RangeSpec::Datatype(XsdKind::Integer));
    }

    #[test]
    fn nesting_gives_prefixed_object_property() {
        let o = lift_docs(
            &["<bib><vendor id='v1'><book><title>A B</title></book><book><title>C</title></book></vendor></bib>"],
            &LiftConfig::default(),
        );
        let hasbook = &o.slots["hasbook"];
        assert_eq!(hasbook.domain, BTreeSet::from(["vendor".to_string()]));
        assert_eq!(hasbook.range, RangeSpec::Classes(BTreeSet::from(["book".to_string()])));
        assert_eq!((hasbook.min_card, hasbook.max_card), (1, None));
        assert_eq!(o.slots["hasvendor"].max_card, Some(1));
        assert_eq!(o.slots["id"].range, RangeSpec::Datatype(XsdKind::NCName));
    }

    #[test]
    fn instances_are_optional_and_linked() {
        let doc = "<bib><vendor><name>X</name></vendor></bib>";
        assert!(lift_docs(&[doc], &LiftConfig::default()).instances.is_empty());
        let o = lift_docs(&[doc], &LiftConfig { with_instances: true, ..Default::default() });
        assert_eq!(o.instances.len(), 2);
        assert!(o.instances["bib_1"].values["hasvendor"].contains(&Value::Frame("vendor_1".into())));
        assert!(o.instances["vendor_1"].values["name"].contains(&Value::literal("X", XsdKind::NCName)));
    }

    #[test]
    fn root_can_be_left_out() {
        let o = lift_docs(
            &["<bib><vendor><name>X</name></vendor></bib>"],
            &LiftConfig { root_as_class: false, ..Default::default() },
        );
        assert_eq!(o.names(crate::FrameKind::Class), vec!["vendor"]);
        assert!(!o.slots.contains_key("hasvendor"));
    }

    #[test]
    fn rejects_bad_prefix_and_clashing_slot_names() {
        let docs = [Document::parse("<a><b><c>1</c></b><hasb>x</hasb></a>").unwrap()];
        let schema = infer_schema(&docs).unwrap();
        let err = lift("t", &schema, &docs, &LiftConfig::default()).unwrap_err();
        assert_eq!(err, IngestError::SlotNameClash("hasb".into()));
        let bad = LiftConfig { object_property_prefix: "has x".into(), ..Default::default() };
        assert!(matches!(lift("t", &schema, &docs, &bad), Err(IngestError::InvalidPrefix(_))));
    }
}
