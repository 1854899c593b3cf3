//! Conflict detection over the merged ontology.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{MergeSession, Operation};
use crate::model::{FrameId, FrameKind, FrameRef, Ontology, RangeSpec, Rule, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConflictKind {
    NameCollision,
    DanglingReference,
    RedundantSubclass,
    RangeViolation,
    CardinalityViolation,
    DatatypeMismatch,
}

impl fmt::Display for ConflictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConflictKind::NameCollision => "name-collision",
            ConflictKind::DanglingReference => "dangling-reference",
            ConflictKind::RedundantSubclass => "redundant-subclass",
            ConflictKind::RangeViolation => "range-violation",
            ConflictKind::CardinalityViolation => "cardinality-violation",
            ConflictKind::DatatypeMismatch => "datatype-mismatch",
        })
    }
}

/// A candidate fix for a conflict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub operation: Operation,
    /// Source ontology whose content this resolution keeps, if it takes a side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub favors: Option<String>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    pub kind: ConflictKind,
    pub frames: Vec<FrameId>,
    pub description: String,
    pub resolutions: Vec<Resolution>,
}

impl Conflict {
    /// Identity used to tell whether a conflict is still present.
    pub fn key(&self) -> String {
        let frames: Vec<String> = self.frames.iter().map(|f| f.to_string()).collect();
        format!("{} {} {}", self.kind, frames.join(" "), self.description)
    }
}

fn id(o: &Ontology, name: &str) -> FrameId {
    o.frame_id(name)
}

/// Conflicts that need only the merged ontology itself: dangling references,
/// redundant subclass edges, range and cardinality violations.
pub fn detect_structural(o: &Ontology) -> Vec<Conflict> {
    let mut out = Vec::new();

    for v in o.validate().into_iter().filter(|v| v.rule == Rule::UnresolvedReference) {
        out.push(Conflict {
            kind: ConflictKind::DanglingReference,
            frames: vec![id(o, &v.frame)],
            description: format!("{} `{}` references unknown {}", v.kind, v.frame, v.detail),
            resolutions: vec![Resolution {
                operation: Operation::RemoveFrame { kind: v.kind, frame: v.frame.clone() },
                favors: None,
                description: format!("remove {} `{}`", v.kind, v.frame),
            }],
        });
    }

    if o.subclass_cycles().is_empty() {
        for (class, frame) in &o.classes {
            for direct in &frame.superclasses {
                for other in &frame.superclasses {
                    if direct != other && o.is_ancestor(other, direct) {
                        out.push(Conflict {
                            kind: ConflictKind::RedundantSubclass,
                            frames: vec![id(o, class), id(o, direct), id(o, other)],
                            description: format!(
                                "`{class}` is a direct subclass of `{direct}` and of its ancestor `{other}`"
                            ),
                            resolutions: vec![Resolution {
                                operation: Operation::RemoveSuperclass { class: class.clone(), superclass: other.clone() },
                                favors: None,
                                description: format!("drop the edge `{class}` -> `{other}`"),
                            }],
                        });
                    }
                }
            }
        }
    }

    for (inst, frame) in &o.instances {
        for (slot, values) in &frame.values {
            let Some(slot_frame) = o.slots.get(slot) else { continue };
            for value in values {
                if let Some(reason) = range_violation(o, &slot_frame.range, value) {
                    out.push(Conflict {
                        kind: ConflictKind::RangeViolation,
                        frames: vec![id(o, inst), id(o, slot)],
                        description: format!("value {} of `{slot}` on `{inst}` {reason}", show_value(value)),
                        resolutions: vec![remove_value(inst, slot, value, None)],
                    });
                }
            }
            let count = values.len() as u32;
            let over = slot_frame.max_card.is_some_and(|max| count > max);
            if over || count < slot_frame.min_card {
                let bounds = format!("[{}, {}]", slot_frame.min_card, slot_frame.max_card.map_or("*".into(), |m| m.to_string()));
                let resolutions =
                    if over { values.iter().map(|v| remove_value(inst, slot, v, None)).collect() } else { vec![] };
                out.push(Conflict {
                    kind: ConflictKind::CardinalityViolation,
                    frames: vec![id(o, inst), id(o, slot)],
                    description: format!("`{inst}` has {count} values for `{slot}`, outside {bounds}"),
                    resolutions,
                });
            }
        }
    }
    out
}

fn range_violation(o: &Ontology, range: &RangeSpec, value: &Value) -> Option<String> {
    match (range, value) {
        (RangeSpec::Datatype(kind), Value::Literal { lexical, .. }) => {
            (!kind.admits(lexical)).then(|| format!("is not a valid {kind}"))
        }
        (RangeSpec::Datatype(kind), Value::Frame(_)) => Some(format!("is an instance but the range is {kind}")),
        (RangeSpec::Classes(_), Value::Literal { .. }) => Some("is a literal but the range is a class set".into()),
        (RangeSpec::Classes(classes), Value::Frame(target)) => {
            if classes.is_empty() {
                return None;
            }
            let types = o.instances.get(target).map(|i| i.types.clone()).unwrap_or_default();
            let inside = types.iter().any(|t| o.lineage(t).iter().any(|c| classes.contains(c)));
            (!inside).then(|| "is not an instance of a range class".into())
        }
    }
}

fn show_value(value: &Value) -> String {
    match value {
        Value::Literal { lexical, kind } => format!("\"{lexical}\"^^{kind}"),
        Value::Frame(f) => format!("#{f}"),
    }
}

fn remove_value(inst: &str, slot: &str, value: &Value, favors: Option<String>) -> Resolution {
    Resolution {
        operation: Operation::RemoveValue { instance: inst.to_string(), slot: slot.to_string(), value: value.clone() },
        favors,
        description: format!("remove value {} of `{slot}` from `{inst}`", show_value(value)),
    }
}

/// Strips a trailing `_<source>` or `_<source>_<n>` suffix.
fn base_name<'a>(name: &'a str, sources: &[String]) -> &'a str {
    let trimmed = match name.rsplit_once('_') {
        Some((head, n)) if !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) => head,
        _ => name,
    };
    for s in sources {
        if let Some(base) = trimmed.strip_suffix(s.as_str()).and_then(|b| b.strip_suffix('_')) {
            if !base.is_empty() {
                return base;
            }
        }
    }
    name
}

/// Source ontologies that contributed `value` to `slot` on merged instance `inst`.
fn value_sources(session: &MergeSession, inst: &str, slot: &str, value: &Value) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for pre in session.preimages(FrameKind::Instance, inst) {
        let Some(source) = session.source(&pre.ontology) else { continue };
        let Some(frame) = source.instances.get(&pre.name) else { continue };
        for (s, values) in &frame.values {
            if session.image(&FrameRef::slot(&source.name, s)) != Some(slot) {
                continue;
            }
            let hit = values.iter().any(|v| match (v, value) {
                (Value::Literal { .. }, _) => v == value,
                (Value::Frame(f), Value::Frame(m)) => session.image(&FrameRef::instance(&source.name, f)) == Some(m),
                _ => false,
            });
            if hit {
                out.insert(source.name.clone());
            }
        }
    }
    out
}

/// Full scan of the session's merged ontology.
pub fn detect_conflicts(session: &MergeSession) -> Vec<Conflict> {
    let o = session.merged();
    let sources: Vec<String> = session.sources().iter().map(|s| s.name.clone()).collect();
    let mut out = Vec::new();

    for kind in [FrameKind::Class, FrameKind::Slot, FrameKind::Instance] {
        let mut groups: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        let names = o.names(kind);
        for name in &names {
            groups.entry(base_name(name, &sources)).or_default().push(name.clone());
        }
        for (base, members) in groups.into_iter().filter(|(_, m)| m.len() > 1) {
            for (i, x) in members.iter().enumerate() {
                for y in &members[i + 1..] {
                    let (ox, oy) = (session.origins(kind, &id(o, x)), session.origins(kind, &id(o, y)));
                    if !ox.is_disjoint(&oy) {
                        continue;
                    }
                    // the member carrying the bare name goes first so the merge keeps it
                    let (a, b) = if y == base { (y, x) } else { (x, y) };
                    let free = a == base || b == base || !o.contains(kind, base);
                    let name = free.then(|| base.to_string());
                    let operation = match kind {
                        FrameKind::Class => Operation::MergeClasses { a: id(o, a), b: id(o, b), name },
                        FrameKind::Slot => Operation::MergeSlots { a: id(o, a), b: id(o, b), name },
                        FrameKind::Instance => Operation::MergeInstances { a: id(o, a), b: id(o, b), name, confirm: true },
                    };
                    out.push(Conflict {
                        kind: ConflictKind::NameCollision,
                        frames: vec![id(o, a), id(o, b)],
                        description: format!("{kind}s `{a}` and `{b}` share the name `{base}` but come from different sources"),
                        resolutions: vec![Resolution {
                            operation,
                            favors: None,
                            description: format!("merge `{a}` and `{b}`"),
                        }],
                    });
                }
            }
        }
    }

    for mut conflict in detect_structural(o) {
        if conflict.kind == ConflictKind::CardinalityViolation {
            let (inst, slot) = (conflict.frames[0].name.clone(), conflict.frames[1].name.clone());
            let all: BTreeSet<String> = sources.iter().cloned().collect();
            for r in &mut conflict.resolutions {
                let Operation::RemoveValue { value, .. } = &r.operation else { continue };
                let from = value_sources(session, &inst, &slot, value);
                // removing a value keeps the sides that did not contribute it
                let keeps: Vec<&String> = all.difference(&from).collect();
                if keeps.len() == 1 {
                    r.favors = Some(keeps[0].clone());
                }
            }
        }
        out.push(conflict);
    }

    for (slot, candidates) in session.pending_mismatches() {
        let shown: Vec<String> = candidates.iter().map(|c| format!("{}@{}", c.kind, c.origin)).collect();
        out.push(Conflict {
            kind: ConflictKind::DatatypeMismatch,
            frames: vec![id(o, slot)],
            description: format!("merged slot `{slot}` has disagreeing datatype ranges {}", shown.join(", ")),
            resolutions: candidates
                .iter()
                .map(|c| Resolution {
                    operation: Operation::SetSlotRange { slot: slot.clone(), range: RangeSpec::Datatype(c.kind) },
                    favors: Some(c.origin.clone()),
                    description: format!("use {} from `{}`", c.kind, c.origin),
                })
                .collect(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InstanceFrame, SlotFrame};
    use crate::XsdKind;

    fn hierarchy() -> Ontology {
        let mut o = Ontology::new("m");
        o.add_class("A", Vec::<String>::new()).unwrap();
        o.add_class("M", ["A"]).unwrap();
        o.add_class("C", ["M", "A"]).unwrap();
        o
    }

    #[test]
    fn redundant_edge_on_three_nodes() {
        let found = detect_structural(&hierarchy());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].kind, ConflictKind::RedundantSubclass);
        assert_eq!(
            found[0].resolutions[0].operation,
            Operation::RemoveSuperclass { class: "C".into(), superclass: "A".into() }
        );
    }

    #[test]
    fn cardinality_and_range() {
        let mut o = hierarchy();
        o.add_slot("s", SlotFrame::datatype(["A".to_string()], XsdKind::Integer).with_cardinality(0, Some(1))).unwrap();
        let values = BTreeSet::from([Value::literal("1", XsdKind::Integer), Value::literal("x", XsdKind::String)]);
        o.add_instance("i", InstanceFrame { types: ["A".to_string()].into(), values: [("s".to_string(), values)].into() })
            .unwrap();
        let found = detect_structural(&o);
        let kinds: Vec<ConflictKind> = found.iter().map(|c| c.kind).collect();
        assert!(kinds.contains(&ConflictKind::CardinalityViolation));
        assert!(kinds.contains(&ConflictKind::RangeViolation));
        let card = found.iter().find(|c| c.kind == ConflictKind::CardinalityViolation).unwrap();
        assert_eq!(card.resolutions.len(), 2);
    }

    #[test]
    fn dangling_reference_is_reported() {
        let mut o = hierarchy();
        o.classes.get_mut("C").unwrap().superclasses.insert("Gone".into());
        let found = detect_structural(&o);
        assert!(found.iter().any(|c| c.kind == ConflictKind::DanglingReference && c.frames[0].name == "C"));
    }

    #[test]
    fn base_names() {
        let sources = vec!["Ruby_bibliography".to_string(), "Niagara_bib".to_string()];
        assert_eq!(base_name("title_Niagara_bib", &sources), "title");
        assert_eq!(base_name("title_Niagara_bib_2", &sources), "title");
        assert_eq!(base_name("author_1", &sources), "author_1");
        assert_eq!(base_name("title", &sources), "title");
    }
}
