//! Frame-based ontology model: classes, slots and instances.
//!
//! Frames are keyed by local name. Classes, slots and instances live in
//! separate namespaces, so a class and a slot may share a name (a merged
//! bibliography ontology has both a `publisher` class and a `publisher`
//! datatype property). All references inside an ontology are local names
//! that must resolve within the same ontology.
//!
//! Every ontology has an implicit top class, [`TOP_CLASS`]. It is never
//! stored: a class with an empty superclass set is a direct child of it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::datatype::{is_ncname, XsdKind};

pub const TOP_CLASS: &str = "Thing";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown {kind} `{name}` in ontology `{ontology}`")]
    UnknownFrame { kind: FrameKind, name: String, ontology: String },
    #[error("{kind} `{name}` already exists in ontology `{ontology}`")]
    DuplicateFrame { kind: FrameKind, name: String, ontology: String },
    #[error("malformed frame id `{0}` (expected name@ontology)")]
    MalformedId(String),
    #[error("unknown frame kind `{0}`")]
    UnknownKind(String),
}

/// Global frame identity: the owning ontology plus the local name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameId {
    pub ontology: String,
    pub name: String,
}

impl FrameId {
    pub fn new(ontology: impl Into<String>, name: impl Into<String>) -> Self {
        Self { ontology: ontology.into(), name: name.into() }
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.ontology)
    }
}

impl FromStr for FrameId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.rsplit_once('@') {
            Some((name, ontology)) if !name.is_empty() && !ontology.is_empty() => {
                Ok(FrameId::new(ontology, name))
            }
            _ => Err(ModelError::MalformedId(s.to_string())),
        }
    }
}

impl Serialize for FrameId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FrameId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Class,
    Slot,
    Instance,
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameKind::Class => "class",
            FrameKind::Slot => "slot",
            FrameKind::Instance => "instance",
        })
    }
}

impl FromStr for FrameKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "class" => Ok(FrameKind::Class),
            "slot" => Ok(FrameKind::Slot),
            "instance" => Ok(FrameKind::Instance),
            other => Err(ModelError::UnknownKind(other.to_string())),
        }
    }
}

/// A frame id qualified with its kind, written `kind:name@ontology`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameRef {
    pub kind: FrameKind,
    pub id: FrameId,
}

impl FrameRef {
    pub fn new(kind: FrameKind, id: FrameId) -> Self {
        Self { kind, id }
    }

    pub fn class(ontology: &str, name: &str) -> Self {
        Self::new(FrameKind::Class, FrameId::new(ontology, name))
    }

    pub fn slot(ontology: &str, name: &str) -> Self {
        Self::new(FrameKind::Slot, FrameId::new(ontology, name))
    }

    pub fn instance(ontology: &str, name: &str) -> Self {
        Self::new(FrameKind::Instance, FrameId::new(ontology, name))
    }
}

impl fmt::Display for FrameRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.id)
    }
}

impl FromStr for FrameRef {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, id) = s.split_once(':').ok_or_else(|| ModelError::MalformedId(s.to_string()))?;
        Ok(FrameRef::new(kind.parse()?, id.parse()?))
    }
}

impl Serialize for FrameRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FrameRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassFrame {
    /// Direct superclasses. Empty means the class hangs directly under [`TOP_CLASS`].
    pub superclasses: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlotKind {
    ObjectProperty,
    DatatypeProperty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangeSpec {
    Datatype(XsdKind),
    /// An empty class set leaves the range unrestricted.
    Classes(BTreeSet<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotFrame {
    pub domain: BTreeSet<String>,
    pub range: RangeSpec,
    pub min_card: u32,
    /// `None` is unbounded.
    pub max_card: Option<u32>,
}

impl SlotFrame {
    pub fn datatype(domain: impl IntoIterator<Item = String>, kind: XsdKind) -> Self {
        Self { domain: domain.into_iter().collect(), range: RangeSpec::Datatype(kind), min_card: 0, max_card: None }
    }

    pub fn object(domain: impl IntoIterator<Item = String>, range: impl IntoIterator<Item = String>) -> Self {
        Self {
            domain: domain.into_iter().collect(),
            range: RangeSpec::Classes(range.into_iter().collect()),
            min_card: 0,
            max_card: None,
        }
    }

    pub fn with_cardinality(mut self, min: u32, max: Option<u32>) -> Self {
        self.min_card = min;
        self.max_card = max;
        self
    }

    pub fn kind(&self) -> SlotKind {
        match self.range {
            RangeSpec::Datatype(_) => SlotKind::DatatypeProperty,
            RangeSpec::Classes(_) => SlotKind::ObjectProperty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Value {
    Literal { lexical: String, kind: XsdKind },
    /// Reference to an instance of the same ontology.
    Frame(String),
}

impl Value {
    pub fn literal(lexical: impl Into<String>, kind: XsdKind) -> Self {
        Value::Literal { lexical: lexical.into(), kind }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceFrame {
    pub types: BTreeSet<String>,
    /// Slot name to value set. Identical values are stored once.
    pub values: BTreeMap<String, BTreeSet<Value>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ontology {
    pub name: String,
    pub classes: BTreeMap<String, ClassFrame>,
    pub slots: BTreeMap<String, SlotFrame>,
    pub instances: BTreeMap<String, InstanceFrame>,
}

/// A broken well-formedness rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    InvalidName,
    ReservedName,
    UnresolvedReference,
    SubclassCycle,
    CardinalityOrder,
    ZeroMaxCardinality,
    UnattachedSlotValue,
    InvalidLexicalForm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: FrameKind,
    pub frame: String,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} `{}`: {:?}: {}", self.kind, self.frame, self.rule, self.detail)
    }
}

impl Ontology {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Default::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty() && self.slots.is_empty() && self.instances.is_empty()
    }

    pub fn frame_count(&self) -> usize {
        self.classes.len() + self.slots.len() + self.instances.len()
    }

    pub fn contains(&self, kind: FrameKind, name: &str) -> bool {
        match kind {
            FrameKind::Class => self.classes.contains_key(name),
            FrameKind::Slot => self.slots.contains_key(name),
            FrameKind::Instance => self.instances.contains_key(name),
        }
    }

    pub fn names(&self, kind: FrameKind) -> Vec<String> {
        match kind {
            FrameKind::Class => self.classes.keys().cloned().collect(),
            FrameKind::Slot => self.slots.keys().cloned().collect(),
            FrameKind::Instance => self.instances.keys().cloned().collect(),
        }
    }

    pub fn frame_id(&self, name: &str) -> FrameId {
        FrameId::new(&self.name, name)
    }

    fn duplicate(&self, kind: FrameKind, name: &str) -> ModelError {
        ModelError::DuplicateFrame { kind, name: name.to_string(), ontology: self.name.clone() }
    }

    pub(crate) fn unknown(&self, kind: FrameKind, name: &str) -> ModelError {
        ModelError::UnknownFrame { kind, name: name.to_string(), ontology: self.name.clone() }
    }

    pub fn add_class<I, S>(&mut self, name: &str, superclasses: I) -> Result<(), ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if self.classes.contains_key(name) {
            return Err(self.duplicate(FrameKind::Class, name));
        }
        let superclasses = superclasses.into_iter().map(Into::into).filter(|s: &String| s != TOP_CLASS).collect();
        self.classes.insert(name.to_string(), ClassFrame { superclasses });
        Ok(())
    }

    pub fn add_slot(&mut self, name: &str, slot: SlotFrame) -> Result<(), ModelError> {
        if self.slots.contains_key(name) {
            return Err(self.duplicate(FrameKind::Slot, name));
        }
        self.slots.insert(name.to_string(), slot);
        Ok(())
    }

    pub fn add_instance(&mut self, name: &str, instance: InstanceFrame) -> Result<(), ModelError> {
        if self.instances.contains_key(name) {
            return Err(self.duplicate(FrameKind::Instance, name));
        }
        self.instances.insert(name.to_string(), instance);
        Ok(())
    }

    /// Slots whose domain contains `class`.
    pub fn attached_slots(&self, class: &str) -> Vec<&str> {
        self.slots.iter().filter(|(_, s)| s.domain.contains(class)).map(|(n, _)| n.as_str()).collect()
    }

    /// Direct subclasses of `class`, sorted by name.
    pub fn subclasses(&self, class: &str) -> Vec<&str> {
        self.classes
            .iter()
            .filter(|(_, c)| c.superclasses.contains(class))
            .map(|(n, _)| n.as_str())
            .collect()
    }

    /// Transitive superclasses of `class`, breadth-first with each level sorted
    /// by name. The class itself and the implicit top class are excluded.
    pub fn ancestors(&self, class: &str) -> Result<Vec<String>, ModelError> {
        let start = self.classes.get(class).ok_or_else(|| self.unknown(FrameKind::Class, class))?;
        let mut seen: BTreeSet<&str> = BTreeSet::from([class]);
        let mut out = Vec::new();
        let mut level: BTreeSet<&str> = start.superclasses.iter().map(String::as_str).collect();
        while !level.is_empty() {
            let mut next = BTreeSet::new();
            for name in level {
                if !seen.insert(name) {
                    continue;
                }
                out.push(name.to_string());
                if let Some(frame) = self.classes.get(name) {
                    next.extend(frame.superclasses.iter().map(String::as_str));
                }
            }
            level = next.into_iter().filter(|n| !seen.contains(n)).collect();
        }
        Ok(out)
    }

    /// `class` together with its ancestors.
    pub fn lineage(&self, class: &str) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.ancestors(class).unwrap_or_default().into_iter().collect();
        out.insert(class.to_string());
        out
    }

    pub fn is_ancestor(&self, ancestor: &str, class: &str) -> bool {
        self.ancestors(class).map(|a| a.iter().any(|n| n == ancestor)).unwrap_or(false)
    }

    /// Whether `slot` is attached to one of `types` or to one of their ancestors.
    pub fn slot_applies_to(&self, slot: &str, types: &BTreeSet<String>) -> bool {
        let Some(frame) = self.slots.get(slot) else { return false };
        types.iter().any(|t| self.lineage(t).iter().any(|c| frame.domain.contains(c)))
    }

    /// Returns every well-formedness violation. Empty means the ontology is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |kind, frame: &str, rule, detail: String| {
            out.push(Violation { kind, frame: frame.to_string(), rule, detail });
        };

        for kind in [FrameKind::Class, FrameKind::Slot, FrameKind::Instance] {
            for name in self.names(kind) {
                if !is_ncname(&name) {
                    push(kind, &name, Rule::InvalidName, "local name is not an NCName".into());
                }
            }
        }
        if self.classes.contains_key(TOP_CLASS) {
            push(FrameKind::Class, TOP_CLASS, Rule::ReservedName, "the top class is implicit".into());
        }

        for (name, class) in &self.classes {
            for sup in &class.superclasses {
                if !self.classes.contains_key(sup) {
                    push(FrameKind::Class, name, Rule::UnresolvedReference, format!("superclass `{sup}`"));
                }
            }
        }
        for cycle in self.subclass_cycles() {
            let first = cycle[0].clone();
            push(FrameKind::Class, &first, Rule::SubclassCycle, format!("cycle through {}", cycle.join(", ")));
        }

        for (name, slot) in &self.slots {
            for class in &slot.domain {
                if !self.classes.contains_key(class) {
                    push(FrameKind::Slot, name, Rule::UnresolvedReference, format!("domain class `{class}`"));
                }
            }
            if let RangeSpec::Classes(range) = &slot.range {
                for class in range {
                    if !self.classes.contains_key(class) {
                        push(FrameKind::Slot, name, Rule::UnresolvedReference, format!("range class `{class}`"));
                    }
                }
            }
            if slot.max_card == Some(0) {
                push(FrameKind::Slot, name, Rule::ZeroMaxCardinality, "max cardinality must be positive".into());
            }
            if let Some(max) = slot.max_card {
                if slot.min_card > max {
                    push(
                        FrameKind::Slot,
                        name,
                        Rule::CardinalityOrder,
                        format!("min cardinality {} exceeds max {}", slot.min_card, max),
                    );
                }
            }
        }

        for (name, inst) in &self.instances {
            for t in &inst.types {
                if !self.classes.contains_key(t) {
                    push(FrameKind::Instance, name, Rule::UnresolvedReference, format!("type `{t}`"));
                }
            }
            for (slot, values) in &inst.values {
                if !self.slots.contains_key(slot) {
                    push(FrameKind::Instance, name, Rule::UnresolvedReference, format!("slot `{slot}`"));
                } else if !self.slot_applies_to(slot, &inst.types) {
                    push(
                        FrameKind::Instance,
                        name,
                        Rule::UnattachedSlotValue,
                        format!("slot `{slot}` is not attached to any of the instance's types"),
                    );
                }
                for value in values {
                    match value {
                        Value::Frame(target) if !self.instances.contains_key(target) => push(
                            FrameKind::Instance,
                            name,
                            Rule::UnresolvedReference,
                            format!("value `{target}` of slot `{slot}`"),
                        ),
                        Value::Literal { lexical, kind } if !kind.admits(lexical) => push(
                            FrameKind::Instance,
                            name,
                            Rule::InvalidLexicalForm,
                            format!("`{lexical}` is not a valid {kind}"),
                        ),
                        _ => {}
                    }
                }
            }
        }
        out
    }

    /// Strongly connected components of the subclass graph that contain a cycle,
    /// each sorted by name.
    pub fn subclass_cycles(&self) -> Vec<Vec<String>> {
        let mut graph = petgraph::graphmap::DiGraphMap::<&str, ()>::new();
        for (name, class) in &self.classes {
            graph.add_node(name.as_str());
            for sup in &class.superclasses {
                graph.add_edge(name.as_str(), sup.as_str(), ());
            }
        }
        let mut cycles: Vec<Vec<String>> = petgraph::algo::tarjan_scc(&graph)
            .into_iter()
            .filter(|scc| scc.len() > 1 || graph.contains_edge(scc[0], scc[0]))
            .map(|scc| {
                let mut names: Vec<String> = scc.into_iter().map(str::to_string).collect();
                names.sort();
                names
            })
            .collect();
        cycles.sort();
        cycles
    }

    /// Renames a frame and rewrites every reference to it.
    pub fn rename_frame(&mut self, kind: FrameKind, old: &str, new: &str) -> Result<(), ModelError> {
        if !self.contains(kind, old) {
            return Err(self.unknown(kind, old));
        }
        if old == new {
            return Ok(());
        }
        if self.contains(kind, new) {
            return Err(self.duplicate(kind, new));
        }
        match kind {
            FrameKind::Class => {
                let frame = self.classes.remove(old).unwrap();
                self.classes.insert(new.to_string(), frame);
            }
            FrameKind::Slot => {
                let frame = self.slots.remove(old).unwrap();
                self.slots.insert(new.to_string(), frame);
            }
            FrameKind::Instance => {
                let frame = self.instances.remove(old).unwrap();
                self.instances.insert(new.to_string(), frame);
            }
        }
        self.replace_references(kind, &BTreeSet::from([old.to_string()]), new);
        Ok(())
    }

    /// Rewrites every reference to a frame in `from` into a reference to `to`.
    /// Self-superclass edges produced by the rewrite are dropped.
    pub fn replace_references(&mut self, kind: FrameKind, from: &BTreeSet<String>, to: &str) {
        let swap = |set: &mut BTreeSet<String>| {
            let before = set.len();
            set.retain(|n| !from.contains(n));
            if set.len() != before {
                set.insert(to.to_string());
            }
        };
        match kind {
            FrameKind::Class => {
                for (name, class) in self.classes.iter_mut() {
                    swap(&mut class.superclasses);
                    class.superclasses.remove(name);
                }
                for slot in self.slots.values_mut() {
                    swap(&mut slot.domain);
                    if let RangeSpec::Classes(range) = &mut slot.range {
                        swap(range);
                    }
                }
                for inst in self.instances.values_mut() {
                    swap(&mut inst.types);
                }
            }
            FrameKind::Slot => {
                for inst in self.instances.values_mut() {
                    let mut moved = BTreeSet::new();
                    for old in from {
                        if let Some(values) = inst.values.remove(old) {
                            moved.extend(values);
                        }
                    }
                    if !moved.is_empty() {
                        inst.values.entry(to.to_string()).or_default().extend(moved);
                    }
                }
            }
            FrameKind::Instance => {
                for inst in self.instances.values_mut() {
                    for values in inst.values.values_mut() {
                        let hit: Vec<Value> =
                            values.iter().filter(|v| matches!(v, Value::Frame(t) if from.contains(t))).cloned().collect();
                        if !hit.is_empty() {
                            for v in hit {
                                values.remove(&v);
                            }
                            values.insert(Value::Frame(to.to_string()));
                        }
                    }
                }
            }
        }
    }

    /// Removes a frame and every reference to it. Instance values that no
    /// longer apply to their instance are dropped.
    pub fn remove_frame(&mut self, kind: FrameKind, name: &str) -> Result<(), ModelError> {
        if !self.contains(kind, name) {
            return Err(self.unknown(kind, name));
        }
        match kind {
            FrameKind::Class => {
                self.classes.remove(name);
                for class in self.classes.values_mut() {
                    class.superclasses.remove(name);
                }
                for slot in self.slots.values_mut() {
                    slot.domain.remove(name);
                    if let RangeSpec::Classes(range) = &mut slot.range {
                        range.remove(name);
                    }
                }
                for inst in self.instances.values_mut() {
                    inst.types.remove(name);
                }
            }
            FrameKind::Slot => {
                self.slots.remove(name);
                for inst in self.instances.values_mut() {
                    inst.values.remove(name);
                }
            }
            FrameKind::Instance => {
                self.instances.remove(name);
                let gone = Value::Frame(name.to_string());
                for inst in self.instances.values_mut() {
                    for values in inst.values.values_mut() {
                        values.remove(&gone);
                    }
                    inst.values.retain(|_, v| !v.is_empty());
                }
            }
        }
        self.prune_unattached_values();
        Ok(())
    }

    /// Drops instance values whose slot no longer applies to the instance's types.
    pub fn prune_unattached_values(&mut self) {
        let stale: Vec<(String, String)> = self
            .instances
            .iter()
            .flat_map(|(name, inst)| {
                inst.values
                    .keys()
                    .filter(|slot| !self.slot_applies_to(slot, &inst.types))
                    .map(move |slot| (name.clone(), slot.clone()))
            })
            .collect();
        for (inst, slot) in stale {
            if let Some(frame) = self.instances.get_mut(&inst) {
                frame.values.remove(&slot);
            }
        }
    }
}
