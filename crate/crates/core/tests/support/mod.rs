//! Random sources and operation sequences for the property suites.
//!
//! Shared with the acceptance harness through `#[path]`.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ontomerge::engine::{MergeSession, Operation};
use ontomerge::model::InstanceFrame;
use ontomerge::{FrameId, FrameKind, Ontology, RangeSpec, SlotFrame, Value, XsdKind};
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::sample::subsequence;

pub const CLASSES: [&str; 10] = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"];
pub const SLOTS: [&str; 6] = ["p", "q", "r", "s", "t", "u"];
pub const INSTANCES: [&str; 4] = ["w", "x", "y", "z"];
const KINDS: [XsdKind; 5] = [XsdKind::Integer, XsdKind::Decimal, XsdKind::NCName, XsdKind::NmToken, XsdKind::String];

/// Deterministic draws from a fixed pool of random words.
struct Entropy(Vec<u32>, usize);

impl Entropy {
    fn next(&mut self) -> u32 {
        let v = self.0[self.1 % self.0.len()].rotate_left((self.1 / self.0.len()) as u32 * 7);
        self.1 += 1;
        v
    }

    fn below(&mut self, n: usize) -> usize {
        self.next() as usize % n.max(1)
    }

    fn coin(&mut self) -> bool {
        self.next() % 2 == 0
    }
}

pub fn lexical(kind: XsdKind, n: usize) -> String {
    match kind {
        XsdKind::Integer => format!("{n}"),
        XsdKind::Decimal => format!("{n}.5"),
        XsdKind::NCName => format!("v{n}"),
        XsdKind::NmToken => format!("{n}-v"),
        XsdKind::String => format!("value {n}"),
    }
}

fn build(name: &str, classes: &[&str], slots: &[&str], instances: &[&str], words: Vec<u32>) -> Ontology {
    let mut e = Entropy(words, 0);
    let mut o = Ontology::new(name);
    for (i, c) in classes.iter().enumerate() {
        let supers: Vec<&str> = classes[..i].iter().copied().filter(|_| e.below(4) == 0).collect();
        o.add_class(c, supers).unwrap();
    }
    let subset = |e: &mut Entropy, max: usize| -> BTreeSet<String> {
        classes.iter().filter(|_| e.below(3) == 0).take(max).map(|c| c.to_string()).collect()
    };
    for s in slots {
        let domain = subset(&mut e, 3);
        let mut slot = if e.coin() {
            SlotFrame::datatype(domain, KINDS[e.below(KINDS.len())])
        } else {
            let range = subset(&mut e, 2);
            SlotFrame::object(domain, range)
        };
        let min = e.below(2) as u32;
        let max = match e.below(3) {
            0 => None,
            n => Some((n as u32).max(min)),
        };
        slot = slot.with_cardinality(min, max);
        o.add_slot(s, slot).unwrap();
    }
    for inst in instances {
        let mut frame = InstanceFrame::default();
        frame.types = subset(&mut e, 2);
        o.add_instance(inst, frame).unwrap();
    }
    let names: Vec<String> = o.instances.keys().cloned().collect();
    let slot_list: Vec<(String, SlotFrame)> = o.slots.iter().map(|(n, s)| (n.clone(), s.clone())).collect();
    for inst in &names {
        let types = o.instances[inst].types.clone();
        let mut values: BTreeMap<String, BTreeSet<Value>> = BTreeMap::new();
        for (slot, frame) in &slot_list {
            if !o.slot_applies_to(slot, &types) {
                continue;
            }
            for _ in 0..e.below(3) {
                let v = match frame.range {
                    RangeSpec::Datatype(kind) => Value::literal(lexical(kind, e.below(3)), kind),
                    RangeSpec::Classes(_) => Value::Frame(names[e.below(names.len())].clone()),
                };
                values.entry(slot.clone()).or_default().insert(v);
            }
        }
        o.instances.get_mut(inst).unwrap().values = values;
    }
    assert!(o.validate().is_empty(), "generator built an ill-formed ontology: {:?}", o.validate());
    o
}

/// One source ontology named `name` with at most eight classes.
pub fn source(name: &'static str, with_instances: bool) -> impl Strategy<Value = Ontology> {
    let max_instances = if with_instances { 3 } else { 0 };
    (
        subsequence(CLASSES.to_vec(), 1..=8),
        subsequence(SLOTS.to_vec(), 0..=4),
        subsequence(INSTANCES.to_vec(), 0..=max_instances),
        vec(any::<u32>(), 64),
    )
        .prop_map(move |(c, s, i, words)| build(name, &c, &s, &i, words))
}

pub fn sources(with_instances: bool) -> impl Strategy<Value = Vec<Ontology>> {
    (source("S0", with_instances), source("S1", with_instances)).prop_map(|(a, b)| vec![a, b])
}

/// A frame argument chosen relative to the session state when the
/// operation is realized.
#[derive(Debug, Clone, Copy)]
pub enum Arg {
    Source(u8, u8),
    Merged(u8),
    Missing,
}

#[derive(Debug, Clone)]
pub enum OpSeed {
    MergeClasses(Arg, Arg, Option<u8>),
    MergeSlots(Arg, Arg, Option<u8>),
    MergeInstances(Arg, Arg, bool),
    ShallowCopy(Arg),
    DeepCopy(Arg),
    CopySlot(Arg),
    CreateClass(u8, Vec<u8>),
    AddSuperclass(u8, u8),
    RemoveSuperclass(u8, u8),
    Rename(u8, u8, u8),
    Remove(u8, u8),
    SetRange(u8, u8, Vec<u8>),
    RemoveValue(u8, u8, u8),
}

fn arg() -> impl Strategy<Value = Arg> {
    prop_oneof![
        6 => (0u8..2, any::<u8>()).prop_map(|(s, i)| Arg::Source(s, i)),
        3 => any::<u8>().prop_map(Arg::Merged),
        1 => Just(Arg::Missing),
    ]
}

pub fn op_seed() -> impl Strategy<Value = OpSeed> {
    prop_oneof![
        4 => (arg(), arg(), proptest::option::weighted(0.3, any::<u8>())).prop_map(|(a, b, n)| OpSeed::MergeClasses(a, b, n)),
        3 => (arg(), arg(), proptest::option::weighted(0.3, any::<u8>())).prop_map(|(a, b, n)| OpSeed::MergeSlots(a, b, n)),
        2 => (arg(), arg(), any::<bool>()).prop_map(|(a, b, c)| OpSeed::MergeInstances(a, b, c)),
        3 => arg().prop_map(OpSeed::ShallowCopy),
        2 => arg().prop_map(OpSeed::DeepCopy),
        2 => arg().prop_map(OpSeed::CopySlot),
        1 => (any::<u8>(), vec(any::<u8>(), 0..3)).prop_map(|(n, s)| OpSeed::CreateClass(n, s)),
        2 => (any::<u8>(), any::<u8>()).prop_map(|(a, b)| OpSeed::AddSuperclass(a, b)),
        1 => (any::<u8>(), any::<u8>()).prop_map(|(a, b)| OpSeed::RemoveSuperclass(a, b)),
        1 => (any::<u8>(), any::<u8>(), any::<u8>()).prop_map(|(k, f, n)| OpSeed::Rename(k, f, n)),
        1 => (any::<u8>(), any::<u8>()).prop_map(|(k, f)| OpSeed::Remove(k, f)),
        1 => (any::<u8>(), any::<u8>(), vec(any::<u8>(), 0..3)).prop_map(|(s, k, c)| OpSeed::SetRange(s, k, c)),
        1 => (any::<u8>(), any::<u8>(), any::<u8>()).prop_map(|(i, s, v)| OpSeed::RemoveValue(i, s, v)),
    ]
}

fn pick<T: Clone>(items: &[T], i: u8) -> Option<T> {
    (!items.is_empty()).then(|| items[i as usize % items.len()].clone())
}

const FRESH: [&str; 4] = ["m0", "m1", "Thing", "bad name"];

fn name_for(session: &MergeSession, kind: FrameKind, i: u8) -> String {
    let mut pool: Vec<String> = FRESH.iter().map(|s| s.to_string()).collect();
    pool.extend(session.merged().names(kind));
    pick(&pool, i).unwrap()
}

fn realize_arg(session: &MergeSession, kind: FrameKind, arg: Arg) -> Option<FrameId> {
    match arg {
        Arg::Source(s, i) => {
            let src = &session.sources()[s as usize % session.sources().len()];
            pick(&src.names(kind), i).map(|n| FrameId::new(&src.name, n))
        }
        Arg::Merged(i) => pick(&session.merged().names(kind), i).map(|n| FrameId::new(session.merged_name(), n)),
        Arg::Missing => Some(FrameId::new(&session.sources()[0].name, "missing")),
    }
}

fn merged(session: &MergeSession, kind: FrameKind, i: u8) -> Option<String> {
    pick(&session.merged().names(kind), i)
}

const FRAME_KINDS: [FrameKind; 3] = [FrameKind::Class, FrameKind::Slot, FrameKind::Instance];

/// Turns a seed into a concrete operation against the current state.
/// `None` when the state offers nothing to pick from.
pub fn realize(session: &MergeSession, seed: &OpSeed) -> Option<Operation> {
    use FrameKind::*;
    Some(match seed {
        OpSeed::MergeClasses(a, b, n) => Operation::MergeClasses {
            a: realize_arg(session, Class, *a)?,
            b: realize_arg(session, Class, *b)?,
            name: n.map(|n| name_for(session, Class, n)),
        },
        OpSeed::MergeSlots(a, b, n) => Operation::MergeSlots {
            a: realize_arg(session, Slot, *a)?,
            b: realize_arg(session, Slot, *b)?,
            name: n.map(|n| name_for(session, Slot, n)),
        },
        OpSeed::MergeInstances(a, b, confirm) => Operation::MergeInstances {
            a: realize_arg(session, Instance, *a)?,
            b: realize_arg(session, Instance, *b)?,
            name: None,
            confirm: *confirm,
        },
        OpSeed::ShallowCopy(a) => Operation::ShallowCopy { class: realize_arg(session, Class, *a)? },
        OpSeed::DeepCopy(a) => Operation::DeepCopy { class: realize_arg(session, Class, *a)? },
        OpSeed::CopySlot(a) => Operation::CopySlot { slot: realize_arg(session, Slot, *a)? },
        OpSeed::CreateClass(n, supers) => Operation::CreateClass {
            name: name_for(session, Class, *n),
            superclasses: supers.iter().filter_map(|s| merged(session, Class, *s)).collect(),
        },
        OpSeed::AddSuperclass(c, s) => {
            Operation::AddSuperclass { class: merged(session, Class, *c)?, superclass: merged(session, Class, *s)? }
        }
        OpSeed::RemoveSuperclass(c, s) => {
            let (name, class) = pick(&session.merged().classes.iter().collect::<Vec<_>>(), *c)?;
            let sup = pick(&class.superclasses.iter().cloned().collect::<Vec<_>>(), *s)?;
            Operation::RemoveSuperclass { class: name.clone(), superclass: sup }
        }
        OpSeed::Rename(k, f, n) => {
            let kind = FRAME_KINDS[*k as usize % 3];
            Operation::RenameFrame { kind, frame: merged(session, kind, *f)?, name: name_for(session, kind, *n) }
        }
        OpSeed::Remove(k, f) => {
            let kind = FRAME_KINDS[*k as usize % 3];
            Operation::RemoveFrame { kind, frame: merged(session, kind, *f)? }
        }
        OpSeed::SetRange(s, k, classes) => {
            let slot = merged(session, Slot, *s)?;
            let range = if *k as usize % 6 < 5 {
                RangeSpec::Datatype(KINDS[*k as usize % 5])
            } else {
                RangeSpec::Classes(classes.iter().filter_map(|c| merged(session, Class, *c)).collect())
            };
            Operation::SetSlotRange { slot, range }
        }
        OpSeed::RemoveValue(i, s, v) => {
            let (name, inst) = pick(&session.merged().instances.iter().collect::<Vec<_>>(), *i)?;
            let (slot, values) = pick(&inst.values.iter().collect::<Vec<_>>(), *s)?;
            let value = pick(&values.iter().cloned().collect::<Vec<_>>(), *v)?;
            Operation::RemoveValue { instance: name.clone(), slot: slot.clone(), value }
        }
    })
}

/// Violations of the session invariants, empty when all hold: the merged
/// ontology is well-formed and every merged frame is either an explicit
/// creation or the image of some source frame, and every image exists.
pub fn invariant_violations(session: &MergeSession) -> Vec<String> {
    let mut out: Vec<String> = session.merged().validate().iter().map(|v| v.to_string()).collect();
    for kind in FRAME_KINDS {
        for name in session.merged().names(kind) {
            if !session.is_created(kind, &name) && session.preimages(kind, &name).is_empty() {
                out.push(format!("{kind} `{name}` has no preimage and was not created"));
            }
        }
    }
    for (src, image) in session.images() {
        if !session.merged().contains(src.kind, image) {
            out.push(format!("image `{image}` of {src} does not exist"));
        }
    }
    for (kind, name) in session.created() {
        if !session.merged().contains(*kind, name) {
            out.push(format!("created {kind} `{name}` does not exist"));
        }
    }
    out
}
