use std::collections::{BTreeMap, BTreeSet};

use super::session::{FollowUp, FollowUpKind, RangeCandidate, State};
use super::{EngineError, Operation, SessionConfig, SuffixPolicy};
use crate::datatype::{is_ncname, XsdKind};
use crate::model::{ClassFrame, FrameId, FrameKind, FrameRef, InstanceFrame, RangeSpec, SlotFrame, Value, TOP_CLASS};

/// A resolved operation argument.
#[derive(Debug, Clone)]
enum Arg {
    Source { src: usize, name: String, image: Option<String> },
    Merged(String),
}

impl Arg {
    /// The merged frame the argument stands for, if any.
    fn current(&self) -> Option<&str> {
        match self {
            Arg::Source { image, .. } => image.as_deref(),
            Arg::Merged(name) => Some(name),
        }
    }

    fn name(&self) -> &str {
        match self {
            Arg::Source { name, .. } | Arg::Merged(name) => name,
        }
    }
}

pub(super) struct Apply<'a> {
    sources: &'a [crate::Ontology],
    config: &'a SessionConfig,
    preferred: Option<&'a str>,
    st: State,
    follow_ups: Vec<FollowUp>,
}

impl<'a> Apply<'a> {
    pub fn new(sources: &'a [crate::Ontology], config: &'a SessionConfig, preferred: Option<&'a str>, st: State) -> Self {
        Self { sources, config, preferred, st, follow_ups: Vec::new() }
    }

    pub fn run(&mut self, op: &Operation) -> Result<Option<FrameRef>, EngineError> {
        let merged = |kind, name: String| Some(FrameRef::new(kind, FrameId::new(&self.config.merged_name, name)));
        Ok(match op {
            Operation::MergeClasses { a, b, name } => merged(FrameKind::Class, self.merge_classes(a, b, name.as_deref())?),
            Operation::MergeSlots { a, b, name } => merged(FrameKind::Slot, self.merge_slots(a, b, name.as_deref())?),
            Operation::MergeInstances { a, b, name, confirm } => {
                merged(FrameKind::Instance, self.merge_instances(a, b, name.as_deref(), *confirm)?)
            }
            Operation::ShallowCopy { class } => merged(FrameKind::Class, self.copy_class(class, false)?),
            Operation::DeepCopy { class } => merged(FrameKind::Class, self.copy_class(class, true)?),
            Operation::CopySlot { slot } => {
                let (src, name) = self.unimaged_source(FrameKind::Slot, slot)?;
                merged(FrameKind::Slot, self.copy_slot(src, &name))
            }
            Operation::CreateClass { name, superclasses } => {
                self.create_class(name, superclasses)?;
                merged(FrameKind::Class, name.clone())
            }
            Operation::AddSuperclass { class, superclass } => {
                self.add_superclass(class, superclass)?;
                merged(FrameKind::Class, class.clone())
            }
            Operation::RemoveSuperclass { class, superclass } => {
                self.merged_frame(FrameKind::Class, class)?;
                if !self.st.merged.classes.get_mut(class).unwrap().superclasses.remove(superclass) {
                    return Err(EngineError::UnknownEdge { class: class.clone(), superclass: superclass.clone() });
                }
                self.st.merged.prune_unattached_values();
                merged(FrameKind::Class, class.clone())
            }
            Operation::RenameFrame { kind, frame, name } => {
                self.rename(*kind, frame, name)?;
                merged(*kind, name.clone())
            }
            Operation::RemoveFrame { kind, frame } => {
                self.remove(*kind, frame)?;
                None
            }
            Operation::SetSlotRange { slot, range } => {
                self.set_range(slot, range)?;
                merged(FrameKind::Slot, slot.clone())
            }
            Operation::RemoveValue { instance, slot, value } => {
                self.remove_value(instance, slot, value)?;
                merged(FrameKind::Instance, instance.clone())
            }
        })
    }

    /// Checks the result and hands back the new state.
    pub fn finish(self) -> Result<(State, Vec<FollowUp>), EngineError> {
        if let Some(cycle) = self.st.merged.subclass_cycles().into_iter().next() {
            return Err(EngineError::Cycle(cycle));
        }
        let violations = self.st.merged.validate();
        if !violations.is_empty() {
            return Err(EngineError::Invalid(violations));
        }
        Ok((self.st, self.follow_ups))
    }

    // ---- resolution and naming ----

    fn merged_id(&self, name: &str) -> FrameId {
        FrameId::new(&self.config.merged_name, name)
    }

    fn source_index(&self, name: &str) -> Option<usize> {
        self.sources.iter().position(|s| s.name == name)
    }

    fn resolve(&self, kind: FrameKind, id: &FrameId) -> Result<Arg, EngineError> {
        let unknown = || EngineError::UnknownFrame(FrameRef::new(kind, id.clone()));
        if id.ontology == self.config.merged_name {
            return if self.st.merged.contains(kind, &id.name) { Ok(Arg::Merged(id.name.clone())) } else { Err(unknown()) };
        }
        let src = self.source_index(&id.ontology).ok_or_else(unknown)?;
        if !self.sources[src].contains(kind, &id.name) {
            return Err(unknown());
        }
        let image = self.st.images.get(&FrameRef::new(kind, id.clone())).cloned();
        Ok(Arg::Source { src, name: id.name.clone(), image })
    }

    fn merged_frame(&self, kind: FrameKind, name: &str) -> Result<(), EngineError> {
        if self.st.merged.contains(kind, name) {
            Ok(())
        } else {
            Err(EngineError::UnknownFrame(FrameRef::new(kind, self.merged_id(name))))
        }
    }

    fn unimaged_source(&self, kind: FrameKind, id: &FrameId) -> Result<(usize, String), EngineError> {
        match self.resolve(kind, id)? {
            Arg::Merged(_) => Err(EngineError::NotASourceFrame(FrameRef::new(kind, id.clone()))),
            Arg::Source { image: Some(image), .. } => {
                Err(EngineError::AlreadyImaged { frame: FrameRef::new(kind, id.clone()), image })
            }
            Arg::Source { src, name, image: None } => Ok((src, name)),
        }
    }

    fn image(&self, kind: FrameKind, src: usize, name: &str) -> Option<String> {
        self.st.images.get(&FrameRef::new(kind, FrameId::new(&self.sources[src].name, name))).cloned()
    }

    fn set_image(&mut self, kind: FrameKind, src: usize, name: &str, image: &str) {
        self.st.images.insert(FrameRef::new(kind, FrameId::new(&self.sources[src].name, name)), image.to_string());
    }

    fn taken(&self, kind: FrameKind, name: &str, exclude: &BTreeSet<String>) -> bool {
        (kind == FrameKind::Class && name == TOP_CLASS) || (self.st.merged.contains(kind, name) && !exclude.contains(name))
    }

    /// A free name derived from `base`: `base`, then `base_<source>`, then
    /// numbered variants.
    fn free_name(&self, kind: FrameKind, base: &str, source: Option<&str>, always_suffix: bool, exclude: &BTreeSet<String>) -> String {
        let suffixed = source.map(|s| format!("{base}_{s}"));
        let first = match (&suffixed, always_suffix) {
            (Some(s), true) => s.clone(),
            _ => base.to_string(),
        };
        if !self.taken(kind, &first, exclude) {
            return first;
        }
        let stem = match suffixed {
            Some(s) if !self.taken(kind, &s, exclude) => return s,
            Some(s) => s,
            None => first,
        };
        (2..).map(|n| format!("{stem}_{n}")).find(|n| !self.taken(kind, n, exclude)).unwrap()
    }

    fn check_new_name(&self, kind: FrameKind, name: &str, exclude: &BTreeSet<String>) -> Result<(), EngineError> {
        if !is_ncname(name) || (kind == FrameKind::Class && name == TOP_CLASS) {
            return Err(EngineError::InvalidName(name.to_string()));
        }
        if self.taken(kind, name, exclude) {
            return Err(EngineError::NameCollision { kind, name: name.to_string() });
        }
        Ok(())
    }

    /// Name for a merge result: explicit, shared, or the first argument's.
    fn merge_name(
        &self,
        kind: FrameKind,
        a: (&FrameId, &Arg),
        b: (&FrameId, &Arg),
        explicit: Option<&str>,
        replaced: &BTreeSet<String>,
    ) -> Result<String, EngineError> {
        if let Some(name) = explicit {
            self.check_new_name(kind, name, replaced)?;
            return Ok(name.to_string());
        }
        // a shared name is the first argument's name too
        let base = a.1.name();
        let source = [a, b].into_iter().find(|(_, arg)| matches!(arg, Arg::Source { .. })).map(|(id, _)| id.ontology.as_str());
        Ok(self.free_name(kind, base, source, false, replaced))
    }

    fn copy_name(&self, kind: FrameKind, src: usize, name: &str) -> String {
        let always = self.config.suffix_policy == SuffixPolicy::AlwaysSuffix;
        self.free_name(kind, name, Some(&self.sources[src].name), always, &BTreeSet::new())
    }

    fn redirect_images(&mut self, kind: FrameKind, from: &BTreeSet<String>, to: &str) {
        for (r, v) in self.st.images.iter_mut() {
            if r.kind == kind && from.contains(v) {
                *v = to.to_string();
            }
        }
    }

    /// Removes the replaced merged frames' bookkeeping and reports whether any was an explicit creation.
    fn retire(&mut self, kind: FrameKind, replaced: &BTreeSet<String>) -> bool {
        let mut created = false;
        for r in replaced {
            created |= self.st.created.remove(&(kind, r.clone()));
        }
        created
    }

    fn origins(&self, kind: FrameKind, id: &FrameId) -> BTreeSet<String> {
        let current = if id.ontology == self.config.merged_name {
            Some(id.name.clone())
        } else {
            self.st.images.get(&FrameRef::new(kind, id.clone())).cloned()
        };
        match current {
            Some(name) => {
                let mut out: BTreeSet<String> = self
                    .st
                    .images
                    .iter()
                    .filter(|(r, v)| r.kind == kind && **v == name)
                    .map(|(r, _)| r.id.ontology.clone())
                    .collect();
                if self.st.created.contains(&(kind, name)) {
                    out.insert(self.config.merged_name.clone());
                }
                out
            }
            None => BTreeSet::from([id.ontology.clone()]),
        }
    }

    // ---- classes ----

    fn merge_classes(&mut self, a: &FrameId, b: &FrameId, name: Option<&str>) -> Result<String, EngineError> {
        let (ra, rb) = (self.resolve(FrameKind::Class, a)?, self.resolve(FrameKind::Class, b)?);
        if a == b || (ra.current().is_some() && ra.current() == rb.current()) {
            return Err(EngineError::SameFrame(FrameRef::new(FrameKind::Class, b.clone())));
        }
        let replaced: BTreeSet<String> = [ra.current(), rb.current()].into_iter().flatten().map(str::to_string).collect();
        let new = self.merge_name(FrameKind::Class, (a, &ra), (b, &rb), name, &replaced)?;
        self.merge_class_frames(&replaced, &new);
        for arg in [&ra, &rb] {
            if let Arg::Source { src, name, .. } = arg {
                self.set_image(FrameKind::Class, *src, name, &new);
            }
        }
        // Source load order, not argument order, decides which copy of a
        // shared slot name keeps the plain name.
        let mut backfill: Vec<(usize, &str)> = [&ra, &rb]
            .into_iter()
            .filter_map(|arg| match arg {
                Arg::Source { src, name, .. } => Some((*src, name.as_str())),
                Arg::Merged(_) => None,
            })
            .collect();
        backfill.sort();
        for (src, name) in backfill {
            self.backfill_class(src, name, &new);
        }
        self.st.merged.prune_unattached_values();
        Ok(new)
    }

    /// Replaces the merged classes `replaced` by one class `new` that keeps their superclasses.
    fn merge_class_frames(&mut self, replaced: &BTreeSet<String>, new: &str) {
        let mut superclasses = BTreeSet::new();
        for r in replaced {
            if let Some(frame) = self.st.merged.classes.remove(r) {
                superclasses.extend(frame.superclasses);
            }
        }
        superclasses.retain(|s| !replaced.contains(s) && s != new);
        let created = self.retire(FrameKind::Class, replaced);
        self.st.merged.classes.insert(new.to_string(), ClassFrame { superclasses });
        self.st.merged.replace_references(FrameKind::Class, replaced, new);
        self.redirect_images(FrameKind::Class, replaced, new);
        if created {
            self.st.created.insert((FrameKind::Class, new.to_string()));
        }
    }

    /// Links the image `image` of source class `class` to the images of its
    /// neighbours and copies its unimaged attached slots.
    fn backfill_class(&mut self, src: usize, class: &str, image: &str) {
        let sources = self.sources;
        let source = &sources[src];
        let frame = &source.classes[class];
        for sup in &frame.superclasses {
            if let Some(si) = self.image(FrameKind::Class, src, sup).filter(|si| si != image) {
                self.st.merged.classes.get_mut(image).unwrap().superclasses.insert(si);
            }
        }
        for sub in source.subclasses(class) {
            if let Some(si) = self.image(FrameKind::Class, src, sub).filter(|si| si != image) {
                self.st.merged.classes.get_mut(&si).unwrap().superclasses.insert(image.to_string());
            }
        }
        for slot in source.attached_slots(class) {
            let si = match self.image(FrameKind::Slot, src, slot) {
                Some(si) => si,
                None => self.copy_slot(src, slot),
            };
            self.st.merged.slots.get_mut(&si).unwrap().domain.insert(image.to_string());
        }
        for (slot, frame) in &source.slots {
            let RangeSpec::Classes(range) = &frame.range else { continue };
            if !range.contains(class) {
                continue;
            }
            if let Some(si) = self.image(FrameKind::Slot, src, slot) {
                if let RangeSpec::Classes(r) = &mut self.st.merged.slots.get_mut(&si).unwrap().range {
                    r.insert(image.to_string());
                }
            }
        }
        for inst in source.instances.iter().filter(|(_, i)| i.types.contains(class)).map(|(n, _)| n) {
            if let Some(ii) = self.image(FrameKind::Instance, src, inst) {
                self.st.merged.instances.get_mut(&ii).unwrap().types.insert(image.to_string());
            }
        }
    }

    fn copy_class(&mut self, class: &FrameId, deep: bool) -> Result<String, EngineError> {
        let (src, name) = self.unimaged_source(FrameKind::Class, class)?;
        Ok(self.copy_source_class(src, &name, deep))
    }

    fn copy_source_class(&mut self, src: usize, class: &str, deep: bool) -> String {
        let new = self.copy_name(FrameKind::Class, src, class);
        self.st.merged.classes.insert(new.clone(), ClassFrame::default());
        self.set_image(FrameKind::Class, src, class, &new);
        self.backfill_class(src, class, &new);
        if deep {
            let supers: Vec<String> = self.sources[src].classes[class].superclasses.iter().cloned().collect();
            for sup in supers {
                if self.image(FrameKind::Class, src, &sup).is_none() {
                    self.copy_source_class(src, &sup, true);
                }
            }
        }
        new
    }

    fn create_class(&mut self, name: &str, superclasses: &BTreeSet<String>) -> Result<(), EngineError> {
        self.check_new_name(FrameKind::Class, name, &BTreeSet::new())?;
        let superclasses: BTreeSet<String> = superclasses.iter().filter(|s| *s != TOP_CLASS).cloned().collect();
        for sup in &superclasses {
            self.merged_frame(FrameKind::Class, sup)?;
        }
        self.st.merged.classes.insert(name.to_string(), ClassFrame { superclasses });
        self.st.created.insert((FrameKind::Class, name.to_string()));
        Ok(())
    }

    fn add_superclass(&mut self, class: &str, superclass: &str) -> Result<(), EngineError> {
        self.merged_frame(FrameKind::Class, class)?;
        if superclass == TOP_CLASS {
            return Ok(());
        }
        self.merged_frame(FrameKind::Class, superclass)?;
        if class == superclass {
            return Err(EngineError::Cycle(vec![class.to_string()]));
        }
        self.st.merged.classes.get_mut(class).unwrap().superclasses.insert(superclass.to_string());
        Ok(())
    }

    // ---- slots ----

    fn copy_slot(&mut self, src: usize, slot: &str) -> String {
        let sources = self.sources;
        let frame = &sources[src].slots[slot];
        let domain = frame.domain.iter().filter_map(|c| self.image(FrameKind::Class, src, c)).collect();
        let range = match &frame.range {
            RangeSpec::Datatype(kind) => RangeSpec::Datatype(*kind),
            RangeSpec::Classes(classes) => {
                RangeSpec::Classes(classes.iter().filter_map(|c| self.image(FrameKind::Class, src, c)).collect())
            }
        };
        let new = self.copy_name(FrameKind::Slot, src, slot);
        let copy = SlotFrame { domain, range, min_card: frame.min_card, max_card: frame.max_card };
        self.st.merged.slots.insert(new.clone(), copy);
        self.set_image(FrameKind::Slot, src, slot, &new);
        new
    }

    /// The slot frame an argument stands for.
    fn slot_frame(&self, arg: &Arg) -> SlotFrame {
        match arg.current() {
            Some(m) => self.st.merged.slots[m].clone(),
            None => {
                let Arg::Source { src, name, .. } = arg else { unreachable!() };
                self.sources[*src].slots[name].clone()
            }
        }
    }

    /// Classes in the domain (or range) of a slot argument, as the frames
    /// they currently stand for: merged images where they exist, source
    /// classes otherwise.
    fn effective_classes(&self, arg: &Arg, range: bool) -> Vec<FrameId> {
        let pick = |frame: &SlotFrame| -> BTreeSet<String> {
            if range {
                match &frame.range {
                    RangeSpec::Classes(c) => c.clone(),
                    RangeSpec::Datatype(_) => BTreeSet::new(),
                }
            } else {
                frame.domain.clone()
            }
        };
        match (arg.current(), arg) {
            (Some(m), _) => pick(&self.st.merged.slots[m]).iter().map(|c| self.merged_id(c)).collect(),
            (None, Arg::Source { src, name, .. }) => pick(&self.sources[*src].slots[name])
                .iter()
                .map(|c| match self.image(FrameKind::Class, *src, c) {
                    Some(image) => self.merged_id(&image),
                    None => FrameId::new(&self.sources[*src].name, c),
                })
                .collect(),
            (None, Arg::Merged(_)) => unreachable!(),
        }
    }

    fn range_candidates(&self, id: &FrameId, arg: &Arg, frame: &SlotFrame) -> Vec<RangeCandidate> {
        let RangeSpec::Datatype(kind) = frame.range else { return vec![] };
        if let Some(m) = arg.current() {
            if let Some(pending) = self.st.pending.get(m) {
                return pending.clone();
            }
        }
        self.origins(FrameKind::Slot, id).into_iter().map(|origin| RangeCandidate { origin, kind }).collect()
    }

    fn merge_slots(&mut self, a: &FrameId, b: &FrameId, name: Option<&str>) -> Result<String, EngineError> {
        let (ra, rb) = (self.resolve(FrameKind::Slot, a)?, self.resolve(FrameKind::Slot, b)?);
        if a == b || (ra.current().is_some() && ra.current() == rb.current()) {
            return Err(EngineError::SameFrame(FrameRef::new(FrameKind::Slot, b.clone())));
        }
        let (fa, fb) = (self.slot_frame(&ra), self.slot_frame(&rb));
        if fa.kind() != fb.kind() {
            return Err(EngineError::KindMismatch {
                a: FrameRef::new(FrameKind::Slot, a.clone()),
                b: FrameRef::new(FrameKind::Slot, b.clone()),
            });
        }
        let replaced: BTreeSet<String> = [ra.current(), rb.current()].into_iter().flatten().map(str::to_string).collect();
        let new = self.merge_name(FrameKind::Slot, (a, &ra), (b, &rb), name, &replaced)?;

        let (dom_a, dom_b) = (self.effective_classes(&ra, false), self.effective_classes(&rb, false));
        let (ran_a, ran_b) = (self.effective_classes(&ra, true), self.effective_classes(&rb, true));
        let in_merged = |ids: &[FrameId]| -> BTreeSet<String> {
            ids.iter().filter(|id| id.ontology == self.config.merged_name).map(|id| id.name.clone()).collect()
        };
        let domain: BTreeSet<String> = in_merged(&dom_a).into_iter().chain(in_merged(&dom_b)).collect();

        let mut pending = None;
        let range = match fa.range {
            RangeSpec::Classes(_) => RangeSpec::Classes(in_merged(&ran_a).into_iter().chain(in_merged(&ran_b)).collect()),
            RangeSpec::Datatype(kind_a) => {
                let mut candidates = self.range_candidates(a, &ra, &fa);
                candidates.extend(self.range_candidates(b, &rb, &fb));
                candidates.sort();
                candidates.dedup();
                let kinds: BTreeSet<XsdKind> = candidates.iter().map(|c| c.kind).collect();
                if kinds.len() <= 1 {
                    RangeSpec::Datatype(kinds.into_iter().next().unwrap_or(kind_a))
                } else {
                    let preferred: BTreeSet<XsdKind> = candidates
                        .iter()
                        .filter(|c| Some(c.origin.as_str()) == self.preferred)
                        .map(|c| c.kind)
                        .collect();
                    if preferred.len() == 1 {
                        RangeSpec::Datatype(preferred.into_iter().next().unwrap())
                    } else {
                        pending = Some(candidates);
                        RangeSpec::Datatype(kind_a)
                    }
                }
            }
        };
        let min_card = fa.min_card.min(fb.min_card);
        let max_card = fa.max_card.zip(fb.max_card).map(|(x, y)| x.max(y));

        for r in &replaced {
            self.st.merged.slots.remove(r);
            self.st.pending.remove(r);
        }
        self.retire(FrameKind::Slot, &replaced);
        self.st.merged.slots.insert(new.clone(), SlotFrame { domain, range, min_card, max_card });
        self.st.merged.replace_references(FrameKind::Slot, &replaced, &new);
        self.redirect_images(FrameKind::Slot, &replaced, &new);
        for arg in [&ra, &rb] {
            if let Arg::Source { src, name, .. } = arg {
                self.set_image(FrameKind::Slot, *src, name, &new);
            }
        }
        if let Some(candidates) = pending {
            self.st.pending.insert(new.clone(), candidates);
        }

        for (xs, ys, what) in [(&dom_a, &dom_b, "domain"), (&ran_a, &ran_b, "range")] {
            for x in xs {
                for y in ys {
                    if x == y || !self.origins(FrameKind::Class, x).is_disjoint(&self.origins(FrameKind::Class, y)) {
                        continue;
                    }
                    self.follow_ups.push(FollowUp {
                        kind: FollowUpKind::SlotMerge,
                        operation: Operation::MergeClasses { a: x.clone(), b: y.clone(), name: None },
                        reason: format!("`{x}` and `{y}` are both in the {what} of merged slot `{new}`"),
                        frames: vec![x.clone(), y.clone(), self.merged_id(&new)],
                    });
                }
            }
        }
        self.st.merged.prune_unattached_values();
        Ok(new)
    }

    fn set_range(&mut self, slot: &str, range: &RangeSpec) -> Result<(), EngineError> {
        self.merged_frame(FrameKind::Slot, slot)?;
        if let RangeSpec::Classes(classes) = range {
            for c in classes {
                self.merged_frame(FrameKind::Class, c)?;
            }
        }
        self.st.merged.slots.get_mut(slot).unwrap().range = range.clone();
        self.st.pending.remove(slot);
        Ok(())
    }

    // ---- instances ----

    fn merge_instances(&mut self, a: &FrameId, b: &FrameId, name: Option<&str>, confirm: bool) -> Result<String, EngineError> {
        let (ra, rb) = (self.resolve(FrameKind::Instance, a)?, self.resolve(FrameKind::Instance, b)?);
        if a == b || (ra.current().is_some() && ra.current() == rb.current()) {
            return Err(EngineError::SameFrame(FrameRef::new(FrameKind::Instance, b.clone())));
        }
        let replaced: BTreeSet<String> = [ra.current(), rb.current()].into_iter().flatten().map(str::to_string).collect();
        let new = self.merge_name(FrameKind::Instance, (a, &ra), (b, &rb), name, &replaced)?;

        let (ta, tb) = (self.type_images(&ra), self.type_images(&rb));
        let mut types: BTreeSet<String> = ta.union(&tb).cloned().collect();
        if !ta.is_empty() && !tb.is_empty() && ta.is_disjoint(&tb) {
            let (x, y) = (ta.first().unwrap().clone(), tb.first().unwrap().clone());
            if !confirm {
                return Err(EngineError::ConfirmationRequired { a: x, b: y });
            }
            let merged = self.merge_classes(&self.merged_id(&x), &self.merged_id(&y), None)?;
            types.remove(&x);
            types.remove(&y);
            types.insert(merged);
        }

        let mut values: BTreeMap<String, BTreeSet<Value>> = BTreeMap::new();
        for arg in [&ra, &rb] {
            match arg.current() {
                Some(m) => {
                    for (slot, vs) in &self.st.merged.instances[m].values {
                        values.entry(slot.clone()).or_default().extend(vs.iter().cloned());
                    }
                }
                None => {
                    let Arg::Source { src, name, .. } = arg else { unreachable!() };
                    let sources = self.sources;
                    let inst = &sources[*src].instances[name];
                    for (slot, vs) in &inst.values {
                        let si = match self.image(FrameKind::Slot, *src, slot) {
                            Some(si) => si,
                            None => self.copy_slot(*src, slot),
                        };
                        let target = values.entry(si).or_default();
                        for v in vs {
                            match v {
                                Value::Literal { .. } => {
                                    target.insert(v.clone());
                                }
                                Value::Frame(f) => {
                                    if let Some(image) = self.image(FrameKind::Instance, *src, f) {
                                        target.insert(Value::Frame(image));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        values.retain(|_, vs| !vs.is_empty());

        for r in &replaced {
            self.st.merged.instances.remove(r);
        }
        self.retire(FrameKind::Instance, &replaced);
        self.st.merged.instances.insert(new.clone(), InstanceFrame { types: types.clone(), values });
        self.st.merged.replace_references(FrameKind::Instance, &replaced, &new);
        self.redirect_images(FrameKind::Instance, &replaced, &new);
        for arg in [&ra, &rb] {
            if let Arg::Source { src, name, .. } = arg {
                self.set_image(FrameKind::Instance, *src, name, &new);
            }
        }

        let slots: Vec<String> = self.st.merged.instances[&new].values.keys().cloned().collect();
        for slot in &slots {
            if !self.st.merged.slot_applies_to(slot, &types) {
                if let Some(t) = types.first() {
                    self.st.merged.slots.get_mut(slot).unwrap().domain.insert(t.clone());
                }
            }
        }
        self.st.merged.prune_unattached_values();

        let inst = self.st.merged.instances[&new].clone();
        for (slot, vs) in &inst.values {
            let frames: Vec<FrameId> = vs
                .iter()
                .filter_map(|v| match v {
                    Value::Frame(f) => Some(self.merged_id(f)),
                    Value::Literal { .. } => None,
                })
                .collect();
            for (i, x) in frames.iter().enumerate() {
                for y in &frames[i + 1..] {
                    if !self.origins(FrameKind::Instance, x).is_disjoint(&self.origins(FrameKind::Instance, y)) {
                        continue;
                    }
                    self.follow_ups.push(FollowUp {
                        kind: FollowUpKind::InstanceValue,
                        operation: Operation::MergeInstances { a: x.clone(), b: y.clone(), name: None, confirm: false },
                        reason: format!("`{x}` and `{y}` are values of `{slot}` on merged instance `{new}` from different sources"),
                        frames: vec![x.clone(), y.clone(), self.merged_id(&new)],
                    });
                }
            }
        }
        Ok(new)
    }

    /// Merged images of an instance argument's types; unimaged source types are copied first.
    fn type_images(&mut self, arg: &Arg) -> BTreeSet<String> {
        match arg.current() {
            Some(m) => self.st.merged.instances[m].types.clone(),
            None => {
                let Arg::Source { src, name, .. } = arg else { unreachable!() };
                let types: Vec<String> = self.sources[*src].instances[name].types.iter().cloned().collect();
                types
                    .into_iter()
                    .map(|t| match self.image(FrameKind::Class, *src, &t) {
                        Some(image) => image,
                        None => self.copy_source_class(*src, &t, false),
                    })
                    .collect()
            }
        }
    }

    fn remove_value(&mut self, instance: &str, slot: &str, value: &Value) -> Result<(), EngineError> {
        self.merged_frame(FrameKind::Instance, instance)?;
        let inst = self.st.merged.instances.get_mut(instance).unwrap();
        let missing = || EngineError::UnknownValue { instance: instance.to_string(), slot: slot.to_string() };
        let values = inst.values.get_mut(slot).ok_or_else(missing)?;
        if !values.remove(value) {
            return Err(missing());
        }
        if values.is_empty() {
            inst.values.remove(slot);
        }
        Ok(())
    }

    // ---- generic edits ----

    fn rename(&mut self, kind: FrameKind, frame: &str, name: &str) -> Result<(), EngineError> {
        self.merged_frame(kind, frame)?;
        if frame == name {
            return Ok(());
        }
        self.check_new_name(kind, name, &BTreeSet::new())?;
        self.st.merged.rename_frame(kind, frame, name).expect("checked above");
        self.redirect_images(kind, &BTreeSet::from([frame.to_string()]), name);
        if self.st.created.remove(&(kind, frame.to_string())) {
            self.st.created.insert((kind, name.to_string()));
        }
        if kind == FrameKind::Slot {
            if let Some(p) = self.st.pending.remove(frame) {
                self.st.pending.insert(name.to_string(), p);
            }
        }
        Ok(())
    }

    fn remove(&mut self, kind: FrameKind, frame: &str) -> Result<(), EngineError> {
        self.merged_frame(kind, frame)?;
        self.st.merged.remove_frame(kind, frame).expect("checked above");
        self.st.images.retain(|r, v| r.kind != kind || v != frame);
        self.st.created.remove(&(kind, frame.to_string()));
        if kind == FrameKind::Slot {
            self.st.pending.remove(frame);
        }
        Ok(())
    }
}
