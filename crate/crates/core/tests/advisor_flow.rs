use std::fs;
use std::path::Path;

use ontomerge::advisor::{operation_key, Advisor, AdvisorError, ConflictKind, ExplanationKind};
use ontomerge::engine::{MergeSession, Operation, SessionConfig};
use ontomerge::io::read_owl;
use ontomerge::matcher::{initial_matches, MatchConfig};
use ontomerge::model::InstanceFrame;
use ontomerge::{FrameId, FrameKind, Ontology, RangeSpec, SlotFrame, Value, XsdKind};

fn fixture(name: &str) -> Ontology {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/owl").join(name);
    read_owl(&fs::read_to_string(path).unwrap(), "x").unwrap().ontology
}

fn merge_classes(a: (&str, &str), b: (&str, &str)) -> Operation {
    Operation::MergeClasses { a: FrameId::new(a.0, a.1), b: FrameId::new(b.0, b.1), name: None }
}

fn merge_slots(a: (&str, &str), b: (&str, &str)) -> Operation {
    Operation::MergeSlots { a: FrameId::new(a.0, a.1), b: FrameId::new(b.0, b.1), name: None }
}

#[test]
fn initial_matches_on_the_bibliography_sources() {
    let (ruby, niagara) = (fixture("ruby_bibliography.owl"), fixture("niagara_bib.owl"));
    let keys: Vec<String> = initial_matches(&ruby, &niagara, &MatchConfig::default()).iter().map(|s| s.key()).collect();
    let author = operation_key(&merge_classes(("Ruby_bibliography", "author"), ("Niagara_bib", "author")));
    let bib = operation_key(&merge_classes(("Ruby_bibliography", "bibliography"), ("Niagara_bib", "bib")));
    assert!(keys.contains(&author));
    assert!(!keys.contains(&bib));
}

#[test]
fn lexical_suggestion_is_explained_and_removed_once_applied() {
    let session = MergeSession::new(
        vec![fixture("ruby_bibliography.owl"), fixture("niagara_bib.owl")],
        SessionConfig::default(),
    )
    .unwrap();
    let mut advisor = Advisor::new(session, MatchConfig::default()).unwrap();
    let op = merge_classes(("Ruby_bibliography", "author"), ("Niagara_bib", "author"));
    let s = advisor.suggestions().iter().find(|s| s.key() == operation_key(&op)).unwrap();
    assert_eq!(s.explanations[0].kind, ExplanationKind::LexicalMatch);
    advisor.step(op.clone()).unwrap();
    assert!(advisor.suggestions().iter().all(|s| s.key() != operation_key(&op)));
    assert!(advisor.session().merged().classes.contains_key("author"));
}

fn gender_sources() -> Vec<Ontology> {
    let mut o1 = Ontology::new("O1");
    o1.add_class("Person", Vec::<String>::new()).unwrap();
    o1.add_class("Gender", Vec::<String>::new()).unwrap();
    o1.add_slot("sex", SlotFrame::object(["Person".to_string()], ["Gender".to_string()])).unwrap();
    let mut o2 = Ontology::new("O2");
    o2.add_class("Human", Vec::<String>::new()).unwrap();
    o2.add_class("Sex", Vec::<String>::new()).unwrap();
    o2.add_slot("sex", SlotFrame::object(["Human".to_string()], ["Sex".to_string()])).unwrap();
    vec![o1, o2]
}

#[test]
fn merged_slot_ranges_yield_a_class_merge_suggestion() {
    let session = MergeSession::new(gender_sources(), SessionConfig::default()).unwrap();
    let mut advisor = Advisor::new(session, MatchConfig::default()).unwrap();
    advisor.step(merge_slots(("O1", "sex"), ("O2", "sex"))).unwrap();
    let want = operation_key(&merge_classes(("O1", "Gender"), ("O2", "Sex")));
    let s = advisor.suggestions().iter().find(|s| s.key() == want).expect("standing suggestion");
    assert!(s.explanations.iter().any(|e| e.kind == ExplanationKind::SlotMergeFollowup));
    // The domain pair is suggested as well.
    let domain = operation_key(&merge_classes(("O1", "Person"), ("O2", "Human")));
    assert!(advisor.suggestions().iter().any(|s| s.key() == domain));
}

fn age_sources() -> Vec<Ontology> {
    let mut sources = Vec::new();
    for (name, kind) in [("O1", XsdKind::Integer), ("O2", XsdKind::String)] {
        let mut o = Ontology::new(name);
        o.add_class("Person", Vec::<String>::new()).unwrap();
        o.add_slot("age", SlotFrame::datatype(["Person".to_string()], kind)).unwrap();
        sources.push(o);
    }
    sources
}

#[test]
fn datatype_mismatch_is_reported_without_a_preferred_source() {
    let session = MergeSession::new(age_sources(), SessionConfig::default()).unwrap();
    let mut advisor = Advisor::new(session, MatchConfig::default()).unwrap();
    let out = advisor.step(merge_slots(("O1", "age"), ("O2", "age"))).unwrap();
    let conflict = out.conflicts.iter().find(|c| c.kind == ConflictKind::DatatypeMismatch).expect("mismatch");
    assert_eq!(conflict.resolutions.len(), 2);
    assert!(out.resolved.is_empty());
}

#[test]
fn preferred_source_resolves_the_mismatch_in_its_favour() {
    for (preferred, kind) in [("O1", XsdKind::Integer), ("O2", XsdKind::String)] {
        let config = SessionConfig { preferred: Some(preferred.into()), ..Default::default() };
        let session = MergeSession::new(age_sources(), config).unwrap();
        let mut advisor = Advisor::new(session, MatchConfig::default()).unwrap();
        let out = advisor.step(merge_slots(("O2", "age"), ("O1", "age"))).unwrap();
        assert!(out.conflicts.iter().all(|c| c.kind != ConflictKind::DatatypeMismatch));
        assert_eq!(advisor.session().merged().slots["age"].range, RangeSpec::Datatype(kind));
        assert!(advisor.session().pending_mismatches().is_empty());
    }
}

#[test]
fn preferred_resolution_of_a_reported_conflict() {
    let session = MergeSession::new(age_sources(), SessionConfig::default()).unwrap();
    let mut advisor = Advisor::new(session, MatchConfig::default()).unwrap();
    let out = advisor.step(merge_slots(("O1", "age"), ("O2", "age"))).unwrap();
    let conflict = out.conflicts.into_iter().find(|c| c.kind == ConflictKind::DatatypeMismatch).unwrap();
    assert_eq!(advisor.resolve_with_preferred(&conflict), Err(AdvisorError::NoPreferredSet));
    advisor.set_preferred(Some("O2".into())).unwrap();
    let resolved = advisor.resolve_with_preferred(&conflict).unwrap().expect("applied");
    assert_eq!(resolved.explanation.kind, ExplanationKind::PreferredResolution);
    assert_eq!(advisor.session().merged().slots["age"].range, RangeSpec::Datatype(XsdKind::String));
    // Stale now.
    assert_eq!(advisor.resolve_with_preferred(&conflict).unwrap(), None);
    advisor.undo().unwrap();
    assert_eq!(advisor.conflicts().iter().filter(|c| c.kind == ConflictKind::DatatypeMismatch).count(), 1);
}

fn title_sources() -> Vec<Ontology> {
    let mut sources = Vec::new();
    for (name, title) in [("O1", "Data on the Web"), ("O2", "Data on the Web, 2nd ed.")] {
        let mut o = Ontology::new(name);
        o.add_class("book", Vec::<String>::new()).unwrap();
        o.add_slot("title", SlotFrame::datatype(["book".to_string()], XsdKind::String).with_cardinality(1, Some(1)))
            .unwrap();
        let mut b = InstanceFrame::default();
        b.types.insert("book".into());
        b.values.entry("title".into()).or_default().insert(Value::literal(title, XsdKind::String));
        o.add_instance("b1", b).unwrap();
        sources.push(o);
    }
    sources
}

#[test]
fn instance_merge_reports_a_cardinality_violation() {
    let session = MergeSession::new(title_sources(), SessionConfig::default()).unwrap();
    let mut advisor = Advisor::new(session, MatchConfig::default()).unwrap();
    advisor.step(merge_classes(("O1", "book"), ("O2", "book"))).unwrap();
    advisor.step(merge_slots(("O1", "title"), ("O2", "title"))).unwrap();
    let out = advisor
        .step(Operation::MergeInstances { a: FrameId::new("O1", "b1"), b: FrameId::new("O2", "b1"), name: None, confirm: false })
        .unwrap();
    let conflict = out.conflicts.iter().find(|c| c.kind == ConflictKind::CardinalityViolation).expect("violation");
    assert_eq!(conflict.resolutions.len(), 2);
    let before = advisor.session().merged().clone();
    let fix = conflict.resolutions[0].operation.clone();
    advisor.step(fix).unwrap();
    assert!(advisor.conflicts().iter().all(|c| c.kind != ConflictKind::CardinalityViolation));
    advisor.undo().unwrap();
    assert_eq!(advisor.session().merged(), &before);
}

#[test]
fn recent_operations_pull_related_suggestions_forward() {
    let mut o1 = Ontology::new("O1");
    let mut o2 = Ontology::new("O2");
    for o in [&mut o1, &mut o2] {
        for c in ["alpha", "beta", "gamma"] {
            o.add_class(c, Vec::<String>::new()).unwrap();
        }
        o.add_slot("link", SlotFrame::object(["gamma".to_string()], ["beta".to_string()])).unwrap();
    }
    let session = MergeSession::new(vec![o1, o2], SessionConfig::default()).unwrap();
    let mut advisor = Advisor::new(session, MatchConfig::default()).unwrap();
    assert!(advisor.suggestions()[0].key().contains("alpha"));
    let out = advisor.step(merge_classes(("O1", "gamma"), ("O2", "gamma"))).unwrap();
    let first = &out.suggestions[0];
    assert!(first.related.contains(&FrameId::new("O1", "link")) || first.key().contains("link"), "{}", first.key());
    assert!(first.explanations.iter().any(|e| e.kind == ExplanationKind::FocusMove));
    assert_eq!(first.explanations[0].kind, ExplanationKind::LexicalMatch);
}

#[test]
fn auto_merge_of_a_fixture_with_its_copy() {
    let ruby = fixture("ruby_bibliography.owl");
    let mut copy = ruby.clone();
    copy.name = "Ruby_copy".into();
    let session = MergeSession::new(vec![ruby.clone(), copy], SessionConfig::default()).unwrap();
    let mut advisor = Advisor::new(session, MatchConfig::default()).unwrap();
    let report = advisor.auto_merge(true).unwrap();
    let merged = advisor.session().merged();
    assert_eq!(merged.classes.len(), ruby.classes.len());
    assert_eq!(merged.slots.len(), ruby.slots.len());
    assert_eq!(report.copies, 0);
    assert!(report.unresolved.is_empty());
}

#[test]
fn strict_auto_merge_fails_on_leftover_conflicts() {
    let session = MergeSession::new(age_sources(), SessionConfig::default()).unwrap();
    let mut advisor = Advisor::new(session, MatchConfig::default()).unwrap();
    match advisor.auto_merge(true) {
        Err(AdvisorError::UnresolvedConflicts(c)) => assert!(c.iter().any(|c| c.kind == ConflictKind::DatatypeMismatch)),
        other => panic!("{other:?}"),
    }
    let session = MergeSession::new(age_sources(), SessionConfig { preferred: Some("O1".into()), ..Default::default() }).unwrap();
    let mut advisor = Advisor::new(session, MatchConfig::default()).unwrap();
    advisor.auto_merge(true).unwrap();
    assert_eq!(advisor.session().merged().slots.len(), 1);
    assert!(advisor.session().merged().contains(FrameKind::Class, "Person"));
}
