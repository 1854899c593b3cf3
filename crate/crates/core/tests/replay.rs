use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use ontomerge::io::{write_canonical, MergeScript, ScriptError};
use ontomerge::{FrameId, FrameKind};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn replay(script: &str) -> String {
    let dir = fixtures().join("scripts");
    let text = fs::read_to_string(dir.join(script)).unwrap();
    let advisor = MergeScript::parse(&text).unwrap().replay(&dir).unwrap();
    write_canonical(advisor.session().merged())
}

fn rows(canonical: &str, prefix: &str) -> BTreeSet<String> {
    canonical.lines().filter(|l| l.starts_with(prefix)).map(str::to_string).collect()
}

fn objprops(table: &[(&str, &str, &str)]) -> BTreeSet<String> {
    table.iter().map(|(p, d, r)| format!("objprop {p} domain={d} range={r}")).collect()
}

fn dataprops(table: &[(&str, &str, &str)]) -> BTreeSet<String> {
    table.iter().map(|(p, d, r)| format!("dataprop {p} domain={d} range=xsd:{r}")).collect()
}

// Object and datatype property rows of the merged bibliography ontology,
// with class names lowercased as in the source documents.
const OBJECT_ROWS: [(&str, &str, &str); 11] = [
    ("hasbiblioentry", "bibliography", "biblioentry"),
    ("hasvendor", "bibliography", "vendor"),
    ("hasbook", "vendor", "book"),
    ("hasauthor", "book", "author"),
    ("hasauthor", "biblioentry", "author"),
    ("haspublisher", "biblioentry", "publisher"),
    ("hasissue", "SigmodRecord", "issue"),
    ("hasarticles", "issue", "articles"),
    ("hasarticle", "articles", "article"),
    ("hasauthors", "article", "authors"),
    ("hasauthor", "authors", "author"),
];

const DATATYPE_ROWS: [(&str, &str, &str); 21] = [
    ("id", "bibliography", "NCName"),
    ("id", "biblioentry", "NCName"),
    ("id", "vendor", "NCName"),
    ("name", "vendor", "NCName"),
    ("email", "vendor", "string"),
    ("phone", "vendor", "NMTOKEN"),
    ("title", "book", "string"),
    ("publisher", "book", "string"),
    ("year", "book", "integer"),
    ("price", "book", "decimal"),
    ("title", "biblioentry", "string"),
    ("pubdate", "biblioentry", "integer"),
    ("volume", "issue", "integer"),
    ("number", "issue", "integer"),
    ("title", "article", "string"),
    ("initPage", "article", "integer"),
    ("endPage", "article", "integer"),
    ("position", "author", "integer"),
    ("firstname", "author", "NCName"),
    ("surname", "author", "NCName"),
    ("lastname", "author", "NCName"),
];

const SIGMOD_CLASSES: [&str; 6] = ["SigmodRecord", "issue", "articles", "article", "authors", "author"];

fn two_source<'a>(rows: &[(&'a str, &'a str, &'a str)], sigmod_only: &[&str]) -> Vec<(&'a str, &'a str, &'a str)> {
    rows.iter()
        .copied()
        .filter(|(p, d, _)| !sigmod_only.contains(p) && !(["issue", "articles", "article", "authors", "SigmodRecord"].contains(d)))
        .collect()
}

/// Set `UPDATE_FIXTURES=1` to regenerate the golden exports.
#[test]
fn replays_match_golden_exports() {
    for (script, golden) in [
        ("bibliography.merge", "bibliography.canonical"),
        ("bibliography_sigmod.merge", "bibliography_sigmod.canonical"),
    ] {
        let out = replay(script);
        let path = fixtures().join("golden").join(golden);
        if std::env::var_os("UPDATE_FIXTURES").is_some() {
            fs::write(&path, &out).unwrap();
        }
        assert_eq!(fs::read_to_string(&path).unwrap(), out, "{script}");
    }
}

#[test]
fn two_source_replay_has_the_two_source_table_rows() {
    let out = replay("bibliography.merge");
    let sigmod_slots = ["position", "surname"];
    assert_eq!(rows(&out, "objprop "), objprops(&two_source(&OBJECT_ROWS, &[])));
    assert_eq!(rows(&out, "dataprop "), dataprops(&two_source(&DATATYPE_ROWS, &sigmod_slots)));
    assert!(out.lines().any(|l| l == "objprop hasbook domain=vendor range=book"));
    assert_eq!(rows(&out, "objprop ").len(), 6);
}

#[test]
fn three_source_replay_has_every_table_row() {
    let out = replay("bibliography_sigmod.merge");
    assert_eq!(rows(&out, "objprop "), objprops(&OBJECT_ROWS));
    assert_eq!(rows(&out, "dataprop "), dataprops(&DATATYPE_ROWS));
    for class in SIGMOD_CLASSES {
        assert!(out.lines().any(|l| l == format!("class {class}")));
    }
}

#[test]
fn restructuring_adds_the_two_superclasses() {
    let out = replay("bibliography.merge");
    assert_eq!(
        rows(&out, "subclass "),
        BTreeSet::from(["subclass author Person".to_string(), "subclass bibliography Publication".to_string()])
    );
}

#[test]
fn unknown_frame_fails_at_its_step() {
    let dir = fixtures().join("scripts");
    let mut text = fs::read_to_string(dir.join("bibliography.merge")).unwrap();
    text.push_str("shallow-copy class=journal@Niagara_bib\n");
    let script = MergeScript::parse(&text).unwrap();
    let n = script.steps.len();
    match script.replay(&dir) {
        Err(ScriptError::Step { index, .. }) => assert_eq!(index, n),
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_script_loads_sources_only() {
    let dir = fixtures().join("scripts");
    let text = fs::read_to_string(dir.join("bibliography.merge")).unwrap();
    let header: String = text.lines().filter(|l| l.starts_with("source") || l.starts_with("config")).map(|l| format!("{l}\n")).collect();
    let advisor = MergeScript::parse(&header).unwrap().replay(&dir).unwrap();
    assert_eq!(advisor.session().sources().len(), 2);
    assert!(advisor.session().merged().is_empty());
    assert_eq!(write_canonical(advisor.session().merged()), "ontology GlobalOntology\n");
}

#[test]
fn merged_author_is_the_image_of_both_authors() {
    let dir = fixtures().join("scripts");
    let text = fs::read_to_string(dir.join("bibliography.merge")).unwrap();
    let session = MergeScript::parse(&text).unwrap().replay(&dir).unwrap().into_session();
    for src in ["Ruby_bibliography", "Niagara_bib"] {
        assert_eq!(session.current(FrameKind::Class, &FrameId::new(src, "author")).as_deref(), Some("author"));
    }
    assert_eq!(session.current(FrameKind::Class, &FrameId::new("Niagara_bib", "bib")).as_deref(), Some("bibliography"));
}
