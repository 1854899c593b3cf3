//! Merge scripts: a replayable header plus one operation per line.
//!
//! ```text
//! # comment
//! source name=Ruby_bibliography path=ruby.owl
//! source name=Niagara_bib path=niagara.owl
//! config merged=GlobalOntology suffix-policy=suffix-on-collision threshold=0.8
//! merge-classes a=author@Ruby_bibliography b=author@Niagara_bib
//! merge-classes a=bibliography@Ruby_bibliography b=bib@Niagara_bib name=bibliography
//! create-class name=Person
//! add-superclass class=author superclass=Person
//! set-slot-range slot=price range=xsd:decimal
//! remove-value instance=b1 slot=title value="string:Data on the Web"
//! ```
//!
//! Fields are `key=value`; values holding spaces, quotes or backslashes are
//! double-quoted with backslash escapes. Source frames are `name@ontology`,
//! merged-only edits take bare local names. Values are `kind:lexical` or
//! `#instance`, ranges `xsd:kind` or `classes:A,B`. Source paths are relative
//! to the script file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::advisor::{Advisor, AdvisorError};
use crate::datatype::XsdKind;
use crate::engine::{EngineError, Operation, SessionConfig, SuffixPolicy};
use crate::io::owl::{read_owl, OwlError};
use crate::matcher::MatchConfig;
use crate::model::{FrameId, FrameKind, Ontology, RangeSpec, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScriptError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("cannot read `{path}`: {message}")]
    Io { path: PathBuf, message: String },
    #[error("`{path}`: {source}")]
    Owl { path: PathBuf, source: OwlError },
    #[error("`{path}` holds ontology `{found}`, the script expects `{expected}`")]
    SourceName { path: PathBuf, expected: String, found: String },
    #[error("cannot start the session: {0}")]
    Session(AdvisorError),
    #[error("step {index} (line {line}, `{operation}`) failed: {source}")]
    Step { index: usize, line: usize, operation: String, source: AdvisorError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptSource {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScriptConfig {
    pub merged: Option<String>,
    pub suffix_policy: Option<SuffixPolicy>,
    pub threshold: Option<f64>,
    pub preferred: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptStep {
    /// 1-based line in the script text; 0 for steps built in memory.
    pub line: usize,
    pub operation: Operation,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergeScript {
    pub sources: Vec<ScriptSource>,
    pub config: ScriptConfig,
    pub steps: Vec<ScriptStep>,
}

impl MergeScript {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut script = MergeScript::default();
        let mut seen_config = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ScriptError::Syntax { line, message };
            let tokens = tokenize(raw).map_err(err)?;
            let Some((head, rest)) = tokens.split_first() else { continue };
            let mut fields = Fields::new(rest).map_err(err)?;
            match head.as_str() {
                "source" => {
                    if !script.steps.is_empty() {
                        return Err(err("`source` after the first operation".into()));
                    }
                    let name = fields.take("name").map_err(err)?;
                    let path = PathBuf::from(fields.take("path").map_err(err)?);
                    script.sources.push(ScriptSource { name, path });
                }
                "config" => {
                    if seen_config || !script.steps.is_empty() {
                        return Err(err("`config` must appear once, before the operations".into()));
                    }
                    seen_config = true;
                    let c = &mut script.config;
                    c.merged = fields.opt("merged");
                    c.suffix_policy = fields.opt("suffix-policy").map(|s| s.parse()).transpose().map_err(|e: EngineError| err(e.to_string()))?;
                    c.threshold = fields
                        .opt("threshold")
                        .map(|s| s.parse::<f64>().map_err(|e| err(format!("threshold: {e}"))))
                        .transpose()?;
                    c.preferred = fields.opt("preferred");
                }
                op => {
                    let operation = parse_fields(op, &mut fields).map_err(err)?;
                    script.steps.push(ScriptStep { line, operation });
                }
            }
            fields.finish().map_err(err)?;
        }
        Ok(script)
    }

    pub fn session_config(&self) -> SessionConfig {
        let mut config = SessionConfig::default();
        if let Some(m) = &self.config.merged {
            config.merged_name = m.clone();
        }
        if let Some(p) = self.config.suffix_policy {
            config.suffix_policy = p;
        }
        config.preferred = self.config.preferred.clone();
        config
    }

    pub fn match_config(&self) -> MatchConfig {
        let mut config = MatchConfig::default();
        if let Some(t) = self.config.threshold {
            config.threshold = t;
        }
        config
    }

    /// Reads every source file, resolving relative paths against `dir`.
    pub fn load_sources(&self, dir: &Path) -> Result<Vec<Ontology>, ScriptError> {
        self.sources
            .iter()
            .map(|s| {
                let path = dir.join(&s.path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ScriptError::Io { path: path.clone(), message: e.to_string() })?;
                let doc = read_owl(&text, &s.name).map_err(|source| ScriptError::Owl { path: path.clone(), source })?;
                if doc.ontology.name != s.name {
                    return Err(ScriptError::SourceName { path, expected: s.name.clone(), found: doc.ontology.name });
                }
                Ok(doc.ontology)
            })
            .collect()
    }

    /// Loads the sources and applies every step. Stops at the first failing step.
    pub fn replay(&self, dir: &Path) -> Result<Advisor, ScriptError> {
        self.replay_with(self.load_sources(dir)?)
    }

    pub fn replay_with(&self, sources: Vec<Ontology>) -> Result<Advisor, ScriptError> {
        let session = crate::engine::MergeSession::new(sources, self.session_config())
            .map_err(|e| ScriptError::Session(e.into()))?;
        let mut advisor = Advisor::new(session, self.match_config()).map_err(ScriptError::Session)?;
        for (i, step) in self.steps.iter().enumerate() {
            advisor.step(step.operation.clone()).map_err(|source| ScriptError::Step {
                index: i + 1,
                line: step.line,
                operation: step.operation.to_string(),
                source,
            })?;
        }
        Ok(advisor)
    }
}

impl fmt::Display for MergeScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.sources {
            writeln!(f, "source name={} path={}", quote(&s.name), quote(&s.path.to_string_lossy()))?;
        }
        let c = &self.config;
        let mut parts = Vec::new();
        if let Some(m) = &c.merged {
            parts.push(format!("merged={}", quote(m)));
        }
        if let Some(p) = c.suffix_policy {
            parts.push(format!("suffix-policy={p}"));
        }
        if let Some(t) = c.threshold {
            parts.push(format!("threshold={t}"));
        }
        if let Some(p) = &c.preferred {
            parts.push(format!("preferred={}", quote(p)));
        }
        if !parts.is_empty() {
            writeln!(f, "config {}", parts.join(" "))?;
        }
        for step in &self.steps {
            writeln!(f, "{}", step.operation)?;
        }
        Ok(())
    }
}

/// Parses one operation line.
pub fn parse_operation(line: &str) -> Result<Operation, String> {
    let tokens = tokenize(line)?;
    let (head, rest) = tokens.split_first().ok_or("empty operation")?;
    let mut fields = Fields::new(rest)?;
    let op = parse_fields(head, &mut fields)?;
    fields.finish()?;
    Ok(op)
}

fn parse_fields(op: &str, f: &mut Fields) -> Result<Operation, String> {
    let id = |f: &mut Fields, key: &str| -> Result<FrameId, String> {
        f.take(key)?.parse::<FrameId>().map_err(|e| format!("{key}: {e}"))
    };
    Ok(match op {
        "merge-classes" => Operation::MergeClasses { a: id(f, "a")?, b: id(f, "b")?, name: f.opt("name") },
        "merge-slots" => Operation::MergeSlots { a: id(f, "a")?, b: id(f, "b")?, name: f.opt("name") },
        "merge-instances" => Operation::MergeInstances {
            a: id(f, "a")?,
            b: id(f, "b")?,
            name: f.opt("name"),
            confirm: match f.opt("confirm").as_deref() {
                None | Some("false") => false,
                Some("true") => true,
                Some(other) => return Err(format!("confirm: expected true or false, got `{other}`")),
            },
        },
        "shallow-copy" => Operation::ShallowCopy { class: id(f, "class")? },
        "deep-copy" => Operation::DeepCopy { class: id(f, "class")? },
        "copy-slot" => Operation::CopySlot { slot: id(f, "slot")? },
        "create-class" => Operation::CreateClass {
            name: f.take("name")?,
            superclasses: f.opt("superclasses").map(|s| list(&s)).unwrap_or_default().into_iter().collect(),
        },
        "add-superclass" => Operation::AddSuperclass { class: f.take("class")?, superclass: f.take("superclass")? },
        "remove-superclass" => Operation::RemoveSuperclass { class: f.take("class")?, superclass: f.take("superclass")? },
        "rename-frame" => Operation::RenameFrame { kind: kind(&f.take("kind")?)?, frame: f.take("frame")?, name: f.take("name")? },
        "remove-frame" => Operation::RemoveFrame { kind: kind(&f.take("kind")?)?, frame: f.take("frame")? },
        "set-slot-range" => Operation::SetSlotRange { slot: f.take("slot")?, range: parse_range(&f.take("range")?)? },
        "remove-value" => Operation::RemoveValue {
            instance: f.take("instance")?,
            slot: f.take("slot")?,
            value: parse_value(&f.take("value")?)?,
        },
        other => return Err(format!("unknown operation `{other}`")),
    })
}

fn kind(s: &str) -> Result<FrameKind, String> {
    s.parse().map_err(|e: crate::model::ModelError| e.to_string())
}

fn list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(str::to_string).collect()
}

pub fn parse_range(s: &str) -> Result<RangeSpec, String> {
    if let Some(classes) = s.strip_prefix("classes:") {
        return Ok(RangeSpec::Classes(list(classes).into_iter().collect()));
    }
    if s.starts_with("xsd:") {
        return s.parse::<XsdKind>().map(RangeSpec::Datatype).map_err(|e| e.to_string());
    }
    Err(format!("range `{s}`: expected xsd:<kind> or classes:<A,B>"))
}

pub fn parse_value(s: &str) -> Result<Value, String> {
    if let Some(r) = s.strip_prefix('#') {
        return Ok(Value::Frame(r.to_string()));
    }
    let (kind, lexical) = s.split_once(':').ok_or_else(|| format!("value `{s}`: expected <kind>:<lexical> or #<instance>"))?;
    let kind: XsdKind = kind.parse().map_err(|e: crate::datatype::DatatypeError| e.to_string())?;
    Ok(Value::literal(lexical, kind))
}

pub fn format_range(r: &RangeSpec) -> String {
    match r {
        RangeSpec::Datatype(k) => format!("xsd:{k}"),
        RangeSpec::Classes(c) => format!("classes:{}", c.iter().cloned().collect::<Vec<_>>().join(",")),
    }
}

pub fn format_value(v: &Value) -> String {
    match v {
        Value::Frame(r) => format!("#{r}"),
        Value::Literal { lexical, kind } => format!("{kind}:{lexical}"),
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut fields: Vec<(&str, String)> = Vec::new();
        match self {
            Operation::MergeClasses { a, b, name } | Operation::MergeSlots { a, b, name } => {
                fields.extend([("a", a.to_string()), ("b", b.to_string())]);
                fields.extend(name.iter().map(|n| ("name", n.clone())));
            }
            Operation::MergeInstances { a, b, name, confirm } => {
                fields.extend([("a", a.to_string()), ("b", b.to_string())]);
                fields.extend(name.iter().map(|n| ("name", n.clone())));
                if *confirm {
                    fields.push(("confirm", "true".into()));
                }
            }
            Operation::ShallowCopy { class } | Operation::DeepCopy { class } => fields.push(("class", class.to_string())),
            Operation::CopySlot { slot } => fields.push(("slot", slot.to_string())),
            Operation::CreateClass { name, superclasses } => {
                fields.push(("name", name.clone()));
                if !superclasses.is_empty() {
                    fields.push(("superclasses", superclasses.iter().cloned().collect::<Vec<_>>().join(",")));
                }
            }
            Operation::AddSuperclass { class, superclass } | Operation::RemoveSuperclass { class, superclass } => {
                fields.extend([("class", class.clone()), ("superclass", superclass.clone())]);
            }
            Operation::RenameFrame { kind, frame, name } => {
                fields.extend([("kind", kind.to_string()), ("frame", frame.clone()), ("name", name.clone())]);
            }
            Operation::RemoveFrame { kind, frame } => fields.extend([("kind", kind.to_string()), ("frame", frame.clone())]),
            Operation::SetSlotRange { slot, range } => fields.extend([("slot", slot.clone()), ("range", format_range(range))]),
            Operation::RemoveValue { instance, slot, value } => {
                fields.extend([("instance", instance.clone()), ("slot", slot.clone()), ("value", format_value(value))]);
            }
        }
        f.write_str(self.name())?;
        for (k, v) in fields {
            write!(f, " {k}={}", quote(&v))?;
        }
        Ok(())
    }
}

fn quote(s: &str) -> String {
    if !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c == '"' || c == '\\' || c.is_control()) {
        return s.to_string();
    }
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Splits a line into words; a word starting with `#` starts a comment.
fn tokenize(line: &str) -> Result<Vec<String>, String> {
    let mut tokens = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while chars.next_if(|c| c.is_whitespace()).is_some() {}
        match chars.peek() {
            None | Some('#') => break,
            _ => {}
        }
        let mut token = String::new();
        while let Some(c) = chars.next_if(|c| !c.is_whitespace()) {
            if c != '"' {
                token.push(c);
                continue;
            }
            loop {
                match chars.next() {
                    None => return Err("unterminated quoted value".into()),
                    Some('"') => break,
                    Some('\\') => match chars.next() {
                        Some('n') => token.push('\n'),
                        Some('r') => token.push('\r'),
                        Some('t') => token.push('\t'),
                        Some(c @ ('"' | '\\')) => token.push(c),
                        other => return Err(format!("bad escape `\\{}`", other.map(String::from).unwrap_or_default())),
                    },
                    Some(c) => token.push(c),
                }
            }
        }
        tokens.push(token);
    }
    Ok(tokens)
}

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn new(tokens: &[String]) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for t in tokens {
            let (k, v) = t.split_once('=').ok_or_else(|| format!("expected key=value, got `{t}`"))?;
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(format!("field `{k}` given twice"));
            }
        }
        Ok(Self(map))
    }

    fn take(&mut self, key: &str) -> Result<String, String> {
        self.0.remove(key).ok_or_else(|| format!("missing field `{key}`"))
    }

    fn opt(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn finish(self) -> Result<(), String> {
        match self.0.keys().next() {
            Some(k) => Err(format!("unknown field `{k}`")),
            None => Ok(()),
        }
    }
}
