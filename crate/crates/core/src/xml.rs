//! Minimal namespace-aware XML element tree built on `quick-xml`.

use quick_xml::events::{BytesStart, Event};
use quick_xml::name::ResolveResult;
use quick_xml::NsReader;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed XML at line {line}, column {column}: {message}")]
pub struct XmlError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl XmlError {
    fn at(text: &str, offset: u64, message: impl Into<String>) -> Self {
        let offset = (offset as usize).min(text.len());
        let before = &text[..text.floor_char_boundary(offset)];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
        Self { line, column, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlAttribute {
    pub namespace: Option<String>,
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct XmlElement {
    pub namespace: Option<String>,
    pub name: String,
    pub attributes: Vec<XmlAttribute>,
    pub children: Vec<XmlElement>,
    /// Concatenated character data directly inside this element.
    pub text: String,
}

impl XmlElement {
    pub fn is(&self, namespace: &str, name: &str) -> bool {
        self.namespace.as_deref() == Some(namespace) && self.name == name
    }

    /// Attribute by namespace and local name.
    pub fn attr_ns(&self, namespace: &str, name: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|a| a.namespace.as_deref() == Some(namespace) && a.name == name)
            .map(|a| a.value.as_str())
    }

    /// Unqualified attribute by local name.
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes.iter().find(|a| a.namespace.is_none() && a.name == name).map(|a| a.value.as_str())
    }

    pub fn trimmed_text(&self) -> &str {
        self.text.trim()
    }
}

/// Parses a complete document and returns its root element.
pub fn parse(text: &str) -> Result<XmlElement, XmlError> {
    let mut reader = NsReader::from_str(text);
    reader.config_mut().check_end_names = true;
    let mut stack: Vec<XmlElement> = Vec::new();
    let mut root: Option<XmlElement> = None;

    loop {
        let next = reader
            .read_resolved_event()
            .map(|(ns, event)| (namespace_of(ns), event.into_owned()))
            .map_err(|e| e.to_string());
        let event = match next {
            Ok(event) => event,
            Err(message) => return Err(XmlError::at(text, reader.error_position(), message)),
        };
        match event {
            (ns, Event::Start(start)) => {
                let element = open_element(&reader, ns, &start, text)?;
                stack.push(element);
            }
            (ns, Event::Empty(start)) => {
                let element = open_element(&reader, ns, &start, text)?;
                close_element(element, &mut stack, &mut root, text, &reader)?;
            }
            (_, Event::End(_)) => {
                let element = stack
                    .pop()
                    .ok_or_else(|| XmlError::at(text, reader.buffer_position(), "unexpected closing tag"))?;
                close_element(element, &mut stack, &mut root, text, &reader)?;
            }
            (_, Event::Text(t)) => {
                let chunk = t.unescape().map_err(|e| XmlError::at(text, reader.buffer_position(), e.to_string()))?;
                match stack.last_mut() {
                    Some(top) => top.text.push_str(&chunk),
                    None if chunk.trim().is_empty() => {}
                    None => return Err(XmlError::at(text, reader.buffer_position(), "text outside the root element")),
                }
            }
            (_, Event::CData(c)) => {
                if let Some(top) = stack.last_mut() {
                    top.text.push_str(&String::from_utf8_lossy(&c));
                }
            }
            (_, Event::Eof) => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(XmlError::at(text, text.len() as u64, format!("unclosed element `{}`", stack.last().unwrap().name)));
    }
    root.ok_or_else(|| XmlError::at(text, 0, "document has no root element"))
}

fn namespace_of(ns: ResolveResult) -> Option<String> {
    match ns {
        ResolveResult::Bound(ns) => Some(String::from_utf8_lossy(ns.as_ref()).into_owned()),
        _ => None,
    }
}

fn open_element(reader: &NsReader<&[u8]>, ns: Option<String>, start: &BytesStart, text: &str) -> Result<XmlElement, XmlError> {
    let name = String::from_utf8_lossy(start.local_name().as_ref()).into_owned();
    let mut attributes = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| XmlError::at(text, reader.buffer_position(), e.to_string()))?;
        let key = attr.key;
        if key.as_ref() == b"xmlns" || key.prefix().is_some_and(|p| p.as_ref() == b"xmlns") {
            continue;
        }
        let (attr_ns, local) = reader.resolve_attribute(key);
        let value = attr.unescape_value().map_err(|e| XmlError::at(text, reader.buffer_position(), e.to_string()))?;
        let namespace = match key.prefix() {
            Some(p) if p.as_ref() == b"xml" => Some("http://www.w3.org/XML/1998/namespace".to_string()),
            _ => namespace_of(attr_ns),
        };
        attributes.push(XmlAttribute {
            namespace,
            name: String::from_utf8_lossy(local.as_ref()).into_owned(),
            value: value.into_owned(),
        });
    }
    Ok(XmlElement { namespace: ns, name, attributes, children: Vec::new(), text: String::new() })
}

fn close_element(
    element: XmlElement,
    stack: &mut [XmlElement],
    root: &mut Option<XmlElement>,
    text: &str,
    reader: &NsReader<&[u8]>,
) -> Result<(), XmlError> {
    match stack.last_mut() {
        Some(parent) => parent.children.push(element),
        None if root.is_none() => *root = Some(element),
        None => return Err(XmlError::at(text, reader.buffer_position(), "more than one root element")),
    }
    Ok(())
}

/// Escapes text for element content and double-quoted attribute values.
pub fn escape(s: &str) -> String {
    quick_xml::escape::escape(s).into_owned()
}
