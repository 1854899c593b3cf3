//! Line-per-fact text export used for golden comparisons and diffs.
//!
//! ```text
//! ontology <name>
//! class <name>
//! subclass <child> <parent>
//! objprop <slot> domain=<class|-> range=<class|->
//! dataprop <slot> domain=<class|-> range=xsd:<kind>
//! card <slot> min=<n> max=<n|*>
//! instance <name> type=<class|->
//! value <instance> <slot> xsd:<kind> "<lexical>"
//! value <instance> <slot> #<instance>
//! ```
//!
//! Groups appear in that order and each group is sorted bytewise. A slot
//! with several domain or range classes gets one line per combination.
//! `card` lines are written only for slots that are not `0..*`. Lexical
//! forms escape `\`, `"`, newline, carriage return and tab with a backslash.

use crate::model::{Ontology, RangeSpec, Value};

pub fn write_canonical(o: &Ontology) -> String {
    let mut groups: [Vec<String>; 7] = Default::default();
    for (name, class) in &o.classes {
        groups[0].push(format!("class {name}"));
        for sup in &class.superclasses {
            groups[1].push(format!("subclass {name} {sup}"));
        }
    }
    for (name, slot) in &o.slots {
        let domain = or_dash(slot.domain.iter());
        match &slot.range {
            RangeSpec::Classes(range) => {
                let range = or_dash(range.iter());
                for d in &domain {
                    for r in &range {
                        groups[2].push(format!("objprop {name} domain={d} range={r}"));
                    }
                }
            }
            RangeSpec::Datatype(kind) => {
                for d in &domain {
                    groups[3].push(format!("dataprop {name} domain={d} range=xsd:{kind}"));
                }
            }
        }
        if slot.min_card != 0 || slot.max_card.is_some() {
            let max = slot.max_card.map_or("*".to_string(), |m| m.to_string());
            groups[4].push(format!("card {name} min={} max={max}", slot.min_card));
        }
    }
    for (name, inst) in &o.instances {
        for t in or_dash(inst.types.iter()) {
            groups[5].push(format!("instance {name} type={t}"));
        }
        for (slot, values) in &inst.values {
            for v in values {
                let v = match v {
                    Value::Literal { lexical, kind } => format!("xsd:{kind} \"{}\"", escape(lexical)),
                    Value::Frame(r) => format!("#{r}"),
                };
                groups[6].push(format!("value {name} {slot} {v}"));
            }
        }
    }
    let mut out = format!("ontology {}\n", o.name);
    for mut group in groups {
        group.sort();
        for line in group {
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

fn or_dash<'a>(names: impl Iterator<Item = &'a String>) -> Vec<&'a str> {
    let v: Vec<&str> = names.map(String::as_str).collect();
    if v.is_empty() { vec!["-"] } else { v }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InstanceFrame, SlotFrame};
    use crate::XsdKind;

    #[test]
    fn empty_ontology_is_header_only() {
        assert_eq!(write_canonical(&Ontology::new("E")), "ontology E\n");
    }

    #[test]
    fn lines_are_grouped_and_sorted() {
        let mut o = Ontology::new("O");
        o.add_class("vendor", Vec::<String>::new()).unwrap();
        o.add_class("book", ["vendor"]).unwrap();
        o.add_slot("hasbook", SlotFrame::object(["vendor".to_string()], ["book".to_string()])).unwrap();
        o.add_slot("price", SlotFrame::datatype(["book".to_string()], XsdKind::Decimal).with_cardinality(0, Some(1)))
            .unwrap();
        let mut i = InstanceFrame::default();
        i.types.insert("book".into());
        i.values.entry("price".into()).or_default().insert(Value::literal("1.5", XsdKind::Decimal));
        o.add_instance("b1", i).unwrap();
        assert_eq!(
            write_canonical(&o),
            "ontology O\nclass book\nclass vendor\nsubclass book vendor\n\
             objprop hasbook domain=vendor range=book\ndataprop price domain=book range=xsd:decimal\n\
             card price min=0 max=1\ninstance b1 type=book\nvalue b1 price xsd:decimal \"1.5\"\n"
        );
    }

    #[test]
    fn escapes_lexical_forms() {
        assert_eq!(escape("a\"b\\c\nd"), "a\\\"b\\\\c\\nd");
    }
}
