//! Lexical name similarity and the initial match list.
//!
//! Names are normalized into lowercase tokens first; the edit-distance and
//! n-gram strategies compare the tokens joined without separators, so
//! `has_author`, `hasAuthor` and `hasauthor` are all equal under them.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advisor::{Explanation, ExplanationKind, Suggestion};
use crate::engine::Operation;
use crate::model::{FrameId, FrameKind, Ontology};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("name is empty")]
    EmptyName,
    #[error("n-gram size must be at least 1, got {0}")]
    InvalidN(usize),
    #[error("invalid match configuration: {0}")]
    InvalidConfig(String),
    #[error("synonym table line {line}: {message}")]
    SynonymTable { line: usize, message: String },
}

/// Splits a name into lowercase tokens at underscores, hyphens, whitespace
/// and camelCase boundaries. Digits stay attached to the token they follow.
pub fn normalize_name(name: &str) -> Result<Vec<String>, MatchError> {
    let mut tokens = Vec::new();
    for part in name.split(|c: char| c == '_' || c == '-' || c.is_whitespace()).filter(|p| !p.is_empty()) {
        let chars: Vec<char> = part.chars().collect();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if i > 0 && c.is_uppercase() {
                let prev = chars[i - 1];
                let next_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
                // lower→Upper, digit→Upper, and the last capital of an acronym before a lowercase run
                if prev.is_lowercase() || prev.is_ascii_digit() || (prev.is_uppercase() && next_lower) {
                    tokens.push(std::mem::take(&mut current));
                }
            }
            current.extend(c.to_lowercase());
        }
        tokens.push(current);
    }
    if tokens.is_empty() {
        return Err(MatchError::EmptyName);
    }
    Ok(tokens)
}

/// Edit distance over Unicode scalar values with unit-cost insertion,
/// deletion and substitution.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let next = (diag + usize::from(ca != cb)).min(row[j] + 1).min(row[j + 1] + 1);
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}

/// `1 - d / max(|a|, |b|)`, and 1 for two empty strings.
pub fn levenshtein_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

fn ngrams(s: &str, n: usize) -> BTreeMap<Vec<char>, usize> {
    let pad = std::iter::repeat_n('\0', n - 1);
    let chars: Vec<char> = pad.clone().chain(s.to_lowercase().chars()).chain(pad).collect();
    let mut out = BTreeMap::new();
    for gram in chars.windows(n) {
        *out.entry(gram.to_vec()).or_insert(0) += 1;
    }
    out
}

/// Dice coefficient over the multisets of character n-grams of the
/// lowercased strings, each padded with `n - 1` boundary markers per side.
pub fn ngram_similarity(a: &str, b: &str, n: usize) -> Result<f64, MatchError> {
    if n < 1 {
        return Err(MatchError::InvalidN(n));
    }
    if a.is_empty() && b.is_empty() {
        return Ok(1.0);
    }
    let (ga, gb) = (ngrams(a, n), ngrams(b, n));
    let total: usize = ga.values().sum::<usize>() + gb.values().sum::<usize>();
    if total == 0 {
        return Ok(0.0);
    }
    let common: usize = ga.iter().map(|(g, ca)| gb.get(g).map_or(0, |cb| (*ca).min(*cb))).sum();
    Ok(2.0 * common as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Exact,
    Levenshtein,
    Ngram,
    Synonym,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Exact => "exact",
            Strategy::Levenshtein => "levenshtein",
            Strategy::Ngram => "ngram",
            Strategy::Synonym => "synonym",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyWeights {
    pub exact: f64,
    pub levenshtein: f64,
    pub ngram: f64,
    pub synonym: f64,
}

impl Default for StrategyWeights {
    fn default() -> Self {
        Self { exact: 1.0, levenshtein: 1.0, ngram: 1.0, synonym: 1.0 }
    }
}

impl StrategyWeights {
    fn get(&self, s: Strategy) -> f64 {
        match s {
            Strategy::Exact => self.exact,
            Strategy::Levenshtein => self.levenshtein,
            Strategy::Ngram => self.ngram,
            Strategy::Synonym => self.synonym,
        }
    }
}

/// Unordered name pairs treated as equivalent. Names are stored normalized.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynonymTable {
    pairs: BTreeSet<(String, String)>,
}

fn joined(name: &str) -> Option<String> {
    normalize_name(name).ok().map(|t| t.concat())
}

impl SynonymTable {
    /// Parses one tab-separated pair per line; blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, MatchError> {
        let mut table = Self::default();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |message: &str| MatchError::SynonymTable { line: i + 1, message: message.into() };
            let (a, b) = trimmed.split_once('\t').ok_or_else(|| err("expected two names separated by a tab"))?;
            if b.contains('\t') {
                return Err(err("more than two names"));
            }
            if !table.insert(a.trim(), b.trim()) {
                return Err(err("empty name"));
            }
        }
        Ok(table)
    }

    /// Adds a pair; false if either name is empty.
    pub fn insert(&mut self, a: &str, b: &str) -> bool {
        match (joined(a), joined(b)) {
            (Some(a), Some(b)) => {
                self.pairs.insert(if a <= b { (a, b) } else { (b, a) });
                true
            }
            _ => false,
        }
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        match (joined(a), joined(b)) {
            (Some(a), Some(b)) => self.pairs.contains(&if a <= b { (a, b) } else { (b, a) }),
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub threshold: f64,
    pub ngram_n: usize,
    pub weights: StrategyWeights,
    #[serde(default)]
    pub synonyms: SynonymTable,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { threshold: 0.8, ngram_n: 3, weights: StrategyWeights::default(), synonyms: SynonymTable::default() }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), MatchError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(MatchError::InvalidConfig(format!("threshold {} is outside [0, 1]", self.threshold)));
        }
        if self.ngram_n < 1 {
            return Err(MatchError::InvalidN(self.ngram_n));
        }
        let w = [self.weights.exact, self.weights.levenshtein, self.weights.ngram, self.weights.synonym];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(MatchError::InvalidConfig("strategy weights must be finite and non-negative".into()));
        }
        if w.iter().all(|x| *x == 0.0) {
            return Err(MatchError::InvalidConfig("at least one strategy weight must be positive".into()));
        }
        Ok(())
    }
}

/// The winning strategy and its weighted score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub strategy: Strategy,
}

/// Weighted maximum over the strategies, clamped to `[0, 1]`. Ties go to the
/// strategy listed first in [`Strategy`].
pub fn score_names(a: &str, b: &str, config: &MatchConfig) -> Score {
    let (Ok(ta), Ok(tb)) = (normalize_name(a), normalize_name(b)) else {
        return Score { value: 0.0, strategy: Strategy::Exact };
    };
    let (ja, jb) = (ta.concat(), tb.concat());
    let raw = [
        (Strategy::Exact, if ta == tb { 1.0 } else { 0.0 }),
        (Strategy::Levenshtein, levenshtein_similarity(&ja, &jb)),
        (Strategy::Ngram, ngram_similarity(&ja, &jb, config.ngram_n.max(1)).unwrap_or(0.0)),
        (Strategy::Synonym, if config.synonyms.contains(a, b) { 1.0 } else { 0.0 }),
    ];
    let mut best = Score { value: 0.0, strategy: Strategy::Exact };
    for (strategy, s) in raw {
        let value = (s * config.weights.get(strategy)).clamp(0.0, 1.0);
        if value > best.value {
            best = Score { value, strategy };
        }
    }
    best
}

pub fn name_similarity(a: &str, b: &str, config: &MatchConfig) -> f64 {
    score_names(a, b, config).value
}

fn match_suggestion(kind: FrameKind, a: FrameId, b: FrameId, score: Score, related: BTreeSet<FrameId>) -> Suggestion {
    let text = format!("{} names `{}` and `{}` match by {} similarity {:.3}", kind, a, b, score.strategy, score.value);
    let explanation = Explanation {
        kind: ExplanationKind::LexicalMatch,
        text,
        frames: vec![a.clone(), b.clone()],
        score: Some(score.value),
    };
    let operation = match kind {
        FrameKind::Class => Operation::MergeClasses { a, b, name: None },
        FrameKind::Slot => Operation::MergeSlots { a, b, name: None },
        FrameKind::Instance => Operation::MergeInstances { a, b, name: None, confirm: false },
    };
    Suggestion { operation, score: score.value, explanations: vec![explanation], related }
}

/// Sort key: score descending, then names, kind and ontologies.
pub(crate) fn compare_matches(x: &Suggestion, y: &Suggestion) -> Ordering {
    let key = |s: &Suggestion| match &s.operation {
        Operation::MergeClasses { a, b, .. } => (a.name.clone(), b.name.clone(), 0, a.ontology.clone(), b.ontology.clone()),
        Operation::MergeSlots { a, b, .. } => (a.name.clone(), b.name.clone(), 1, a.ontology.clone(), b.ontology.clone()),
        _ => Default::default(),
    };
    y.score.total_cmp(&x.score).then_with(|| key(x).cmp(&key(y)))
}

/// Cross-ontology class and slot pairs scoring at least the threshold.
/// Slot pairs of different kinds are never proposed.
pub fn initial_matches(o1: &Ontology, o2: &Ontology, config: &MatchConfig) -> Vec<Suggestion> {
    let mut out = Vec::new();
    for (c1, _) in &o1.classes {
        for (c2, _) in &o2.classes {
            let score = score_names(c1, c2, config);
            if score.value >= config.threshold {
                let (a, b) = (o1.frame_id(c1), o2.frame_id(c2));
                let mut related: BTreeSet<FrameId> = [a.clone(), b.clone()].into();
                related.extend(o1.attached_slots(c1).into_iter().map(|s| o1.frame_id(s)));
                related.extend(o2.attached_slots(c2).into_iter().map(|s| o2.frame_id(s)));
                out.push(match_suggestion(FrameKind::Class, a, b, score, related));
            }
        }
    }
    for (s1, f1) in &o1.slots {
        for (s2, f2) in &o2.slots {
            if f1.kind() != f2.kind() {
                continue;
            }
            let score = score_names(s1, s2, config);
            if score.value >= config.threshold {
                let (a, b) = (o1.frame_id(s1), o2.frame_id(s2));
                let mut related: BTreeSet<FrameId> = [a.clone(), b.clone()].into();
                for (o, f) in [(o1, f1), (o2, f2)] {
                    related.extend(f.domain.iter().map(|c| o.frame_id(c)));
                    if let crate::RangeSpec::Classes(r) = &f.range {
                        related.extend(r.iter().map(|c| o.frame_id(c)));
                    }
                }
                out.push(match_suggestion(FrameKind::Slot, a, b, score, related));
            }
        }
    }
    out.sort_by(compare_matches);
    out
}

/// [`initial_matches`] over every pair of sources, in one ordered list.
pub fn initial_matches_all(sources: &[Ontology], config: &MatchConfig) -> Vec<Suggestion> {
    let mut out = Vec::new();
    for (i, o1) in sources.iter().enumerate() {
        for o2 in &sources[i + 1..] {
            out.extend(initial_matches(o1, o2, config));
        }
    }
    out.sort_by(compare_matches);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_eq, prop_oneof, proptest, Just};
    use proptest::strategy::Strategy as _;

    fn naive_levenshtein(a: &[char], b: &[char]) -> usize {
        match (a.split_last(), b.split_last()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ra)), Some((y, rb))) => {
                let sub = naive_levenshtein(ra, rb) + usize::from(x != y);
                sub.min(naive_levenshtein(ra, b) + 1).min(naive_levenshtein(a, rb) + 1)
            }
        }
    }

    /// Enumerates padded grams into a list and intersects by repeated removal.
    fn naive_dice(a: &str, b: &str, n: usize) -> f64 {
        let grams = |s: &str| -> Vec<String> {
            let padded = format!("{}{}{}", "\0".repeat(n - 1), s, "\0".repeat(n - 1));
            let chars: Vec<char> = padded.chars().collect();
            (0..chars.len().saturating_sub(n - 1)).map(|i| chars[i..i + n].iter().collect()).collect()
        };
        let (ga, mut gb) = (grams(a), grams(b));
        let total = ga.len() + gb.len();
        let mut common = 0;
        for g in &ga {
            if let Some(pos) = gb.iter().position(|x| x == g) {
                gb.remove(pos);
                common += 1;
            }
        }
        2.0 * common as f64 / total as f64
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_name("Ruby_bibliography").unwrap(), ["ruby", "bibliography"]);
        assert_eq!(normalize_name("hasBiblioentry").unwrap(), ["has", "biblioentry"]);
        assert_eq!(normalize_name("bib").unwrap(), ["bib"]);
        assert_eq!(normalize_name("XMLParser").unwrap(), ["xml", "parser"]);
        assert_eq!(normalize_name("page2Count-x").unwrap(), ["page2", "count", "x"]);
        assert_eq!(normalize_name("C1").unwrap(), ["c1"]);
        assert_eq!(normalize_name(""), Err(MatchError::EmptyName));
        assert_eq!(normalize_name("_-_"), Err(MatchError::EmptyName));
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(naive_levenshtein(&['k', 'i', 't', 't', 'e', 'n'], &['s', 'i', 't', 't', 'i', 'n', 'g']), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("same", "same"), 0);
        assert_eq!(levenshtein_similarity("", ""), 1.0);
    }

    #[test]
    fn bibliography_versus_bib() {
        let oracle = naive_dice("bibliography", "bib", 3);
        assert_eq!(oracle, 6.0 / 19.0);
        assert_eq!(ngram_similarity("bibliography", "bib", 3).unwrap(), oracle);
        assert_eq!(levenshtein("bibliography", "bib"), 9);
        let s = name_similarity("bibliography", "bib", &MatchConfig::default());
        assert_eq!(s, 0.25_f64.max(6.0 / 19.0));
        assert!(s < 0.8);
    }

    #[test]
    fn ngram_edges() {
        assert_eq!(ngram_similarity("abc", "xyz", 3).unwrap(), 0.0);
        assert_eq!(ngram_similarity("", "", 3).unwrap(), 1.0);
        assert_eq!(ngram_similarity("Title", "title", 2).unwrap(), 1.0);
        assert_eq!(ngram_similarity("a", "b", 0), Err(MatchError::InvalidN(0)));
        assert_eq!(ngram_similarity("", "a", 1).unwrap(), 0.0);
    }

    #[test]
    fn synonyms_and_exact() {
        let config = MatchConfig { synonyms: SynonymTable::parse("# pairs\nGender\tSex\n\n").unwrap(), ..Default::default() };
        assert_eq!(score_names("Sex", "Gender", &config), Score { value: 1.0, strategy: Strategy::Synonym });
        assert_eq!(score_names("author", "author", &config), Score { value: 1.0, strategy: Strategy::Exact });
        assert!(matches!(SynonymTable::parse("a b"), Err(MatchError::SynonymTable { line: 1, .. })));
        assert!(matches!(SynonymTable::parse("ok\tfine\na\tb\tc"), Err(MatchError::SynonymTable { line: 2, .. })));
    }

    #[test]
    fn weights_scale_and_validate() {
        let mut config = MatchConfig::default();
        config.weights = StrategyWeights { exact: 0.0, levenshtein: 0.5, ngram: 0.0, synonym: 0.0 };
        assert_eq!(name_similarity("author", "author", &config), 0.5);
        config.weights.levenshtein = 0.0;
        assert!(config.validate().is_err());
        assert!(MatchConfig { threshold: 1.5, ..Default::default() }.validate().is_err());
        assert!(MatchConfig::default().validate().is_ok());
    }

    #[test]
    fn empty_ontologies_have_no_matches() {
        assert!(initial_matches(&Ontology::new("a"), &Ontology::new("b"), &MatchConfig::default()).is_empty());
    }

    #[test]
    fn matches_are_sorted_and_kind_checked() {
        let mut o1 = Ontology::new("o1");
        o1.add_class("author", Vec::<String>::new()).unwrap();
        o1.add_class("authors", Vec::<String>::new()).unwrap();
        o1.add_slot("name", crate::SlotFrame::datatype(["author".to_string()], crate::XsdKind::String)).unwrap();
        let mut o2 = Ontology::new("o2");
        o2.add_class("author", Vec::<String>::new()).unwrap();
        o2.add_slot("name", crate::SlotFrame::object(["author".to_string()], ["author".to_string()])).unwrap();
        let m = initial_matches(&o1, &o2, &MatchConfig::default());
        let ops: Vec<String> = m.iter().map(|s| format!("{:?}", s.operation)).collect();
        assert_eq!(m.len(), 2, "{ops:?}");
        assert_eq!(m[0].score, 1.0);
        assert!(matches!(&m[1].operation, Operation::MergeClasses { a, .. } if a.name == "authors"));
        assert_eq!(m[0].explanations[0].kind, ExplanationKind::LexicalMatch);
    }

    fn abc(max: usize) -> impl proptest::strategy::Strategy<Value = String> {
        proptest::collection::vec(prop_oneof![Just('a'), Just('b'), Just('c')], 0..=max)
            .prop_map(|v| v.into_iter().collect())
    }

    proptest! {
        #[test]
        fn dp_equals_naive_recursion(a in abc(7), b in abc(7)) {
            let (ca, cb): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
            prop_assert_eq!(levenshtein(&a, &b), naive_levenshtein(&ca, &cb));
        }

        #[test]
        fn levenshtein_is_a_metric(a in "[a-e]{0,10}", b in "[a-e]{0,10}", c in "[a-e]{0,10}") {
            prop_assert_eq!(levenshtein(&a, &a), 0);
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
            prop_assert_eq!(levenshtein(&a, &b) == 0, a == b);
        }

        #[test]
        fn ngram_bounded_symmetric(a in "[a-dA-D]{0,12}", b in "[a-dA-D]{0,12}", n in 1usize..5) {
            let s = ngram_similarity(&a, &b, n).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, ngram_similarity(&b, &a, n).unwrap());
            let (la, lb) = (a.to_lowercase(), b.to_lowercase());
            if !(la.is_empty() && lb.is_empty()) {
                prop_assert_eq!(s, naive_dice(&la, &lb, n));
            }
        }

        #[test]
        fn name_similarity_symmetric(a in "[a-zA-Z_]{1,12}", b in "[a-zA-Z_]{1,12}") {
            let config = MatchConfig::default();
            prop_assert_eq!(name_similarity(&a, &b, &config), name_similarity(&b, &a, &config));
        }
    }
}
