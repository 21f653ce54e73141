//! Sentences, spans, facts and the role schema they are tagged with.
//!
//! A fact is a set of role-tagged elements. Each element is either one or
//! more token spans (several spans make the element discontinuous) or, for the
//! predicate only, a virtual predicate that does not appear in the text.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SUBJECT: &str = "subject";
pub const PREDICATE: &str = "predicate";
pub const OBJECT: &str = "object";

const SAOKE_ROLES: [&str; 6] = ["subject", "predicate", "object", "time", "place", "qualifier"];
const SAOKE_VIRTUAL: [&str; 7] = ["=", "BIRTH", "DEATH", "NOT", "DESC", "ISA", "IN"];

/// Role vocabulary plus virtual-predicate vocabulary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct Schema {
    roles: Vec<String>,
    virtual_predicates: Vec<String>,
}

#[derive(Deserialize)]
struct RawSchema {
    roles: Vec<String>,
    #[serde(default)]
    virtual_predicates: Vec<String>,
}

impl TryFrom<RawSchema> for Schema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        Schema::new(raw.roles, raw.virtual_predicates)
    }
}

impl Schema {
    pub fn new<R, V>(roles: R, virtual_predicates: V) -> Result<Self>
    where
        R: IntoIterator,
        R::Item: Into<String>,
        V: IntoIterator,
        V::Item: Into<String>,
    {
        let roles: Vec<String> = roles.into_iter().map(Into::into).collect();
        let virtual_predicates: Vec<String> =
            virtual_predicates.into_iter().map(Into::into).collect();
        if roles.is_empty() {
            return Err(Error::EmptySchema);
        }
        let mut seen = HashSet::new();
        for role in &roles {
            if role.is_empty() {
                return Err(Error::InvalidSchema("empty role name".into()));
            }
            if !seen.insert(role.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate role `{role}`")));
            }
        }
        let mut seen = HashSet::new();
        for name in &virtual_predicates {
            if name.is_empty() {
                return Err(Error::InvalidSchema("empty virtual predicate name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate virtual predicate `{name}`"
                )));
            }
        }
        Ok(Schema {
            roles,
            virtual_predicates,
        })
    }

    /// The six-role, seven-virtual-predicate schema used by SAOKE-style corpora.
    pub fn saoke() -> Self {
        Schema {
            roles: SAOKE_ROLES.iter().map(|s| s.to_string()).collect(),
            virtual_predicates: SAOKE_VIRTUAL.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn roles(&self) -> &[String] {
        &self.roles
    }

    pub fn virtual_predicates(&self) -> &[String] {
        &self.virtual_predicates
    }

    pub fn role_index(&self, role: &str) -> Option<usize> {
        self.roles.iter().position(|r| r == role)
    }

    pub fn virtual_index(&self, name: &str) -> Option<usize> {
        self.virtual_predicates.iter().position(|v| v == name)
    }
}

impl Default for Schema {
    fn default() -> Self {
        Schema::saoke()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn new<T>(id: impl Into<String>, tokens: T) -> Result<Self>
    where
        T: IntoIterator,
        T::Item: Into<String>,
    {
        let id = id.into();
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(Error::InvalidRecord {
                id,
                message: "sentence has no tokens".into(),
            });
        }
        if let Some(pos) = tokens.iter().position(|t| t.is_empty()) {
            return Err(Error::InvalidRecord {
                id,
                message: format!("token {pos} is empty"),
            });
        }
        Ok(Sentence { id, tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn span_text(&self, span: Span) -> String {
        self.tokens[span.begin..=span.end].join(" ")
    }
}

/// Inclusive token range `[begin, end]`, 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub begin: usize,
    pub end: usize,
}

impl Span {
    pub const fn new(begin: usize, end: usize) -> Self {
        Span { begin, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.begin
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_valid_for(&self, n: usize) -> bool {
        self.begin <= self.end && self.end < n
    }

    pub fn intersects(&self, other: &Span) -> bool {
        self.begin <= other.end && other.begin <= self.end
    }
}

impl From<[usize; 2]> for Span {
    fn from([begin, end]: [usize; 2]) -> Self {
        Span { begin, end }
    }
}

impl From<Span> for [usize; 2] {
    fn from(span: Span) -> Self {
        [span.begin, span.end]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.begin, self.end)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Element {
    pub role: String,
    #[serde(default)]
    pub spans: Vec<Span>,
    #[serde(rename = "virtual", default)]
    pub virtual_predicate: Option<String>,
}

impl Element {
    /// Builds a concrete element; spans are put in text order.
    pub fn concrete(role: impl Into<String>, spans: impl IntoIterator<Item = Span>) -> Self {
        let mut spans: Vec<Span> = spans.into_iter().collect();
        spans.sort();
        Element {
            role: role.into(),
            spans,
            virtual_predicate: None,
        }
    }

    pub fn span(role: impl Into<String>, begin: usize, end: usize) -> Self {
        Element::concrete(role, [Span::new(begin, end)])
    }

    /// A predicate element naming a virtual predicate.
    pub fn virtual_predicate(name: impl Into<String>) -> Self {
        Element {
            role: PREDICATE.to_string(),
            spans: Vec::new(),
            virtual_predicate: Some(name.into()),
        }
    }

    pub fn is_virtual(&self) -> bool {
        self.virtual_predicate.is_some()
    }

    /// Token positions covered by the element, ascending.
    pub fn token_positions(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.spans.iter().flat_map(|s| s.begin..=s.end).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Surface words of the element; a virtual predicate is its name.
    pub fn words<'a>(&'a self, sentence: &'a Sentence) -> Vec<&'a str> {
        match &self.virtual_predicate {
            Some(name) => vec![name.as_str()],
            None => self
                .spans
                .iter()
                .flat_map(|s| sentence.tokens[s.begin..=s.end].iter().map(String::as_str))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub elements: Vec<Element>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl Fact {
    pub fn new(elements: impl IntoIterator<Item = Element>) -> Self {
        Fact {
            elements: elements.into_iter().collect(),
            confidence: None,
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = Some(confidence);
        self
    }

    pub fn elements_with_role<'a>(&'a self, role: &'a str) -> impl Iterator<Item = &'a Element> {
        self.elements.iter().filter(move |e| e.role == role)
    }

    /// Number of concrete spans across all elements.
    pub fn span_count(&self) -> usize {
        self.elements.iter().map(|e| e.spans.len()).sum()
    }

    pub fn virtual_predicate(&self) -> Option<&str> {
        self.elements
            .iter()
            .find_map(|e| e.virtual_predicate.as_deref())
    }

    /// Merges all elements of a role into one, splicing their spans in text order.
    pub fn spliced(&self, schema: &Schema) -> Fact {
        let mut by_role: BTreeMap<(usize, String), Element> = BTreeMap::new();
        for element in &self.elements {
            let key = (
                schema.role_index(&element.role).unwrap_or(usize::MAX),
                element.role.clone(),
            );
            let merged = by_role.entry(key).or_insert_with(|| Element {
                role: element.role.clone(),
                spans: Vec::new(),
                virtual_predicate: None,
            });
            merged.spans.extend(element.spans.iter().copied());
            if merged.virtual_predicate.is_none() {
                merged.virtual_predicate = element.virtual_predicate.clone();
            }
        }
        let elements = by_role
            .into_values()
            .map(|mut e| {
                e.spans.sort();
                e.spans.dedup();
                e
            })
            .collect();
        Fact {
            elements,
            confidence: self.confidence,
        }
    }
}

/// Order-independent structural identity of a fact (confidence excluded).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactKey(Vec<(usize, String, Vec<Span>, Option<String>)>);

impl FactKey {
    pub fn of(fact: &Fact, schema: &Schema) -> Self {
        let mut parts: Vec<_> = fact
            .elements
            .iter()
            .map(|e| {
                (
                    schema.role_index(&e.role).unwrap_or(usize::MAX),
                    e.role.clone(),
                    e.spans.clone(),
                    e.virtual_predicate.clone(),
                )
            })
            .collect();
        parts.sort();
        FactKey(parts)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedSentence {
    pub sentence: Sentence,
    pub facts: Vec<Fact>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ViolationCode {
    UnknownRole,
    UnknownVirtual,
    SpanOutOfRange,
    EmptyElement,
    VirtualOnNonPredicate,
    VirtualWithSpans,
    OverlappingSpans,
    UnsortedSpans,
    MissingSubject,
    MissingPredicate,
    DuplicateRole,
    ConfidenceOutOfRange,
}

impl ViolationCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationCode::UnknownRole => "unknown-role",
            ViolationCode::UnknownVirtual => "unknown-virtual",
            ViolationCode::SpanOutOfRange => "span-out-of-range",
            ViolationCode::EmptyElement => "empty-element",
            ViolationCode::VirtualOnNonPredicate => "virtual-on-non-predicate",
            ViolationCode::VirtualWithSpans => "virtual-with-spans",
            ViolationCode::OverlappingSpans => "overlapping-spans",
            ViolationCode::UnsortedSpans => "unsorted-spans",
            ViolationCode::MissingSubject => "missing-subject",
            ViolationCode::MissingPredicate => "missing-predicate",
            ViolationCode::DuplicateRole => "duplicate-role",
            ViolationCode::ConfidenceOutOfRange => "confidence-out-of-range",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

/// Collects every invariant violation of `fact`; an empty list means the fact is valid.
pub fn validate_fact(fact: &Fact, sentence: &Sentence, schema: &Schema) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |code, message: String| out.push(Violation { code, message });

    if let Some(c) = fact.confidence {
        if !(0.0..=1.0).contains(&c) {
            push(
                ViolationCode::ConfidenceOutOfRange,
                format!("confidence {c} outside [0,1]"),
            );
        }
    }

    let mut role_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (idx, element) in fact.elements.iter().enumerate() {
        *role_counts.entry(element.role.as_str()).or_default() += 1;
        if schema.role_index(&element.role).is_none() {
            push(
                ViolationCode::UnknownRole,
                format!("element {idx} has unknown role `{}`", element.role),
            );
        }
        match &element.virtual_predicate {
            Some(name) => {
                if element.role != PREDICATE {
                    push(
                        ViolationCode::VirtualOnNonPredicate,
                        format!("element {idx} with role `{}` is virtual", element.role),
                    );
                }
                if schema.virtual_index(name).is_none() {
                    push(
                        ViolationCode::UnknownVirtual,
                        format!("element {idx} names unknown virtual predicate `{name}`"),
                    );
                }
                if !element.spans.is_empty() {
                    push(
                        ViolationCode::VirtualWithSpans,
                        format!("element {idx} is virtual but has spans"),
                    );
                }
            }
            None if element.spans.is_empty() => push(
                ViolationCode::EmptyElement,
                format!("element {idx} has neither spans nor a virtual predicate"),
            ),
            None => {}
        }
        for span in &element.spans {
            if !span.is_valid_for(sentence.len()) {
                push(
                    ViolationCode::SpanOutOfRange,
                    format!(
                        "element {idx} span [{},{}] invalid for {} tokens",
                        span.begin,
                        span.end,
                        sentence.len()
                    ),
                );
            }
        }
        for pair in element.spans.windows(2) {
            if pair[0] > pair[1] {
                push(
                    ViolationCode::UnsortedSpans,
                    format!("element {idx} spans are not in text order"),
                );
            } else if pair[0].intersects(&pair[1]) {
                push(
                    ViolationCode::OverlappingSpans,
                    format!("element {idx} has overlapping spans"),
                );
            }
        }
    }

    if !role_counts.contains_key(SUBJECT) {
        push(ViolationCode::MissingSubject, "fact has no subject".into());
    }
    if !role_counts.contains_key(PREDICATE) {
        push(ViolationCode::MissingPredicate, "fact has no predicate".into());
    }
    for (role, count) in role_counts {
        if count > 1 && role != OBJECT {
            push(
                ViolationCode::DuplicateRole,
                format!("role `{role}` appears {count} times"),
            );
        }
    }
    out
}

/// A concrete span of a fact together with its role (index into the schema).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoleSpan {
    pub span: Span,
    pub role: usize,
}

/// All concrete spans of `fact` in text order; identical spans tie-break by schema role order.
pub fn ordered_fact_spans(fact: &Fact, schema: &Schema) -> Result<Vec<RoleSpan>> {
    let mut out = Vec::with_capacity(fact.span_count());
    for element in &fact.elements {
        if element.is_virtual() {
            continue;
        }
        let role = schema
            .role_index(&element.role)
            .ok_or_else(|| Error::UnknownRole(element.role.clone()))?;
        out.extend(element.spans.iter().map(|&span| RoleSpan { span, role }));
    }
    out.sort();
    if let Some(pair) = out.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateSpan {
            begin: pair[0].span.begin,
            end: pair[0].span.end,
            role: schema.roles()[pair[0].role].clone(),
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ComplicationFlags {
    pub overlapping: bool,
    pub discontinuous: bool,
    pub nested: bool,
}

impl ComplicationFlags {
    pub fn is_complicated(&self) -> bool {
        self.overlapping || self.discontinuous || self.nested
    }
}

/// Flags a sentence as overlapping, discontinuous and/or nested.
///
/// Overlap needs two facts holding an identical concrete element (same role,
/// same spans). Nesting needs two elements whose token sets intersect but
/// differ; elements covering exactly the same tokens are not nested.
pub fn classify_sentence(annotated: &AnnotatedSentence) -> ComplicationFlags {
    let mut flags = ComplicationFlags::default();

    flags.discontinuous = annotated
        .facts
        .iter()
        .flat_map(|f| &f.elements)
        .any(|e| e.spans.len() >= 2);

    let mut owner: BTreeMap<(&str, &[Span]), usize> = BTreeMap::new();
    'facts: for (fact_idx, fact) in annotated.facts.iter().enumerate() {
        for element in fact.elements.iter().filter(|e| !e.is_virtual()) {
            match owner.get(&(element.role.as_str(), element.spans.as_slice())) {
                Some(&other) if other != fact_idx => {
                    flags.overlapping = true;
                    break 'facts;
                }
                Some(_) => {}
                None => {
                    owner.insert((element.role.as_str(), element.spans.as_slice()), fact_idx);
                }
            }
        }
    }

    let mut token_sets: Vec<Vec<usize>> = annotated
        .facts
        .iter()
        .flat_map(|f| &f.elements)
        .filter(|e| !e.spans.is_empty())
        .map(Element::token_positions)
        .collect();
    token_sets.sort();
    token_sets.dedup();
    'outer: for (i, a) in token_sets.iter().enumerate() {
        for b in &token_sets[i + 1..] {
            if sorted_intersect(a, b) {
                flags.nested = true;
                break 'outer;
            }
        }
    }
    flags
}

fn sorted_intersect(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Canonical text of a fact: elements in schema role order joined by `" | "`.
pub fn fact_to_string(fact: &Fact, sentence: &Sentence, schema: &Schema) -> String {
    let mut elements: Vec<&Element> = fact.elements.iter().collect();
    elements.sort_by(|a, b| {
        let ka = schema.role_index(&a.role).unwrap_or(usize::MAX);
        let kb = schema.role_index(&b.role).unwrap_or(usize::MAX);
        ka.cmp(&kb)
            .then_with(|| a.role.cmp(&b.role))
            .then_with(|| a.spans.cmp(&b.spans))
            .then_with(|| a.virtual_predicate.cmp(&b.virtual_predicate))
    });
    elements
        .iter()
        .map(|e| e.words(sentence).join(" "))
        .collect::<Vec<_>>()
        .join(" | ")
}
