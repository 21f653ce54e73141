//! Directed-acyclic-graph expression of facts over a token-pair edge matrix.
//!
//! Every fact becomes a chain of its spans in text order. Three edge families
//! carry it:
//!
//! * `I` joins the first and last word of each span;
//! * `EB-X` and `EE` join the last word of a span to the first and last word
//!   of the next span in the fact, where `X` is the next span's role;
//! * `BE-X` joins the first word of the first span to the last word of the
//!   last span, where `X` is the first span's role.
//!
//! A virtual predicate is a `VIRT` label on the first object span's boundary
//! cell. Decoding starts from each `BE-X` cell and follows every chain of
//! `EB`/`EE`/`I` edges that ends on the `BE` column.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::model::{
    fact_to_string, ordered_fact_spans, AnnotatedSentence, Element, Fact, FactKey, RoleSpan,
    Schema, Sentence, Span, OBJECT, PREDICATE, SUBJECT,
};

/// Upper bound on chains explored from one start cell; noisy predicted
/// matrices can otherwise blow up combinatorially.
pub const MAX_PATHS_PER_START: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeType {
    /// Fact boundary, tagged with the first span's role.
    Be(usize),
    /// Root marker on the first span, used when `BE` edges are ablated.
    Root(usize),
    /// Virtual predicate attached to the first object span.
    Virtual(usize),
    Ee,
    I,
    /// Next-span edge tagged with the next span's role.
    Eb(usize),
    /// Next-span edge tagged with (current role, next role).
    EbPair(usize, usize),
}

/// Which edge families the codec uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CodecVariant {
    pub use_ee: bool,
    pub use_be: bool,
    pub role_pair_labels: bool,
}

impl CodecVariant {
    pub const FULL: CodecVariant = CodecVariant {
        use_ee: true,
        use_be: true,
        role_pair_labels: false,
    };
    pub const NO_EE: CodecVariant = CodecVariant {
        use_ee: false,
        ..CodecVariant::FULL
    };
    pub const NO_BE: CodecVariant = CodecVariant {
        use_be: false,
        ..CodecVariant::FULL
    };
    pub const ROLE_PAIR: CodecVariant = CodecVariant {
        role_pair_labels: true,
        ..CodecVariant::FULL
    };
}

impl Default for CodecVariant {
    fn default() -> Self {
        CodecVariant::FULL
    }
}

impl fmt::Display for CodecVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CodecVariant::FULL => f.write_str("full"),
            CodecVariant::NO_EE => f.write_str("no-ee"),
            CodecVariant::NO_BE => f.write_str("no-be"),
            CodecVariant::ROLE_PAIR => f.write_str("role-pair"),
            v => write!(
                f,
                "ee={},be={},role-pair={}",
                v.use_ee, v.use_be, v.role_pair_labels
            ),
        }
    }
}

/// The ordered label channels of the edge matrix for one schema and variant.
#[derive(Clone, Debug)]
pub struct EdgeTypeSpace {
    schema: Schema,
    variant: CodecVariant,
    types: Vec<EdgeType>,
    index: HashMap<EdgeType, usize>,
}

pub fn edge_type_space(schema: &Schema, variant: CodecVariant) -> Result<EdgeTypeSpace> {
    let r = schema.roles().len();
    if r == 0 {
        return Err(Error::EmptySchema);
    }
    let mut types = Vec::new();
    if variant.use_be {
        types.extend((0..r).map(EdgeType::Be));
    } else {
        types.extend((0..r).map(EdgeType::Root));
    }
    types.extend((0..schema.virtual_predicates().len()).map(EdgeType::Virtual));
    if variant.use_ee {
        types.push(EdgeType::Ee);
    }
    types.push(EdgeType::I);
    if variant.role_pair_labels {
        for from in 0..r {
            types.extend((0..r).map(|to| EdgeType::EbPair(from, to)));
        }
    } else {
        types.extend((0..r).map(EdgeType::Eb));
    }
    let index = types.iter().enumerate().map(|(k, &t)| (t, k)).collect();
    Ok(EdgeTypeSpace {
        schema: schema.clone(),
        variant,
        types,
        index,
    })
}

impl EdgeTypeSpace {
    pub fn new(schema: &Schema, variant: CodecVariant) -> Result<Self> {
        edge_type_space(schema, variant)
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn variant(&self) -> CodecVariant {
        self.variant
    }

    pub fn types(&self) -> &[EdgeType] {
        &self.types
    }

    pub fn channel(&self, ty: EdgeType) -> Option<usize> {
        self.index.get(&ty).copied()
    }

    pub fn type_at(&self, channel: usize) -> Option<EdgeType> {
        self.types.get(channel).copied()
    }

    pub fn name(&self, channel: usize) -> String {
        let roles = self.schema.roles();
        match self.types[channel] {
            EdgeType::Be(r) => format!("BE-{}", roles[r]),
            EdgeType::Root(r) => format!("ROOT-{}", roles[r]),
            EdgeType::Virtual(v) => format!("{OBJECT}->{}", self.schema.virtual_predicates()[v]),
            EdgeType::Ee => "EE".to_string(),
            EdgeType::I => "I".to_string(),
            EdgeType::Eb(r) => format!("EB-{}", roles[r]),
            EdgeType::EbPair(a, b) => format!("EB-{}->{}", roles[a], roles[b]),
        }
    }

    pub fn channel_by_name(&self, name: &str) -> Option<usize> {
        (0..self.types.len()).find(|&k| self.name(k) == name)
    }

    fn required(&self, ty: EdgeType) -> usize {
        self.channel(ty)
            .expect("edge type belongs to the space it was built from")
    }
}

/// Multi-label edge matrix over token pairs `i <= j`.
///
/// Entries carry an optional probability; gold matrices have none.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMatrix {
    n: usize,
    channels: usize,
    entries: BTreeMap<(usize, usize, usize), Option<f64>>,
}

impl EdgeMatrix {
    pub fn new(n: usize, channels: usize) -> Self {
        EdgeMatrix {
            n,
            channels,
            entries: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn has_probabilities(&self) -> bool {
        self.entries.values().any(Option::is_some)
    }

    /// Adds a label; re-inserting an existing cell keeps the larger probability.
    pub fn insert(&mut self, i: usize, j: usize, channel: usize, prob: Option<f64>) -> Result<()> {
        if i > j || j >= self.n || channel >= self.channels {
            return Err(Error::ShapeMismatch(format!(
                "entry ({i},{j},{channel}) outside {n}x{n}x{c} upper triangle",
                n = self.n,
                c = self.channels
            )));
        }
        if let Some(p) = prob {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ShapeMismatch(format!("probability {p} outside [0,1]")));
            }
        }
        self.entries
            .entry((i, j, channel))
            .and_modify(|old| {
                *old = match (*old, prob) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    (a, b) => a.or(b),
                }
            })
            .or_insert(prob);
        Ok(())
    }

    pub fn contains(&self, i: usize, j: usize, channel: usize) -> bool {
        self.entries.contains_key(&(i, j, channel))
    }

    pub fn probability(&self, i: usize, j: usize, channel: usize) -> Option<Option<f64>> {
        self.entries.get(&(i, j, channel)).copied()
    }

    /// Entries sorted by `(i, j, channel)`.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize, usize), Option<f64>)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    /// One edge per line: `i<TAB>j<TAB>edge-type-name<TAB>probability`.
    /// A gold entry without probability is written as `-`.
    pub fn to_tsv(&self, space: &EdgeTypeSpace) -> String {
        let mut out = String::new();
        for ((i, j, k), p) in self.iter() {
            let p = match p {
                Some(p) => format!("{p}"),
                None => "-".to_string(),
            };
            let _ = writeln!(out, "{i}\t{j}\t{}\t{p}", space.name(k));
        }
        out
    }

    pub fn from_tsv(text: &str, n: usize, space: &EdgeTypeSpace) -> Result<Self> {
        let mut matrix = EdgeMatrix::new(n, space.len());
        let mut offset = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line_offset = offset;
            offset += line.len() + 1;
            let trimmed = line.trim_end_matches('\r');
            if trimmed.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: lineno + 1,
                offset: line_offset,
                message,
            };
            let fields: Vec<&str> = trimmed.split('\t').collect();
            if fields.len() != 4 {
                return Err(parse_err(format!("expected 4 fields, got {}", fields.len())));
            }
            let i: usize = fields[0]
                .parse()
                .map_err(|_| parse_err(format!("bad row index `{}`", fields[0])))?;
            let j: usize = fields[1]
                .parse()
                .map_err(|_| parse_err(format!("bad column index `{}`", fields[1])))?;
            let k = space
                .channel_by_name(fields[2])
                .ok_or_else(|| parse_err(format!("unknown edge type `{}`", fields[2])))?;
            let p = match fields[3] {
                "-" => None,
                s => Some(
                    s.parse::<f64>()
                        .map_err(|_| parse_err(format!("bad probability `{s}`")))?,
                ),
            };
            matrix
                .insert(i, j, k, p)
                .map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(matrix)
    }
}

/// Why a fact could not be written into the matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UncoverableReason {
    /// Consecutive spans overlap or touch, so an inter-span edge would not point forward.
    BackwardEdge,
    /// A virtual predicate needs an object span to hang on.
    VirtualWithoutObject,
    DuplicateSpan,
    NoConcreteSpan,
}

impl UncoverableReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            UncoverableReason::BackwardEdge => "backward-edge",
            UncoverableReason::VirtualWithoutObject => "virtual-without-object",
            UncoverableReason::DuplicateSpan => "duplicate-span",
            UncoverableReason::NoConcreteSpan => "no-concrete-span",
        }
    }
}

impl fmt::Display for UncoverableReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EncodeReport {
    pub facts_total: usize,
    pub facts_encoded: usize,
    pub facts_uncoverable: usize,
    pub reasons: Vec<(usize, UncoverableReason)>,
}

/// A labeled cell `(i, j, channel)`.
pub type Edge = (usize, usize, usize);

/// Edges of one fact, in emission order, before any union with other facts.
pub fn fact_edges(
    fact: &Fact,
    space: &EdgeTypeSpace,
) -> Result<std::result::Result<Vec<Edge>, UncoverableReason>> {
    let schema = space.schema();
    let variant = space.variant();
    let spans = match ordered_fact_spans(fact, schema) {
        Ok(spans) => spans,
        Err(Error::DuplicateSpan { .. }) => return Ok(Err(UncoverableReason::DuplicateSpan)),
        Err(e) => return Err(e),
    };
    let virtual_idx = match fact.virtual_predicate() {
        Some(name) => Some(
            schema
                .virtual_index(name)
                .ok_or_else(|| Error::UnknownVirtual(name.to_string()))?,
        ),
        None => None,
    };
    let (first, last) = match (spans.first(), spans.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Ok(Err(UncoverableReason::NoConcreteSpan)),
    };
    if spans.windows(2).any(|w| w[0].span.end >= w[1].span.begin) {
        return Ok(Err(UncoverableReason::BackwardEdge));
    }

    let mut edges = Vec::with_capacity(3 * spans.len());
    for rs in &spans {
        edges.push((rs.span.begin, rs.span.end, space.required(EdgeType::I)));
    }
    for pair in spans.windows(2) {
        let (cur, next) = (pair[0], pair[1]);
        let eb = if variant.role_pair_labels {
            EdgeType::EbPair(cur.role, next.role)
        } else {
            EdgeType::Eb(next.role)
        };
        edges.push((cur.span.end, next.span.begin, space.required(eb)));
        if variant.use_ee {
            edges.push((cur.span.end, next.span.end, space.required(EdgeType::Ee)));
        }
    }
    if variant.use_be {
        edges.push((
            first.span.begin,
            last.span.end,
            space.required(EdgeType::Be(first.role)),
        ));
    } else {
        edges.push((
            first.span.begin,
            first.span.end,
            space.required(EdgeType::Root(first.role)),
        ));
    }
    if let Some(v) = virtual_idx {
        let object = schema.role_index(OBJECT);
        let Some(obj) = spans.iter().find(|rs| Some(rs.role) == object) else {
            return Ok(Err(UncoverableReason::VirtualWithoutObject));
        };
        edges.push((obj.span.begin, obj.span.end, space.required(EdgeType::Virtual(v))));
    }
    Ok(Ok(edges))
}

/// Writes every coverable fact of a sentence into one edge matrix.
pub fn encode(
    annotated: &AnnotatedSentence,
    schema: &Schema,
    variant: CodecVariant,
) -> Result<(EdgeMatrix, EncodeReport)> {
    let space = edge_type_space(schema, variant)?;
    encode_with(annotated, &space)
}

pub fn encode_with(
    annotated: &AnnotatedSentence,
    space: &EdgeTypeSpace,
) -> Result<(EdgeMatrix, EncodeReport)> {
    let mut matrix = EdgeMatrix::new(annotated.sentence.len(), space.len());
    let mut report = EncodeReport {
        facts_total: annotated.facts.len(),
        ..EncodeReport::default()
    };
    for (idx, fact) in annotated.facts.iter().enumerate() {
        match fact_edges(fact, space)? {
            Ok(edges) => {
                for (i, j, k) in edges {
                    matrix.insert(i, j, k, None)?;
                }
                report.facts_encoded += 1;
            }
            Err(reason) => {
                report.facts_uncoverable += 1;
                report.reasons.push((idx, reason));
            }
        }
    }
    Ok((matrix, report))
}

/// How edge probabilities along a decoded chain combine into a fact confidence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ConfidenceAggregation {
    #[default]
    Min,
    Mean,
}

impl ConfidenceAggregation {
    pub fn combine(&self, probs: &[f64]) -> f64 {
        match self {
            ConfidenceAggregation::Min => probs.iter().copied().fold(1.0, f64::min),
            ConfidenceAggregation::Mean if probs.is_empty() => 1.0,
            ConfidenceAggregation::Mean => probs.iter().sum::<f64>() / probs.len() as f64,
        }
    }
}

pub fn decode(
    matrix: &EdgeMatrix,
    sentence: &Sentence,
    schema: &Schema,
    variant: CodecVariant,
) -> Result<Vec<Fact>> {
    let space = edge_type_space(schema, variant)?;
    Decoder::new(&space).decode(matrix, sentence)
}

/// Reusable decoder bound to one edge-type space.
#[derive(Clone, Debug)]
pub struct Decoder<'a> {
    space: &'a EdgeTypeSpace,
    aggregation: ConfidenceAggregation,
}

/// Lookup tables built once per matrix.
struct Index {
    /// `(begin, end) -> probability` of `I` edges.
    spans: HashMap<(usize, usize), f64>,
    /// `begin -> [end]` of `I` edges, ascending.
    spans_by_begin: HashMap<usize, Vec<usize>>,
    /// `from -> [(to, current role or MAX, next role, prob)]` for EB edges with `from < to`.
    next: HashMap<usize, Vec<(usize, usize, usize, f64)>>,
    ee: HashMap<(usize, usize), f64>,
    /// `(begin, end, role, prob)` start cells (BE or ROOT).
    starts: Vec<(usize, usize, usize, f64)>,
    /// `(begin, end) -> [(virtual, prob)]`.
    virtuals: HashMap<(usize, usize), Vec<(usize, f64)>>,
}

#[derive(Clone, Copy)]
struct Step {
    span: RoleSpan,
    /// Probabilities of the edges that introduced this step (I, EB, EE).
    probs: [f64; 3],
    n_probs: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(space: &'a EdgeTypeSpace) -> Self {
        Decoder {
            space,
            aggregation: ConfidenceAggregation::Min,
        }
    }

    pub fn with_aggregation(mut self, aggregation: ConfidenceAggregation) -> Self {
        self.aggregation = aggregation;
        self
    }

    fn index(&self, matrix: &EdgeMatrix) -> Index {
        let mut idx = Index {
            spans: HashMap::new(),
            spans_by_begin: HashMap::new(),
            next: HashMap::new(),
            ee: HashMap::new(),
            starts: Vec::new(),
            virtuals: HashMap::new(),
        };
        for ((i, j, k), p) in matrix.iter() {
            let p = p.unwrap_or(1.0);
            match self.space.types[k] {
                EdgeType::I => {
                    idx.spans.insert((i, j), p);
                    idx.spans_by_begin.entry(i).or_default().push(j);
                }
                EdgeType::Ee if i < j => {
                    idx.ee.insert((i, j), p);
                }
                EdgeType::Eb(r) if i < j => {
                    idx.next.entry(i).or_default().push((j, usize::MAX, r, p));
                }
                EdgeType::EbPair(a, b) if i < j => {
                    idx.next.entry(i).or_default().push((j, a, b, p));
                }
                EdgeType::Be(r) | EdgeType::Root(r) => idx.starts.push((i, j, r, p)),
                EdgeType::Virtual(v) => idx.virtuals.entry((i, j)).or_default().push((v, p)),
                _ => {}
            }
        }
        for ends in idx.spans_by_begin.values_mut() {
            ends.sort_unstable();
        }
        idx
    }

    fn successors(&self, idx: &Index, cur: RoleSpan, out: &mut Vec<Step>) {
        out.clear();
        let Some(nexts) = idx.next.get(&cur.span.end) else {
            return;
        };
        for &(b2, from_role, role, p_eb) in nexts {
            if from_role != usize::MAX && from_role != cur.role {
                continue;
            }
            let Some(ends) = idx.spans_by_begin.get(&b2) else {
                continue;
            };
            for &e2 in ends {
                let p_i = idx.spans[&(b2, e2)];
                let step = if self.space.variant.use_ee {
                    let Some(&p_ee) = idx.ee.get(&(cur.span.end, e2)) else {
                        continue;
                    };
                    Step {
                        span: RoleSpan { span: Span::new(b2, e2), role },
                        probs: [p_i, p_eb, p_ee],
                        n_probs: 3,
                    }
                } else {
                    Step {
                        span: RoleSpan { span: Span::new(b2, e2), role },
                        probs: [p_i, p_eb, 0.0],
                        n_probs: 2,
                    }
                };
                out.push(step);
            }
        }
    }

    /// Recovers facts from `matrix`. Fragments that do not form a complete
    /// chain with a subject and a predicate are dropped.
    pub fn decode(&self, matrix: &EdgeMatrix, sentence: &Sentence) -> Result<Vec<Fact>> {
        if matrix.n() != sentence.len() || matrix.channels() != self.space.len() {
            return Err(Error::ShapeMismatch(format!(
                "matrix {}x{} channels {} vs sentence of {} tokens and {} channels",
                matrix.n(),
                matrix.n(),
                matrix.channels(),
                sentence.len(),
                self.space.len()
            )));
        }
        let with_probs = matrix.has_probabilities();
        let idx = self.index(matrix);
        let mut found: BTreeMap<FactKey, Fact> = BTreeMap::new();

        for &(b, e, role, p_start) in &idx.starts {
            let mut chains: Vec<Vec<Step>> = Vec::new();
            if self.space.variant.use_be {
                let Some(ends) = idx.spans_by_begin.get(&b) else {
                    continue;
                };
                for &e1 in ends.iter().filter(|&&e1| e1 <= e) {
                    let first = Step {
                        span: RoleSpan { span: Span::new(b, e1), role },
                        probs: [idx.spans[&(b, e1)], 0.0, 0.0],
                        n_probs: 1,
                    };
                    self.walk(&idx, vec![first], Some(e), &mut chains);
                }
            } else if let Some(&p_i) = idx.spans.get(&(b, e)) {
                let first = Step {
                    span: RoleSpan { span: Span::new(b, e), role },
                    probs: [p_i, 0.0, 0.0],
                    n_probs: 1,
                };
                self.walk(&idx, vec![first], None, &mut chains);
            }
            for chain in chains {
                let mut probs: Vec<f64> = vec![p_start];
                for step in &chain {
                    probs.extend_from_slice(&step.probs[..step.n_probs]);
                }
                for mut fact in self.assemble(&chain, &idx, &probs) {
                    if !with_probs {
                        fact.confidence = None;
                    }
                    let key = FactKey::of(&fact, self.space.schema());
                    match found.get_mut(&key) {
                        Some(existing) => {
                            if fact.confidence > existing.confidence {
                                existing.confidence = fact.confidence;
                            }
                        }
                        None => {
                            found.insert(key, fact);
                        }
                    }
                }
            }
        }
        Ok(found.into_values().collect())
    }

    /// Depth-first enumeration of complete chains. With a target column the
    /// chain completes on reaching it; without one it completes at a leaf.
    fn walk(&self, idx: &Index, start: Vec<Step>, target: Option<usize>, out: &mut Vec<Vec<Step>>) {
        let mut stack = vec![start];
        let mut buf = Vec::new();
        let mut explored = 0usize;
        while let Some(chain) = stack.pop() {
            explored += 1;
            if explored > MAX_PATHS_PER_START {
                break;
            }
            let cur = chain.last().expect("chains are never empty").span;
            if let Some(t) = target {
                if cur.span.end == t {
                    out.push(chain);
                    continue;
                }
            }
            self.successors(idx, cur, &mut buf);
            if let Some(t) = target {
                buf.retain(|s| s.span.span.end <= t);
            }
            if buf.is_empty() {
                if target.is_none() {
                    out.push(chain);
                }
                continue;
            }
            for step in buf.iter().rev() {
                let mut next = chain.clone();
                next.push(*step);
                stack.push(next);
            }
        }
    }

    fn assemble(&self, chain: &[Step], idx: &Index, probs: &[f64]) -> Vec<Fact> {
        let schema = self.space.schema();
        let roles = schema.roles();
        let mut by_role: BTreeMap<usize, Vec<Span>> = BTreeMap::new();
        for step in chain {
            by_role.entry(step.span.role).or_default().push(step.span.span);
        }
        let elements: Vec<Element> = by_role
            .iter()
            .map(|(&r, spans)| Element::concrete(roles[r].clone(), spans.iter().copied()))
            .collect();
        let has = |name: &str| elements.iter().any(|e| e.role == name);
        if !has(SUBJECT) {
            return Vec::new();
        }
        if has(PREDICATE) {
            let confidence = self.aggregation.combine(probs);
            return vec![Fact {
                elements,
                confidence: Some(confidence),
            }];
        }
        let object = schema.role_index(OBJECT);
        let Some(first_object) = chain.iter().find(|s| Some(s.span.role) == object) else {
            return Vec::new();
        };
        let cell = (first_object.span.span.begin, first_object.span.span.end);
        let Some(labels) = idx.virtuals.get(&cell) else {
            return Vec::new();
        };
        labels
            .iter()
            .map(|&(v, p)| {
                let mut elements = elements.clone();
                elements.push(Element::virtual_predicate(
                    schema.virtual_predicates()[v].clone(),
                ));
                let mut all = probs.to_vec();
                all.push(p);
                Fact {
                    elements,
                    confidence: Some(self.aggregation.combine(&all)),
                }
            })
            .collect()
    }
}

/// One sentence where decoding did not reproduce the coverable gold facts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundtripMismatch {
    pub sentence_id: String,
    pub missing: Vec<String>,
    pub spurious: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoundtripReport {
    pub sentences: usize,
    pub facts_total: usize,
    pub facts_encodable: usize,
    pub facts_recovered: usize,
    pub facts_spurious: usize,
    pub uncoverable: Vec<(String, usize, UncoverableReason)>,
    pub mismatches: Vec<RoundtripMismatch>,
}

impl RoundtripReport {
    /// Share of coverable gold facts that come back exactly.
    pub fn recall(&self) -> f64 {
        ratio(self.facts_recovered, self.facts_encodable)
    }

    /// Exact-match fraction: recovered facts over coverable gold plus spurious output.
    pub fn coverage(&self) -> f64 {
        ratio(
            self.facts_recovered,
            self.facts_encodable + self.facts_spurious,
        )
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Encodes then decodes every sentence and compares against the coverable
/// gold facts by structure.
pub fn roundtrip_check(
    corpus: &[AnnotatedSentence],
    schema: &Schema,
    variant: CodecVariant,
) -> Result<RoundtripReport> {
    let space = edge_type_space(schema, variant)?;
    let decoder = Decoder::new(&space);
    let mut report = RoundtripReport {
        sentences: corpus.len(),
        ..RoundtripReport::default()
    };
    for annotated in corpus {
        let (matrix, enc) = encode_with(annotated, &space)?;
        report.facts_total += enc.facts_total;
        let skipped: BTreeSet<usize> = enc.reasons.iter().map(|&(i, _)| i).collect();
        for &(i, reason) in &enc.reasons {
            report
                .uncoverable
                .push((annotated.sentence.id.clone(), i, reason));
        }
        let gold: BTreeMap<FactKey, &Fact> = annotated
            .facts
            .iter()
            .enumerate()
            .filter(|(i, _)| !skipped.contains(i))
            .map(|(_, f)| (FactKey::of(&f.spliced(schema), schema), f))
            .collect();
        let decoded = decoder.decode(&matrix, &annotated.sentence)?;
        let decoded: BTreeMap<FactKey, &Fact> = decoded
            .iter()
            .map(|f| (FactKey::of(f, schema), f))
            .collect();

        report.facts_encodable += gold.len();
        let recovered = gold.keys().filter(|k| decoded.contains_key(k)).count();
        report.facts_recovered += recovered;
        let spurious: Vec<String> = decoded
            .iter()
            .filter(|(k, _)| !gold.contains_key(k))
            .map(|(_, f)| fact_to_string(f, &annotated.sentence, schema))
            .collect();
        report.facts_spurious += spurious.len();
        if recovered < gold.len() || !spurious.is_empty() {
            let missing = gold
                .iter()
                .filter(|(k, _)| !decoded.contains_key(k))
                .map(|(_, f)| fact_to_string(f, &annotated.sentence, schema))
                .collect();
            report.mismatches.push(RoundtripMismatch {
                sentence_id: annotated.sentence.id.clone(),
                missing,
                spurious,
            });
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeStats {
    pub facts: usize,
    pub total_edges: usize,
    pub mean_edges_per_fact: f64,
    /// Edges per fact -> number of facts.
    pub histogram: BTreeMap<usize, usize>,
    pub distinct_types: BTreeSet<String>,
    /// Labeled cells over all `i <= j` cells times channels, corpus-wide.
    pub density: f64,
}

/// Edge counts per coverable fact, counted before facts are merged into one matrix.
pub fn edge_stats(
    corpus: &[AnnotatedSentence],
    schema: &Schema,
    variant: CodecVariant,
) -> Result<EdgeStats> {
    let space = edge_type_space(schema, variant)?;
    let mut stats = EdgeStats::default();
    let mut used = BTreeSet::new();
    let (mut cells, mut labeled) = (0usize, 0usize);
    for annotated in corpus {
        let mut matrix = EdgeMatrix::new(annotated.sentence.len(), space.len());
        for fact in &annotated.facts {
            if let Ok(edges) = fact_edges(fact, &space)? {
                stats.facts += 1;
                stats.total_edges += edges.len();
                *stats.histogram.entry(edges.len()).or_default() += 1;
                for (i, j, k) in edges {
                    used.insert(k);
                    matrix.insert(i, j, k, None)?;
                }
            }
        }
        let n = annotated.sentence.len();
        cells += n * (n + 1) / 2 * space.len();
        labeled += matrix.len();
    }
    stats.mean_edges_per_fact = if stats.facts == 0 {
        0.0
    } else {
        stats.total_edges as f64 / stats.facts as f64
    };
    stats.density = if cells == 0 {
        0.0
    } else {
        labeled as f64 / cells as f64
    };
    stats.distinct_types = used.into_iter().map(|k| space.name(k)).collect();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Element, Sentence, Span, OBJECT, PREDICATE, SUBJECT};

    fn sentence(n: usize) -> Sentence {
        Sentence::new("s", (0..n).map(|i| format!("w{i}"))).unwrap()
    }

    fn ann(n: usize, facts: Vec<Fact>) -> AnnotatedSentence {
        AnnotatedSentence {
            sentence: sentence(n),
            facts,
        }
    }

    fn spo(s: (usize, usize), p: (usize, usize), o: (usize, usize)) -> Fact {
        Fact::new([
            Element::span(SUBJECT, s.0, s.1),
            Element::span(PREDICATE, p.0, p.1),
            Element::span(OBJECT, o.0, o.1),
        ])
    }

    fn keys(facts: &[Fact], schema: &Schema) -> BTreeSet<FactKey> {
        facts.iter().map(|f| FactKey::of(f, schema)).collect()
    }

    #[test]
    fn type_space_sizes() {
        let saoke = Schema::saoke();
        assert_eq!(edge_type_space(&saoke, CodecVariant::FULL).unwrap().len(), 21);
        assert_eq!(edge_type_space(&saoke, CodecVariant::ROLE_PAIR).unwrap().len(), 51);
        assert_eq!(edge_type_space(&saoke, CodecVariant::NO_EE).unwrap().len(), 20);
        assert_eq!(edge_type_space(&saoke, CodecVariant::NO_BE).unwrap().len(), 21);

        let tiny = Schema::new(["x"], Vec::<String>::new()).unwrap();
        let space = edge_type_space(&tiny, CodecVariant::FULL).unwrap();
        let names: Vec<String> = (0..space.len()).map(|k| space.name(k)).collect();
        assert_eq!(names, ["BE-x", "EE", "I", "EB-x"]);
    }

    #[test]
    fn type_space_order_matches_listing() {
        let space = edge_type_space(&Schema::saoke(), CodecVariant::FULL).unwrap();
        let names: Vec<String> = (0..space.len()).map(|k| space.name(k)).collect();
        assert_eq!(names[0], "BE-subject");
        assert_eq!(names[5], "BE-qualifier");
        assert_eq!(names[6], "object->=");
        assert_eq!(names[12], "object->IN");
        assert_eq!(names[13], "EE");
        assert_eq!(names[14], "I");
        assert_eq!(names[15], "EB-subject");
        assert_eq!(names[20], "EB-qualifier");
        for (k, name) in names.iter().enumerate() {
            assert_eq!(space.channel_by_name(name), Some(k));
        }
    }

    #[test]
    fn encode_two_token_fact() {
        let schema = Schema::saoke();
        let space = edge_type_space(&schema, CodecVariant::FULL).unwrap();
        let fact = Fact::new([Element::span(SUBJECT, 0, 0), Element::span(PREDICATE, 1, 1)]);
        let (m, report) = encode(&ann(2, vec![fact.clone()]), &schema, CodecVariant::FULL).unwrap();
        let got: BTreeSet<(usize, usize, String)> =
            m.iter().map(|((i, j, k), _)| (i, j, space.name(k))).collect();
        let want: BTreeSet<(usize, usize, String)> = [
            (0, 0, "I"),
            (1, 1, "I"),
            (0, 1, "EB-predicate"),
            (0, 1, "EE"),
            (0, 1, "BE-subject"),
        ]
        .into_iter()
        .map(|(i, j, s)| (i, j, s.to_string()))
        .collect();
        assert_eq!(got, want);
        assert_eq!(report.facts_encoded, 1);

        let decoded = decode(&m, &sentence(2), &schema, CodecVariant::FULL).unwrap();
        assert_eq!(decoded, vec![fact]);
    }

    #[test]
    fn edge_count_is_three_m_minus_one() {
        let schema = Schema::saoke();
        let space = edge_type_space(&schema, CodecVariant::FULL).unwrap();
        for m in 2..8usize {
            let mut elements = vec![Element::span(SUBJECT, 0, 0), Element::span(PREDICATE, 2, 3)];
            let objects: Vec<Span> = (2..m).map(|k| Span::new(3 * k, 3 * k + 1)).collect();
            if !objects.is_empty() {
                elements.push(Element::concrete(OBJECT, objects));
            }
            let edges = fact_edges(&Fact::new(elements), &space).unwrap().unwrap();
            assert_eq!(edges.len(), 3 * m - 1);
        }
    }

    #[test]
    fn empty_input() {
        let schema = Schema::saoke();
        let (m, report) = encode(&ann(3, vec![]), &schema, CodecVariant::FULL).unwrap();
        assert!(m.is_empty());
        assert_eq!(report, EncodeReport::default());
        assert!(decode(&m, &sentence(3), &schema, CodecVariant::FULL)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn unknown_role_is_an_error() {
        let fact = Fact::new([Element::span("manner", 0, 0)]);
        let err = encode(&ann(2, vec![fact]), &Schema::saoke(), CodecVariant::FULL).unwrap_err();
        assert_eq!(err.code(), "unknown-role");
    }

    #[test]
    fn overlapping_facts_share_subject() {
        let schema = Schema::saoke();
        let facts = vec![spo((0, 0), (1, 1), (2, 3)), spo((0, 0), (4, 4), (5, 6))];
        let (m, _) = encode(&ann(7, facts.clone()), &schema, CodecVariant::FULL).unwrap();
        let decoded = decode(&m, &sentence(7), &schema, CodecVariant::FULL).unwrap();
        assert_eq!(keys(&decoded, &schema), keys(&facts, &schema));
    }

    #[test]
    fn discontinuous_element_is_spliced() {
        let schema = Schema::saoke();
        let fact = Fact::new([
            Element::span(SUBJECT, 0, 0),
            Element::concrete(PREDICATE, [Span::new(1, 1), Span::new(4, 4)]),
            Element::span(OBJECT, 2, 3),
        ]);
        let (m, _) = encode(&ann(5, vec![fact.clone()]), &schema, CodecVariant::FULL).unwrap();
        let decoded = decode(&m, &sentence(5), &schema, CodecVariant::FULL).unwrap();
        assert_eq!(keys(&decoded, &schema), keys(&[fact], &schema));
    }

    #[test]
    fn virtual_predicate_roundtrip() {
        let schema = Schema::saoke();
        let space = edge_type_space(&schema, CodecVariant::FULL).unwrap();
        let fact = Fact::new([
            Element::span(SUBJECT, 0, 1),
            Element::virtual_predicate("ISA"),
            Element::span(OBJECT, 3, 4),
        ]);
        let (m, _) = encode(&ann(5, vec![fact.clone()]), &schema, CodecVariant::FULL).unwrap();
        let virt = space.channel_by_name("object->ISA").unwrap();
        assert!(m.contains(3, 4, virt));
        assert!(m.contains(3, 4, space.channel(EdgeType::I).unwrap()));
        let decoded = decode(&m, &sentence(5), &schema, CodecVariant::FULL).unwrap();
        assert_eq!(keys(&decoded, &schema), keys(&[fact], &schema));
    }

    #[test]
    fn virtual_without_object_is_uncoverable() {
        let schema = Schema::saoke();
        let fact = Fact::new([Element::span(SUBJECT, 0, 1), Element::virtual_predicate("=")]);
        let (m, report) = encode(&ann(3, vec![fact]), &schema, CodecVariant::FULL).unwrap();
        assert!(m.is_empty());
        assert_eq!(report.reasons, vec![(0, UncoverableReason::VirtualWithoutObject)]);
    }

    #[test]
    fn backward_fact_is_reported_not_written() {
        let schema = Schema::saoke();
        // object nested inside the subject: the chain would have to step backwards
        let bad = spo((0, 3), (5, 5), (2, 3));
        let good = spo((0, 0), (1, 1), (2, 2));
        let (m, report) = encode(&ann(6, vec![good.clone(), bad]), &schema, CodecVariant::FULL)
            .unwrap();
        assert_eq!(report.facts_total, 2);
        assert_eq!(report.facts_encoded, 1);
        assert_eq!(report.reasons, vec![(1, UncoverableReason::BackwardEdge)]);
        let (only_good, _) = encode(&ann(6, vec![good]), &schema, CodecVariant::FULL).unwrap();
        assert_eq!(m, only_good);
    }

    #[test]
    fn nested_spans_need_ee_to_disambiguate() {
        // Two facts share the object; their predicates are nested spans that
        // start on the same word. Without EE the chain cannot tell which of
        // the two predicate spans follows each subject.
        let schema = Schema::saoke();
        let a = spo((0, 0), (2, 4), (6, 6));
        let b = spo((1, 1), (2, 3), (6, 6));
        let corpus = vec![ann(7, vec![a, b])];
        let full = roundtrip_check(&corpus, &schema, CodecVariant::FULL).unwrap();
        let no_ee = roundtrip_check(&corpus, &schema, CodecVariant::NO_EE).unwrap();
        assert_eq!(full.coverage(), 1.0);
        assert_eq!(no_ee.recall(), 1.0);
        assert_eq!(no_ee.facts_spurious, 2);
        assert_eq!(no_ee.coverage(), 0.5);
    }

    #[test]
    fn no_be_loses_prefix_fact() {
        let schema = Schema::saoke();
        let short = Fact::new([Element::span(SUBJECT, 0, 0), Element::span(PREDICATE, 1, 1)]);
        let long = spo((0, 0), (1, 1), (2, 2));
        let corpus = vec![ann(3, vec![short, long])];
        let full = roundtrip_check(&corpus, &schema, CodecVariant::FULL).unwrap();
        let no_be = roundtrip_check(&corpus, &schema, CodecVariant::NO_BE).unwrap();
        assert_eq!(full.coverage(), 1.0);
        assert_eq!(no_be.facts_recovered, 1);
    }

    #[test]
    fn role_pair_variant_roundtrip() {
        let schema = Schema::saoke();
        let facts = vec![spo((0, 0), (1, 1), (2, 3)), spo((0, 0), (4, 4), (5, 6))];
        let report = roundtrip_check(&[ann(7, facts)], &schema, CodecVariant::ROLE_PAIR).unwrap();
        assert_eq!(report.coverage(), 1.0);
    }

    #[test]
    fn edge_stats_simple() {
        let schema = Schema::saoke();
        let corpus = vec![ann(6, vec![spo((0, 0), (1, 1), (2, 3)), spo((4, 4), (5, 5), (2, 3))])];
        let stats = edge_stats(&corpus, &schema, CodecVariant::FULL).unwrap();
        assert_eq!(stats.facts, 2);
        assert_eq!(stats.mean_edges_per_fact, 8.0);
        assert_eq!(stats.histogram.get(&8), Some(&2));
        assert!(stats.distinct_types.contains("BE-subject"));
        assert!(stats.density > 0.0 && stats.density < 1.0);
    }

    #[test]
    fn tsv_roundtrip_and_errors() {
        let schema = Schema::saoke();
        let space = edge_type_space(&schema, CodecVariant::FULL).unwrap();
        let mut m = EdgeMatrix::new(4, space.len());
        m.insert(0, 2, 3, Some(0.25)).unwrap();
        m.insert(1, 1, 14, None).unwrap();
        let text = m.to_tsv(&space);
        assert_eq!(text, "0\t2\tBE-time\t0.25\n1\t1\tI\t-\n");
        assert_eq!(EdgeMatrix::from_tsv(&text, 4, &space).unwrap(), m);

        let err = EdgeMatrix::from_tsv("0\t1\tI\t-\n2\t1\tI\t-\n", 4, &space).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, offset: 8, .. }), "{err:?}");
        assert!(EdgeMatrix::from_tsv("0\t1\tXX\t-\n", 4, &space).is_err());
    }

    #[test]
    fn decode_confidence_is_min_edge() {
        let schema = Schema::saoke();
        let space = edge_type_space(&schema, CodecVariant::FULL).unwrap();
        let fact = Fact::new([Element::span(SUBJECT, 0, 0), Element::span(PREDICATE, 1, 1)]);
        let (gold, _) = encode(&ann(2, vec![fact]), &schema, CodecVariant::FULL).unwrap();
        let mut m = EdgeMatrix::new(2, space.len());
        for (n, ((i, j, k), _)) in gold.iter().enumerate() {
            m.insert(i, j, k, Some(0.9 - 0.1 * n as f64)).unwrap();
        }
        let decoded = Decoder::new(&space).decode(&m, &sentence(2)).unwrap();
        assert_eq!(decoded.len(), 1);
        assert!((decoded[0].confidence.unwrap() - 0.5).abs() < 1e-12);
        let mean = Decoder::new(&space)
            .with_aggregation(ConfidenceAggregation::Mean)
            .decode(&m, &sentence(2))
            .unwrap();
        assert!((mean[0].confidence.unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn decode_rejects_shape_mismatch() {
        let schema = Schema::saoke();
        let m = EdgeMatrix::new(3, 21);
        assert_eq!(
            decode(&m, &sentence(4), &schema, CodecVariant::FULL)
                .unwrap_err()
                .code(),
            "shape-mismatch"
        );
    }
}
