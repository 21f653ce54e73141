//! Corpus and prediction files (JSON Lines), a synthetic corpus generator
//! with controllable complication rates, and dataset statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    classify_sentence, validate_fact, AnnotatedSentence, Element, Fact, Schema, Sentence, Span,
    OBJECT, PREDICATE, SUBJECT,
};

/// One gold sentence as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    #[serde(default)]
    pub domain: Option<String>,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub facts: Vec<Fact>,
}

impl CorpusRecord {
    pub fn from_annotated(annotated: &AnnotatedSentence, domain: Option<String>) -> Self {
        CorpusRecord {
            id: annotated.sentence.id.clone(),
            domain,
            tokens: annotated.sentence.tokens.clone(),
            facts: annotated.facts.clone(),
        }
    }

    pub fn to_annotated(&self) -> Result<AnnotatedSentence> {
        let sentence = Sentence::new(self.id.clone(), self.tokens.iter().cloned()).map_err(|e| {
            Error::InvalidRecord {
                id: self.id.clone(),
                message: e.to_string(),
            }
        })?;
        Ok(AnnotatedSentence {
            sentence,
            facts: self.facts.clone(),
        })
    }

    /// Spans sorted inside every element; everything else kept as is.
    pub fn canonicalize(&mut self) {
        for fact in &mut self.facts {
            for element in &mut fact.elements {
                element.spans.sort();
            }
        }
    }

    /// Structural checks that need no schema: tokens present, spans in range.
    fn check(&self) -> Result<()> {
        let invalid = |message: String| Error::InvalidRecord {
            id: self.id.clone(),
            message,
        };
        if self.tokens.is_empty() {
            return Err(invalid("no tokens".into()));
        }
        if self.tokens.iter().any(String::is_empty) {
            return Err(invalid("empty token".into()));
        }
        let n = self.tokens.len();
        for fact in &self.facts {
            for element in &fact.elements {
                for span in &element.spans {
                    if !span.is_valid_for(n) {
                        return Err(invalid(format!(
                            "span [{},{}] invalid for {n} tokens",
                            span.begin, span.end
                        )));
                    }
                }
            }
            if let Some(c) = fact.confidence {
                if !(0.0..=1.0).contains(&c) {
                    return Err(invalid(format!("confidence {c} outside [0,1]")));
                }
            }
        }
        Ok(())
    }
}

/// Every `validate_fact` violation in the corpus, as `InvalidRecord`.
pub fn validate_corpus(records: &[CorpusRecord], schema: &Schema) -> Result<()> {
    for record in records {
        let annotated = record.to_annotated()?;
        for (k, fact) in record.facts.iter().enumerate() {
            if let Some(v) = validate_fact(fact, &annotated.sentence, schema).first() {
                return Err(Error::InvalidRecord {
                    id: record.id.clone(),
                    message: format!("fact {k}: {v}"),
                });
            }
        }
    }
    Ok(())
}

fn parse_lines<T, F>(text: &str, check: F) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    F: Fn(&T) -> Result<()>,
{
    let mut out = Vec::new();
    let mut offset = 0usize;
    for (idx, line) in text.split_inclusive('\n').enumerate() {
        let start = offset;
        offset += line.len();
        let body = line.trim_end_matches(['\n', '\r']);
        if body.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(body).map_err(|e| Error::Parse {
            line: idx + 1,
            offset: start + e.column().saturating_sub(1),
            message: e.to_string(),
        })?;
        check(&record)?;
        out.push(record);
    }
    Ok(out)
}

pub fn parse_corpus_str(text: &str) -> Result<Vec<CorpusRecord>> {
    parse_lines(text, CorpusRecord::check)
}

pub fn parse_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>> {
    parse_corpus_str(&fs::read_to_string(path)?)
}

pub fn corpus_to_string(records: &[CorpusRecord]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("corpus records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_corpus(records: &[CorpusRecord], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, corpus_to_string(records))?;
    Ok(())
}

/// Predicted facts for one sentence; facts normally carry confidences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    #[serde(default)]
    pub facts: Vec<Fact>,
}

impl PredictionRecord {
    fn check(&self) -> Result<()> {
        for fact in &self.facts {
            if let Some(c) = fact.confidence {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::InvalidRecord {
                        id: self.id.clone(),
                        message: format!("confidence {c} outside [0,1]"),
                    });
                }
            }
            if fact.elements.iter().flat_map(|e| &e.spans).any(|s| s.begin > s.end) {
                return Err(Error::InvalidRecord {
                    id: self.id.clone(),
                    message: "span with begin after end".into(),
                });
            }
        }
        Ok(())
    }
}

pub fn parse_predictions_str(text: &str) -> Result<Vec<PredictionRecord>> {
    parse_lines(text, PredictionRecord::check)
}

pub fn parse_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    parse_predictions_str(&fs::read_to_string(path)?)
}

pub fn predictions_to_string(records: &[PredictionRecord]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("prediction records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_predictions(records: &[PredictionRecord], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, predictions_to_string(records))?;
    Ok(())
}

/// Synthetic corpus parameters. Distributions are `(value, weight)` lists and
/// are normalized on use; rates are per-sentence probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub sentences: usize,
    pub vocab_size: usize,
    /// Concrete spans per fact (virtual predicates add none).
    pub span_counts: Vec<(usize, f64)>,
    pub fact_counts: Vec<(usize, f64)>,
    /// Tokens per span.
    pub span_lengths: Vec<(usize, f64)>,
    pub overlap_rate: f64,
    pub nesting_rate: f64,
    pub discontinuity_rate: f64,
    /// Share of sentences forced free of all three complications; the three
    /// rates above stay marginal rates, so each must not exceed `1 - simple_rate`.
    pub simple_rate: f64,
    /// Per-fact chance of a virtual predicate.
    pub virtual_rate: f64,
    /// Per-fact chance of an element nested inside another element of the
    /// same fact, which no DAG path can express.
    pub intra_fact_nesting_rate: f64,
    pub domains: Vec<(String, f64)>,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            sentences: 100,
            vocab_size: 500,
            span_counts: vec![(2, 0.25), (3, 0.3), (4, 0.2), (5, 0.1), (6, 0.1), (7, 0.05)],
            fact_counts: vec![(1, 0.4), (2, 0.35), (3, 0.25)],
            span_lengths: vec![(1, 0.4), (2, 0.3), (3, 0.2), (4, 0.1)],
            overlap_rate: 0.0,
            nesting_rate: 0.0,
            discontinuity_rate: 0.0,
            simple_rate: 0.0,
            virtual_rate: 0.0,
            intra_fact_nesting_rate: 0.0,
            domains: Vec::new(),
            seed: 0,
        }
    }
}

impl GenConfig {
    /// Complication, fact-count and domain proportions of the large open-domain
    /// test set; the span-count mix is calibrated to about 9.6 DAG edges per fact.
    pub fn saoke_like(sentences: usize, seed: u64) -> Self {
        let mut fact_counts = vec![(1, 0.12), (2, 0.15), (3, 0.159)];
        fact_counts.extend((4..=6).map(|k| (k, 0.324 / 3.0)));
        fact_counts.extend((7..=9).map(|k| (k, 0.123 / 3.0)));
        fact_counts.extend((10..=12).map(|k| (k, 0.063 / 3.0)));
        fact_counts.extend((13..=16).map(|k| (k, 0.061 / 4.0)));
        GenConfig {
            sentences,
            vocab_size: 2000,
            span_counts: vec![(2, 0.27), (3, 0.31), (4, 0.2), (5, 0.1), (6, 0.08), (7, 0.04)],
            fact_counts,
            overlap_rate: 0.833,
            nesting_rate: 0.629,
            discontinuity_rate: 0.831,
            simple_rate: 0.04,
            virtual_rate: 0.1,
            domains: [
                ("insurance", 0.119),
                ("education", 0.166),
                ("finance", 0.100),
                ("government", 0.173),
                ("medicine", 0.259),
                ("news", 0.183),
            ]
            .iter()
            .map(|&(d, w)| (d.to_string(), w))
            .collect(),
            seed,
            ..GenConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let rates = [
            ("overlap_rate", self.overlap_rate),
            ("nesting_rate", self.nesting_rate),
            ("discontinuity_rate", self.discontinuity_rate),
            ("simple_rate", self.simple_rate),
            ("virtual_rate", self.virtual_rate),
            ("intra_fact_nesting_rate", self.intra_fact_nesting_rate),
        ];
        for (name, rate) in rates {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidConfig(format!("{name} = {rate} outside [0,1]")));
            }
        }
        for (name, rate) in &rates[..3] {
            if *rate > 0.0 && *rate > 1.0 - self.simple_rate {
                return Err(Error::InfeasibleConfig(format!(
                    "{name} = {rate} exceeds the non-simple share {}",
                    1.0 - self.simple_rate
                )));
            }
        }
        if self.vocab_size == 0 {
            return Err(Error::InfeasibleConfig("vocabulary is empty".into()));
        }
        if self.span_counts.iter().any(|&(m, w)| m < 2 && w > 0.0) {
            return Err(Error::InfeasibleConfig(
                "facts need at least two concrete spans".into(),
            ));
        }
        if self.span_lengths.iter().any(|&(l, w)| l == 0 && w > 0.0) {
            return Err(Error::InfeasibleConfig("zero-length spans".into()));
        }
        let longest = support_max(&self.span_lengths);
        let wants_nesting = self.nesting_rate > 0.0 || self.intra_fact_nesting_rate > 0.0;
        if wants_nesting && longest < 2 {
            return Err(Error::InfeasibleConfig(
                "nesting needs spans of at least two tokens".into(),
            ));
        }
        Ok(())
    }
}

fn support_max(weights: &[(usize, f64)]) -> usize {
    weights
        .iter()
        .filter(|&&(_, w)| w > 0.0)
        .map(|&(v, _)| v)
        .max()
        .unwrap_or(0)
}

struct Sampler {
    values: Vec<usize>,
    index: WeightedIndex<f64>,
}

impl Sampler {
    fn new(name: &str, weights: &[(usize, f64)]) -> Result<Self> {
        let index = WeightedIndex::new(weights.iter().map(|&(_, w)| w))
            .map_err(|e| Error::InvalidConfig(format!("{name}: {e}")))?;
        Ok(Sampler {
            values: weights.iter().map(|&(v, _)| v).collect(),
            index,
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        self.values[self.index.sample(rng)]
    }
}

/// Where an element's text comes from before tokens are laid out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Piece {
    Chunk(usize),
    /// Prefix (`true`) or suffix of a chunk, `len` tokens shorter than it.
    Part { chunk: usize, prefix: bool, cut: usize },
}

#[derive(Clone, Debug)]
struct DraftElement {
    role: &'static str,
    pieces: Vec<Piece>,
    virtual_predicate: Option<usize>,
}

#[derive(Clone, Debug, Default)]
struct Draft {
    facts: Vec<Vec<DraftElement>>,
    chunk_lengths: Vec<usize>,
}

impl Draft {
    fn chunk(&mut self, len: usize) -> Piece {
        self.chunk_lengths.push(len);
        Piece::Chunk(self.chunk_lengths.len() - 1)
    }
}

const EXTRA_ROLES: [(&str, f64); 4] = [(OBJECT, 0.55), ("time", 0.15), ("place", 0.15), ("qualifier", 0.15)];

/// Generates a corpus whose sentence-level overlap, nesting and
/// discontinuity flags are drawn independently (outside the simple share) and
/// realized exactly by construction. Spans of different facts occupy disjoint
/// token chunks unless deliberately shared (overlap) or cut (nesting).
pub fn generate_synthetic(config: &GenConfig, schema: &Schema) -> Result<Vec<CorpusRecord>> {
    config.validate()?;
    for role in [SUBJECT, PREDICATE, OBJECT] {
        if schema.role_index(role).is_none() {
            return Err(Error::InfeasibleConfig(format!("schema lacks role `{role}`")));
        }
    }
    let extras: Vec<(&'static str, f64)> = EXTRA_ROLES
        .iter()
        .copied()
        .filter(|(r, _)| schema.role_index(r).is_some())
        .collect();
    let virtual_rate = if schema.virtual_predicates().is_empty() {
        0.0
    } else {
        config.virtual_rate
    };

    let span_counts = Sampler::new("span_counts", &config.span_counts)?;
    let fact_counts = Sampler::new("fact_counts", &config.fact_counts)?;
    let span_lengths = Sampler::new("span_lengths", &config.span_lengths)?;
    let long_lengths: Vec<(usize, f64)> = config
        .span_lengths
        .iter()
        .copied()
        .filter(|&(l, _)| l >= 2)
        .collect();
    let long_lengths = if long_lengths.iter().any(|&(_, w)| w > 0.0) {
        Some(Sampler::new("span_lengths", &long_lengths)?)
    } else {
        None
    };
    let extra_roles = WeightedIndex::new(extras.iter().map(|&(_, w)| w))
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let domain_index = if config.domains.is_empty() {
        None
    } else {
        Some(
            WeightedIndex::new(config.domains.iter().map(|(_, w)| *w))
                .map_err(|e| Error::InvalidConfig(format!("domains: {e}")))?,
        )
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let width = config.sentences.max(1).to_string().len();
    let mut out = Vec::with_capacity(config.sentences);
    for s in 0..config.sentences {
        let simple = rng.gen_bool(config.simple_rate);
        let mut flag = |rate: f64| {
            let hit = rate > 0.0 && rng.gen_bool((rate / (1.0 - config.simple_rate)).min(1.0));
            hit && !simple
        };
        let overlap = flag(config.overlap_rate);
        let nested = flag(config.nesting_rate);
        let discontinuous = flag(config.discontinuity_rate);
        let mut k = fact_counts.sample(&mut rng);
        if overlap || nested {
            k = k.max(2);
        }
        if discontinuous {
            k = k.max(1);
        }

        let mut draft = Draft::default();
        let disc_fact = rng.gen_range(0..k.max(1));
        for f in 0..k {
            let m = span_counts.sample(&mut rng);
            let is_virtual = rng.gen_bool(virtual_rate);
            let disc = discontinuous && f == disc_fact;
            let fact = draft_fact(
                &mut draft,
                &mut rng,
                m,
                is_virtual,
                disc,
                schema,
                &extras,
                &extra_roles,
                &span_lengths,
            );
            draft.facts.push(fact);
        }

        let mut shared: Option<(usize, usize)> = None;
        if overlap {
            let b = rng.gen_range(1..k);
            let a = rng.gen_range(0..b);
            // share the subject, or another single element both facts hold
            let candidates: Vec<&'static str> = [SUBJECT, OBJECT]
                .into_iter()
                .filter(|role| {
                    draft.facts[a].iter().any(|e| e.role == *role && e.virtual_predicate.is_none())
                        && draft.facts[b].iter().any(|e| e.role == *role && e.virtual_predicate.is_none())
                })
                .collect();
            let role = *candidates.choose(&mut rng).unwrap_or(&SUBJECT);
            let position = |fact: &[DraftElement]| {
                fact.iter()
                    .position(|e| e.role == role)
                    .expect("candidate role present")
            };
            let (ia, ib) = (position(&draft.facts[a]), position(&draft.facts[b]));
            // copy the discontinuous side so the sentence stays discontinuous
            if draft.facts[b][ib].pieces.len() > draft.facts[a][ia].pieces.len() {
                draft.facts[a][ia] = draft.facts[b][ib].clone();
            } else {
                draft.facts[b][ib] = draft.facts[a][ia].clone();
            }
            shared = Some((a, b));
        }

        if nested {
            let long = long_lengths
                .as_ref()
                .ok_or_else(|| Error::InfeasibleConfig("no span length of two or more".into()))?;
            nest_across_facts(&mut draft, &mut rng, shared, long);
        }

        for f in 0..k {
            if rng.gen_bool(config.intra_fact_nesting_rate) {
                let long = long_lengths
                    .as_ref()
                    .ok_or_else(|| Error::InfeasibleConfig("no span length of two or more".into()))?;
                nest_within_fact(&mut draft, &mut rng, f, schema, long);
            }
        }

        let id = format!("syn-{s:0width$}");
        let domain = domain_index
            .as_ref()
            .map(|d| config.domains[d.sample(&mut rng)].0.clone());
        out.push(realize(&draft, &mut rng, id, domain, config.vocab_size, schema));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn draft_fact(
    draft: &mut Draft,
    rng: &mut ChaCha8Rng,
    m: usize,
    is_virtual: bool,
    disc: bool,
    schema: &Schema,
    extras: &[(&'static str, f64)],
    extra_roles: &WeightedIndex<f64>,
    span_lengths: &Sampler,
) -> Vec<DraftElement> {
    let mut elements = Vec::new();
    let mut left = m;
    let element = |role: &'static str, draft: &mut Draft, rng: &mut ChaCha8Rng| DraftElement {
        role,
        pieces: vec![draft.chunk(span_lengths.sample(rng))],
        virtual_predicate: None,
    };
    elements.push(element(SUBJECT, draft, rng));
    left -= 1;
    if is_virtual {
        elements.push(DraftElement {
            role: PREDICATE,
            pieces: Vec::new(),
            virtual_predicate: Some(rng.gen_range(0..schema.virtual_predicates().len())),
        });
        // a virtual predicate is carried on the first object span
        elements.push(element(OBJECT, draft, rng));
        left = left.saturating_sub(1);
    } else {
        elements.push(element(PREDICATE, draft, rng));
        left -= 1;
    }
    if disc {
        let holders: Vec<usize> = (0..elements.len())
            .filter(|&i| elements[i].virtual_predicate.is_none() && elements[i].role != OBJECT)
            .collect();
        let h = *holders.choose(rng).expect("subject is always concrete");
        let extra = draft.chunk(span_lengths.sample(rng));
        elements[h].pieces.push(extra);
        left = left.saturating_sub(1);
    }
    let mut used: BTreeSet<&str> = BTreeSet::new();
    for _ in 0..left {
        let mut role = extras[extra_roles.sample(rng)].0;
        if role != OBJECT && !used.insert(role) {
            role = OBJECT;
        }
        elements.push(element(role, draft, rng));
    }
    elements
}

fn nest_across_facts(
    draft: &mut Draft,
    rng: &mut ChaCha8Rng,
    shared: Option<(usize, usize)>,
    long: &Sampler,
) {
    let k = draft.facts.len();
    let (host, guest) = match shared {
        Some(pair) if rng.gen_bool(0.5) => pair,
        Some((a, b)) => (b, a),
        None => {
            let a = rng.gen_range(0..k);
            let b = (a + rng.gen_range(1..k)) % k;
            (a, b)
        }
    };
    // host element: any single-chunk element the guest does not also hold
    let guest_chunks: BTreeSet<usize> = draft.facts[guest]
        .iter()
        .flat_map(|e| &e.pieces)
        .filter_map(|p| match p {
            Piece::Chunk(c) => Some(*c),
            Piece::Part { .. } => None,
        })
        .collect();
    let host_chunks: Vec<usize> = draft.facts[host]
        .iter()
        .flat_map(|e| &e.pieces)
        .filter_map(|p| match p {
            Piece::Chunk(c) if !guest_chunks.contains(c) => Some(*c),
            _ => None,
        })
        .collect();
    let guest_slots: Vec<usize> = draft.facts[guest]
        .iter()
        .enumerate()
        .filter(|(_, e)| !e.pieces.is_empty() && !host_chunk_shared(e, &draft.facts[host]))
        .map(|(i, _)| i)
        .collect();
    let (Some(&chunk), Some(&slot)) = (host_chunks.choose(rng), guest_slots.choose(rng)) else {
        return;
    };
    if draft.chunk_lengths[chunk] < 2 {
        draft.chunk_lengths[chunk] = long.sample(rng);
    }
    let cut = rng.gen_range(1..draft.chunk_lengths[chunk]);
    let pieces = &mut draft.facts[guest][slot].pieces;
    let at = rng.gen_range(0..pieces.len());
    pieces[at] = Piece::Part {
        chunk,
        prefix: rng.gen_bool(0.5),
        cut,
    };
}

fn host_chunk_shared(element: &DraftElement, host: &[DraftElement]) -> bool {
    host.iter().any(|h| h.pieces == element.pieces)
}

fn nest_within_fact(
    draft: &mut Draft,
    rng: &mut ChaCha8Rng,
    f: usize,
    schema: &Schema,
    long: &Sampler,
) {
    let Some(&chunk) = draft.facts[f]
        .iter()
        .filter(|e| e.role != PREDICATE)
        .flat_map(|e| &e.pieces)
        .filter_map(|p| match p {
            Piece::Chunk(c) => Some(c),
            Piece::Part { .. } => None,
        })
        .collect::<Vec<_>>()
        .choose(rng)
        .copied()
    else {
        return;
    };
    let taken: BTreeSet<&str> = draft.facts[f].iter().map(|e| e.role).collect();
    let Some(role) = ["qualifier", "place", "time"]
        .into_iter()
        .find(|r| !taken.contains(r) && schema.role_index(r).is_some())
    else {
        return;
    };
    if draft.chunk_lengths[chunk] < 2 {
        draft.chunk_lengths[chunk] = long.sample(rng);
    }
    let cut = rng.gen_range(1..draft.chunk_lengths[chunk]);
    draft.facts[f].push(DraftElement {
        role,
        pieces: vec![Piece::Part {
            chunk,
            prefix: rng.gen_bool(0.5),
            cut,
        }],
        virtual_predicate: None,
    });
}

fn realize(
    draft: &Draft,
    rng: &mut ChaCha8Rng,
    id: String,
    domain: Option<String>,
    vocab_size: usize,
    schema: &Schema,
) -> CorpusRecord {
    let mut order: Vec<usize> = (0..draft.chunk_lengths.len()).collect();
    order.shuffle(rng);
    let mut tokens: Vec<String> = Vec::new();
    let word = |rng: &mut ChaCha8Rng| format!("w{}", rng.gen_range(0..vocab_size));
    let mut placed = vec![Span::new(0, 0); draft.chunk_lengths.len()];
    for (pos, &c) in order.iter().enumerate() {
        if pos > 0 {
            for _ in 0..rng.gen_range(1..=2) {
                tokens.push(word(rng));
            }
        }
        let begin = tokens.len();
        for _ in 0..draft.chunk_lengths[c] {
            tokens.push(word(rng));
        }
        placed[c] = Span::new(begin, tokens.len() - 1);
    }
    if tokens.is_empty() {
        tokens.push(word(rng));
    }

    let span_of = |piece: &Piece| match *piece {
        Piece::Chunk(c) => placed[c],
        Piece::Part { chunk, prefix, cut } => {
            let s = placed[chunk];
            if prefix {
                Span::new(s.begin, s.end - cut)
            } else {
                Span::new(s.begin + cut, s.end)
            }
        }
    };
    let facts = draft
        .facts
        .iter()
        .map(|elements| {
            Fact::new(elements.iter().map(|e| match e.virtual_predicate {
                Some(v) => Element::virtual_predicate(schema.virtual_predicates()[v].clone()),
                None => Element::concrete(e.role, e.pieces.iter().map(span_of)),
            }))
        })
        .collect();
    CorpusRecord {
        id,
        domain,
        tokens,
        facts,
    }
}

/// Inclusive fact-count bins of the dataset statistics table.
pub const FACT_COUNT_BINS: [(usize, Option<usize>); 5] =
    [(0, Some(3)), (4, Some(6)), (7, Some(9)), (10, Some(12)), (13, None)];

pub fn fact_count_bin(count: usize) -> usize {
    FACT_COUNT_BINS
        .iter()
        .position(|&(lo, hi)| count >= lo && hi.is_none_or(|h| count <= h))
        .expect("bins cover every count")
}

pub fn bin_label(bin: usize) -> String {
    match FACT_COUNT_BINS[bin] {
        (lo, Some(hi)) => format!("[{lo},{hi}]"),
        (lo, None) => format!("[{lo},inf)"),
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorpusStats {
    pub sentences: usize,
    pub facts: usize,
    pub domains: BTreeMap<String, usize>,
    pub overlapping: usize,
    pub discontinuous: usize,
    pub nested: usize,
    pub complicated: usize,
    pub fact_count_bins: [usize; 5],
    pub mean_spans_per_fact: f64,
}

fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

impl CorpusStats {
    pub fn overlapping_pct(&self) -> f64 {
        percent(self.overlapping, self.sentences)
    }

    pub fn discontinuous_pct(&self) -> f64 {
        percent(self.discontinuous, self.sentences)
    }

    pub fn nested_pct(&self) -> f64 {
        percent(self.nested, self.sentences)
    }

    pub fn complicated_pct(&self) -> f64 {
        percent(self.complicated, self.sentences)
    }

    pub fn bin_pct(&self, bin: usize) -> f64 {
        percent(self.fact_count_bins[bin], self.sentences)
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "sentences\t{}", self.sentences);
        let _ = writeln!(out, "facts\t{}", self.facts);
        let _ = writeln!(out, "mean_spans_per_fact\t{:.4}", self.mean_spans_per_fact);
        for (domain, count) in &self.domains {
            let _ = writeln!(
                out,
                "domain\t{domain}\t{count}\t{:.4}",
                percent(*count, self.sentences)
            );
        }
        for (name, count, pct) in [
            ("overlapping", self.overlapping, self.overlapping_pct()),
            ("discontinuous", self.discontinuous, self.discontinuous_pct()),
            ("nested", self.nested, self.nested_pct()),
            ("complicated", self.complicated, self.complicated_pct()),
        ] {
            let _ = writeln!(out, "{name}\t{count}\t{pct:.4}");
        }
        for bin in 0..FACT_COUNT_BINS.len() {
            let _ = writeln!(
                out,
                "facts_per_sentence\t{}\t{}\t{:.4}",
                bin_label(bin),
                self.fact_count_bins[bin],
                self.bin_pct(bin)
            );
        }
        out
    }
}

pub fn corpus_stats(records: &[CorpusRecord]) -> Result<CorpusStats> {
    let mut stats = CorpusStats {
        sentences: records.len(),
        ..CorpusStats::default()
    };
    let mut spans = 0usize;
    for record in records {
        let annotated = record.to_annotated()?;
        stats.facts += record.facts.len();
        spans += record.facts.iter().map(Fact::span_count).sum::<usize>();
        if let Some(d) = &record.domain {
            *stats.domains.entry(d.clone()).or_default() += 1;
        }
        let flags = classify_sentence(&annotated);
        stats.overlapping += usize::from(flags.overlapping);
        stats.discontinuous += usize::from(flags.discontinuous);
        stats.nested += usize::from(flags.nested);
        stats.complicated += usize::from(flags.is_complicated());
        stats.fact_count_bins[fact_count_bin(record.facts.len())] += 1;
    }
    stats.mean_spans_per_fact = if stats.facts == 0 {
        0.0
    } else {
        spans as f64 / stats.facts as f64
    };
    Ok(stats)
}

pub fn to_annotated(records: &[CorpusRecord]) -> Result<Vec<AnnotatedSentence>> {
    records.iter().map(CorpusRecord::to_annotated).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = r#"{"id":"a","domain":null,"tokens":["x","y","z"],"facts":[{"elements":[{"role":"subject","spans":[[0,0]],"virtual":null},{"role":"predicate","spans":[[1,2]],"virtual":null}]}]}"#;

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(parse_corpus_str("").unwrap().is_empty());
        assert!(parse_corpus_str("\n\n").unwrap().is_empty());
    }

    #[test]
    fn write_parse_identity() {
        let text = format!("{ONE}\n");
        let records = parse_corpus_str(&text).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(corpus_to_string(&records), text);
    }

    #[test]
    fn malformed_line_reports_position() {
        let text = format!("{ONE}\n{{\"id\": 3}}\n");
        match parse_corpus_str(&text).unwrap_err() {
            Error::Parse { line, offset, .. } => {
                assert_eq!(line, 2);
                assert!(offset > ONE.len() && offset <= text.len());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reversed_span_names_record() {
        let text = ONE.replace("[[1,2]]", "[[5,2]]");
        let err = parse_corpus_str(&text).unwrap_err();
        assert_eq!(err.code(), "invalid-record");
        assert!(err.to_string().contains("`a`"));
    }

    #[test]
    fn predictions_keep_confidence() {
        let line = r#"{"id":"a","facts":[{"elements":[{"role":"subject","spans":[[0,0]],"virtual":null}],"confidence":0.5}]}"#;
        let preds = parse_predictions_str(line).unwrap();
        assert_eq!(preds[0].facts[0].confidence, Some(0.5));
        assert_eq!(predictions_to_string(&preds), format!("{line}\n"));
        let bad = line.replace("0.5", "1.5");
        assert!(parse_predictions_str(&bad).is_err());
    }

    #[test]
    fn bins_follow_table() {
        let labels: Vec<String> = (0..5).map(bin_label).collect();
        assert_eq!(labels, ["[0,3]", "[4,6]", "[7,9]", "[10,12]", "[13,inf)"]);
        for (count, bin) in [(0, 0), (3, 0), (4, 1), (5, 1), (6, 1), (7, 2), (9, 2), (10, 3), (12, 3), (13, 4), (99, 4)] {
            assert_eq!(fact_count_bin(count), bin, "count {count}");
        }
    }

    #[test]
    fn generator_is_deterministic_and_valid() {
        let schema = Schema::saoke();
        let config = GenConfig::saoke_like(200, 11);
        let a = generate_synthetic(&config, &schema).unwrap();
        let b = generate_synthetic(&config, &schema).unwrap();
        assert_eq!(corpus_to_string(&a), corpus_to_string(&b));
        validate_corpus(&a, &schema).unwrap();
        let c = generate_synthetic(&GenConfig { seed: 12, ..config }, &schema).unwrap();
        assert_ne!(corpus_to_string(&a), corpus_to_string(&c));
    }

    #[test]
    fn zero_rates_give_simple_sentences() {
        let schema = Schema::saoke();
        let config = GenConfig {
            sentences: 300,
            fact_counts: vec![(1, 0.2), (2, 0.4), (5, 0.4)],
            ..GenConfig::default()
        };
        let records = generate_synthetic(&config, &schema).unwrap();
        let stats = corpus_stats(&records).unwrap();
        assert_eq!(stats.complicated, 0);
    }

    #[test]
    fn realized_discontinuity_rate() {
        let schema = Schema::saoke();
        let config = GenConfig {
            sentences: 2000,
            discontinuity_rate: 0.8,
            seed: 3,
            ..GenConfig::default()
        };
        let stats = corpus_stats(&generate_synthetic(&config, &schema).unwrap()).unwrap();
        let rate = stats.discontinuous_pct() / 100.0;
        assert!((0.75..=0.85).contains(&rate), "{rate}");
        assert_eq!(stats.overlapping + stats.nested, 0);
    }

    #[test]
    fn realized_rates_track_requests() {
        let schema = Schema::saoke();
        let config = GenConfig {
            sentences: 1500,
            overlap_rate: 0.3,
            nesting_rate: 0.5,
            discontinuity_rate: 0.2,
            virtual_rate: 0.2,
            seed: 5,
            ..GenConfig::default()
        };
        let records = generate_synthetic(&config, &schema).unwrap();
        validate_corpus(&records, &schema).unwrap();
        let stats = corpus_stats(&records).unwrap();
        for (got, want) in [
            (stats.overlapping_pct(), 30.0),
            (stats.nested_pct(), 50.0),
            (stats.discontinuous_pct(), 20.0),
        ] {
            assert!((got - want).abs() <= 5.0, "{got} vs {want}");
        }
    }

    #[test]
    fn shared_begin_and_shared_end_nesting_both_occur() {
        let schema = Schema::saoke();
        let config = GenConfig {
            sentences: 200,
            nesting_rate: 1.0,
            seed: 9,
            ..GenConfig::default()
        };
        let (mut same_begin, mut same_end) = (false, false);
        for record in generate_synthetic(&config, &schema).unwrap() {
            let spans: Vec<Span> = record
                .facts
                .iter()
                .flat_map(|f| &f.elements)
                .flat_map(|e| e.spans.iter().copied())
                .collect();
            for a in &spans {
                for b in &spans {
                    if a != b && a.begin == b.begin {
                        same_begin = true;
                    }
                    if a != b && a.end == b.end {
                        same_end = true;
                    }
                }
            }
        }
        assert!(same_begin && same_end);
    }

    #[test]
    fn infeasible_configs_rejected() {
        let schema = Schema::saoke();
        let one_token = GenConfig {
            nesting_rate: 1.0,
            span_lengths: vec![(1, 1.0)],
            ..GenConfig::default()
        };
        assert_eq!(generate_synthetic(&one_token, &schema).unwrap_err().code(), "infeasible-config");
        let single_span = GenConfig {
            span_counts: vec![(1, 1.0)],
            ..GenConfig::default()
        };
        assert_eq!(generate_synthetic(&single_span, &schema).unwrap_err().code(), "infeasible-config");
        let bad_rate = GenConfig {
            overlap_rate: 1.5,
            ..GenConfig::default()
        };
        assert_eq!(generate_synthetic(&bad_rate, &schema).unwrap_err().code(), "invalid-config");
    }

    #[test]
    fn stats_on_fixture() {
        let mut record = parse_corpus_str(ONE).unwrap().remove(0);
        record.facts = vec![record.facts[0].clone(); 5];
        let stats = corpus_stats(&[record]).unwrap();
        assert_eq!(stats.fact_count_bins, [0, 1, 0, 0, 0]);
        assert!(stats.overlapping_pct() == 100.0);
        assert!(stats.report().contains("facts_per_sentence\t[4,6]\t1\t100.0000"));
    }
}
