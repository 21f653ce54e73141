//! Maximal-clique expression of facts, the baseline the DAG codec is measured against.
//!
//! Every pair of spans in a fact is linked boundary-to-boundary with four
//! position-tagged edges labeled by the ordered role pair. Consecutive spans
//! of one element get four extra `NEXT` edges, and a virtual predicate is a
//! synthetic vertex appended after the last token, linked to the boundaries of
//! every other span. Decoding rebuilds span nodes from complete four-edge
//! groups and reads facts off the maximal cliques of the span graph.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::time::Instant;

use crate::codec::{edge_type_space, fact_edges, CodecVariant, Decoder, EdgeMatrix};
use crate::error::{Error, Result};
use crate::model::{
    ordered_fact_spans, AnnotatedSentence, Element, Fact, FactKey, Schema, Sentence, Span,
    OBJECT, PREDICATE, SUBJECT,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PositionTag {
    B2B,
    B2E,
    E2B,
    E2E,
}

impl PositionTag {
    pub const ALL: [PositionTag; 4] = [
        PositionTag::B2B,
        PositionTag::B2E,
        PositionTag::E2B,
        PositionTag::E2E,
    ];

    fn as_str(&self) -> &'static str {
        match self {
            PositionTag::B2B => "B2B",
            PositionTag::B2E => "B2E",
            PositionTag::E2B => "E2B",
            PositionTag::E2E => "E2E",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CliqueLabel {
    RolePair(usize, usize),
    Next,
    Virtual(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CliqueEdgeType {
    pub label: CliqueLabel,
    pub tag: PositionTag,
}

#[derive(Clone, Debug)]
pub struct CliqueEdgeTypeSpace {
    schema: Schema,
    types: Vec<CliqueEdgeType>,
    index: HashMap<CliqueEdgeType, usize>,
}

pub fn clique_edge_type_space(schema: &Schema) -> Result<CliqueEdgeTypeSpace> {
    let r = schema.roles().len();
    if r == 0 {
        return Err(Error::EmptySchema);
    }
    let mut labels: Vec<CliqueLabel> = Vec::with_capacity(r * r + 1);
    for a in 0..r {
        labels.extend((0..r).map(|b| CliqueLabel::RolePair(a, b)));
    }
    labels.push(CliqueLabel::Next);
    labels.extend((0..schema.virtual_predicates().len()).map(CliqueLabel::Virtual));
    let types: Vec<CliqueEdgeType> = labels
        .into_iter()
        .flat_map(|label| PositionTag::ALL.map(|tag| CliqueEdgeType { label, tag }))
        .collect();
    let index = types.iter().enumerate().map(|(k, &t)| (t, k)).collect();
    Ok(CliqueEdgeTypeSpace {
        schema: schema.clone(),
        types,
        index,
    })
}

impl CliqueEdgeTypeSpace {
    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn types(&self) -> &[CliqueEdgeType] {
        &self.types
    }

    pub fn channel(&self, ty: CliqueEdgeType) -> Option<usize> {
        self.index.get(&ty).copied()
    }

    pub fn name(&self, channel: usize) -> String {
        let ty = self.types[channel];
        let roles = self.schema.roles();
        match ty.label {
            CliqueLabel::RolePair(a, b) => {
                format!("ROLE-PAIR->{}->{}-{}", roles[a], roles[b], ty.tag.as_str())
            }
            CliqueLabel::Next => format!("NEXT-{}", ty.tag.as_str()),
            CliqueLabel::Virtual(v) => format!(
                "PREDEFINED-CLI->{}-{}",
                self.schema.virtual_predicates()[v],
                ty.tag.as_str()
            ),
        }
    }

    fn required(&self, label: CliqueLabel, tag: PositionTag) -> usize {
        self.channel(CliqueEdgeType { label, tag })
            .expect("clique edge type belongs to its space")
    }
}

/// Labeled undirected graph over token positions plus one synthetic vertex
/// per virtual predicate (indices `n..n+v`). Each edge is stored with the
/// vertex of the earlier span (or the virtual vertex) first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UndirectedLabeledGraph {
    n_tokens: usize,
    n_vertices: usize,
    edges: BTreeSet<(usize, usize, usize)>,
}

impl UndirectedLabeledGraph {
    pub fn new(n_tokens: usize, n_virtual: usize) -> Self {
        UndirectedLabeledGraph {
            n_tokens,
            n_vertices: n_tokens + n_virtual,
            edges: BTreeSet::new(),
        }
    }

    pub fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Inserts `(u, v, type)`; self loops are refused.
    pub fn insert(&mut self, u: usize, v: usize, ty: usize) -> bool {
        if u == v || u >= self.n_vertices || v >= self.n_vertices {
            return false;
        }
        self.edges.insert((u, v, ty))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.edges.iter().copied()
    }
}

/// Boundary edges of one fact before any union with other facts.
pub fn fact_clique_edges(
    fact: &Fact,
    space: &CliqueEdgeTypeSpace,
    n_tokens: usize,
) -> Result<Vec<(usize, usize, usize)>> {
    let schema = space.schema();
    let spans = ordered_fact_spans(fact, schema)?;
    let mut edges = Vec::new();

    let link = |edges: &mut Vec<(usize, usize, usize)>, a: Span, b: Span, label| {
        edges.push((a.begin, b.begin, space.required(label, PositionTag::B2B)));
        edges.push((a.begin, b.end, space.required(label, PositionTag::B2E)));
        edges.push((a.end, b.begin, space.required(label, PositionTag::E2B)));
        edges.push((a.end, b.end, space.required(label, PositionTag::E2E)));
    };

    for (x, a) in spans.iter().enumerate() {
        for b in &spans[x + 1..] {
            link(&mut edges, a.span, b.span, CliqueLabel::RolePair(a.role, b.role));
        }
    }
    for element in fact.elements.iter().filter(|e| !e.is_virtual()) {
        for pair in element.spans.windows(2) {
            link(&mut edges, pair[0], pair[1], CliqueLabel::Next);
        }
    }
    if let Some(name) = fact.virtual_predicate() {
        let v = schema
            .virtual_index(name)
            .ok_or_else(|| Error::UnknownVirtual(name.to_string()))?;
        let vertex = n_tokens + v;
        let point = Span::new(vertex, vertex);
        for rs in &spans {
            link(&mut edges, point, rs.span, CliqueLabel::Virtual(v));
        }
    }
    Ok(edges)
}

pub fn clique_encode(annotated: &AnnotatedSentence, schema: &Schema) -> Result<UndirectedLabeledGraph> {
    let space = clique_edge_type_space(schema)?;
    clique_encode_with(annotated, &space)
}

pub fn clique_encode_with(
    annotated: &AnnotatedSentence,
    space: &CliqueEdgeTypeSpace,
) -> Result<UndirectedLabeledGraph> {
    let n = annotated.sentence.len();
    let mut graph = UndirectedLabeledGraph::new(n, space.schema().virtual_predicates().len());
    for fact in &annotated.facts {
        for (u, v, ty) in fact_clique_edges(fact, space, n)? {
            graph.insert(u, v, ty);
        }
    }
    Ok(graph)
}

/// Simple undirected graph in adjacency-bitset form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimpleGraph {
    adjacency: Vec<BitSet>,
}

impl SimpleGraph {
    pub fn new(n: usize) -> Self {
        SimpleGraph {
            adjacency: vec![BitSet::new(n); n],
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = SimpleGraph::new(n);
        for (u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn add_edge(&mut self, u: usize, v: usize) {
        if u != v {
            self.adjacency[u].insert(v);
            self.adjacency[v].insert(u);
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].contains(v)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    fn new(n: usize) -> Self {
        BitSet {
            words: vec![0; n.div_ceil(64)],
        }
    }

    fn full(n: usize) -> Self {
        let mut s = BitSet::new(n);
        for i in 0..n {
            s.insert(i);
        }
        s
    }

    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn and(&self, other: &BitSet) -> BitSet {
        BitSet {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        }
    }

    fn and_not(&self, other: &BitSet) -> BitSet {
        BitSet {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect(),
        }
    }

    fn count_and(&self, other: &BitSet) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * 64 + tz)
            })
        })
    }
}

/// Every maximal clique of `graph`, each as a sorted vertex list, in
/// lexicographic order. Bron-Kerbosch with Tomita pivoting.
pub fn bron_kerbosch(graph: &SimpleGraph) -> Vec<Vec<usize>> {
    let n = graph.len();
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut current = Vec::new();
    expand(graph, &mut current, BitSet::full(n), BitSet::new(n), &mut out);
    for clique in &mut out {
        clique.sort_unstable();
    }
    out.sort();
    out
}

fn expand(
    graph: &SimpleGraph,
    current: &mut Vec<usize>,
    mut candidates: BitSet,
    mut excluded: BitSet,
    out: &mut Vec<Vec<usize>>,
) {
    if candidates.is_empty() {
        if excluded.is_empty() {
            out.push(current.clone());
        }
        return;
    }
    let pivot = candidates
        .iter()
        .chain(excluded.iter())
        .max_by_key(|&u| (candidates.count_and(&graph.adjacency[u]), std::cmp::Reverse(u)))
        .expect("candidates is non-empty");
    let branch = candidates.and_not(&graph.adjacency[pivot]);
    for v in branch.iter() {
        let neighbours = &graph.adjacency[v];
        current.push(v);
        expand(
            graph,
            current,
            candidates.and(neighbours),
            excluded.and(neighbours),
            out,
        );
        current.pop();
        candidates.remove(v);
        excluded.insert(v);
    }
}

/// Facts read off a clique graph, plus the cliques that were rejected.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CliqueDecoding {
    pub facts: Vec<Fact>,
    pub diagnostics: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Node {
    Span(Span, usize),
    Virtual(usize),
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Span(s, r) => write!(f, "[{},{}]#{r}", s.begin, s.end),
            Node::Virtual(v) => write!(f, "virtual#{v}"),
        }
    }
}

pub fn clique_decode(
    graph: &UndirectedLabeledGraph,
    sentence: &Sentence,
    schema: &Schema,
) -> Result<CliqueDecoding> {
    let space = clique_edge_type_space(schema)?;
    clique_decode_with(graph, sentence, &space)
}

pub fn clique_decode_with(
    graph: &UndirectedLabeledGraph,
    sentence: &Sentence,
    space: &CliqueEdgeTypeSpace,
) -> Result<CliqueDecoding> {
    let schema = space.schema();
    if graph.n_tokens() != sentence.len()
        || graph.n_vertices() != sentence.len() + schema.virtual_predicates().len()
    {
        return Err(Error::ShapeMismatch(format!(
            "graph over {} tokens vs sentence of {}",
            graph.n_tokens(),
            sentence.len()
        )));
    }
    let n = graph.n_tokens();
    let edge_set: HashSet<(usize, usize, usize)> = graph.edges().collect();

    // Span pairs are recovered from B2B anchors; the other three position
    // edges must carry the same label.
    let mut b2e_from: HashMap<(usize, CliqueLabel), Vec<usize>> = HashMap::new();
    let mut e2b_to: HashMap<(usize, CliqueLabel), Vec<usize>> = HashMap::new();
    let mut b2b = Vec::new();
    for (u, v, ty) in graph.edges() {
        let t = space.types()[ty];
        match t.tag {
            PositionTag::B2B => b2b.push((u, v, t.label)),
            PositionTag::B2E => b2e_from.entry((u, t.label)).or_default().push(v),
            PositionTag::E2B => e2b_to.entry((v, t.label)).or_default().push(u),
            PositionTag::E2E => {}
        }
    }
    let has = |u: usize, v: usize, label: CliqueLabel, tag: PositionTag| {
        space
            .channel(CliqueEdgeType { label, tag })
            .is_some_and(|k| edge_set.contains(&(u, v, k)))
    };

    let mut nodes: BTreeMap<Node, usize> = BTreeMap::new();
    let mut node_list: Vec<Node> = Vec::new();
    let mut intern = |node: Node, nodes: &mut BTreeMap<Node, usize>| -> usize {
        *nodes.entry(node).or_insert_with(|| {
            node_list.push(node);
            node_list.len() - 1
        })
    };
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut next_links: HashSet<(Span, Span)> = HashSet::new();

    for &(ba, bb, label) in &b2b {
        let (Some(ends_b), Some(ends_a)) = (b2e_from.get(&(ba, label)), e2b_to.get(&(bb, label)))
        else {
            continue;
        };
        for &eb in ends_b {
            for &ea in ends_a {
                if !has(ea, eb, label, PositionTag::E2E) {
                    continue;
                }
                match label {
                    CliqueLabel::RolePair(ra, rb) => {
                        if ea < ba || eb < bb || ea >= n || eb >= n {
                            continue;
                        }
                        let a = intern(Node::Span(Span::new(ba, ea), ra), &mut nodes);
                        let b = intern(Node::Span(Span::new(bb, eb), rb), &mut nodes);
                        pairs.push((a, b));
                    }
                    CliqueLabel::Next => {
                        next_links.insert((Span::new(ba, ea), Span::new(bb, eb)));
                    }
                    CliqueLabel::Virtual(v) => {
                        if ba == n + v && ea == ba {
                            intern(Node::Virtual(v), &mut nodes);
                        }
                    }
                }
            }
        }
    }
    // Virtual edges carry no role, so they attach once every span node is known.
    for &(ba, bb, label) in &b2b {
        if let CliqueLabel::Virtual(v) = label {
            if ba != n + v {
                continue;
            }
            let Some(vnode) = nodes.get(&Node::Virtual(v)).copied() else {
                continue;
            };
            for &eb in b2e_from.get(&(ba, label)).into_iter().flatten() {
                if eb < bb || !has(ba, eb, label, PositionTag::E2E) || !has(ba, bb, label, PositionTag::E2B) {
                    continue;
                }
                let span = Span::new(bb, eb);
                for (_, &id) in nodes.range(Node::Span(span, 0)..=Node::Span(span, usize::MAX)) {
                    pairs.push((vnode, id));
                }
            }
        }
    }

    let mut span_graph = SimpleGraph::new(node_list.len());
    for (a, b) in pairs {
        span_graph.add_edge(a, b);
    }

    let mut decoding = CliqueDecoding::default();
    let mut candidates: Vec<(Fact, Vec<(usize, usize, usize)>)> = Vec::new();
    for clique in bron_kerbosch(&span_graph) {
        if clique.len() < 2 {
            continue;
        }
        let members: Vec<Node> = clique.iter().map(|&i| node_list[i]).collect();
        let fact = assemble(&members, &next_links, schema).and_then(|fact| {
            let edges = fact_clique_edges(&fact, space, n).map_err(|e| e.to_string())?;
            match edges.iter().find(|e| !edge_set.contains(e)) {
                Some(&(u, v, k)) => Err(format!("missing edge {u}-{v} {}", space.name(k))),
                None => Ok((fact, edges)),
            }
        });
        match fact {
            Ok(candidate) => candidates.push(candidate),
            Err(reason) => {
                let list: Vec<String> = members.iter().map(Node::to_string).collect();
                decoding
                    .diagnostics
                    .push(format!("clique {{{}}}: {reason}", list.join(", ")));
            }
        }
    }

    // Shared boundaries let spurious spans (e.g. [b1, e2] from two adjacent
    // spans sharing a partner) form cliques whose edges are all already
    // explained by larger facts; keep a clique only if it explains a new edge.
    candidates.sort_by(|a, b| {
        b.1.len()
            .cmp(&a.1.len())
            .then_with(|| FactKey::of(&a.0, schema).cmp(&FactKey::of(&b.0, schema)))
    });
    let mut explained: HashSet<(usize, usize, usize)> = HashSet::new();
    let mut found: BTreeMap<FactKey, Fact> = BTreeMap::new();
    for (fact, edges) in candidates {
        let mut fresh = false;
        for e in edges {
            fresh |= explained.insert(e);
        }
        if fresh {
            found.entry(FactKey::of(&fact, schema)).or_insert(fact);
        }
    }
    decoding.facts = found.into_values().collect();
    Ok(decoding)
}

fn assemble(
    members: &[Node],
    next_links: &HashSet<(Span, Span)>,
    schema: &Schema,
) -> std::result::Result<Fact, String> {
    let roles = schema.roles();
    let mut by_role: BTreeMap<usize, Vec<Span>> = BTreeMap::new();
    let mut virtuals = Vec::new();
    let mut seen_spans = HashSet::new();
    for node in members {
        match *node {
            Node::Span(span, role) => {
                if !seen_spans.insert(span) {
                    return Err(format!("span [{},{}] carries two roles", span.begin, span.end));
                }
                by_role.entry(role).or_default().push(span);
            }
            Node::Virtual(v) => virtuals.push(v),
        }
    }
    if virtuals.len() > 1 {
        return Err("more than one virtual predicate".into());
    }
    let object = schema.role_index(OBJECT);
    let mut elements = Vec::new();
    for (role, mut spans) in by_role {
        spans.sort();
        if Some(role) == object {
            // objects split where consecutive spans lack a NEXT link
            let mut group = vec![spans[0]];
            for pair in spans.windows(2) {
                if next_links.contains(&(pair[0], pair[1])) {
                    group.push(pair[1]);
                } else {
                    elements.push(Element::concrete(roles[role].clone(), group.drain(..)));
                    group.push(pair[1]);
                }
            }
            elements.push(Element::concrete(roles[role].clone(), group));
        } else {
            elements.push(Element::concrete(roles[role].clone(), spans));
        }
    }
    let has_predicate = elements.iter().any(|e| e.role == PREDICATE);
    match (virtuals.first(), has_predicate) {
        (Some(_), true) => return Err("virtual and concrete predicate together".into()),
        (Some(&v), false) => {
            elements.push(Element::virtual_predicate(
                schema.virtual_predicates()[v].clone(),
            ));
        }
        (None, false) => return Err("no predicate".into()),
        (None, true) => {}
    }
    if !elements.iter().any(|e| e.role == SUBJECT) {
        return Err("no subject".into());
    }
    Ok(Fact::new(elements))
}

/// Side-by-side structural comparison of the DAG and clique representations.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationComparison {
    pub facts: usize,
    pub dag_edges_per_fact: f64,
    pub clique_edges_per_fact: f64,
    pub dag_types: usize,
    pub clique_types: usize,
    pub dag_decode_ms: f64,
    pub clique_decode_ms: f64,
}

impl RepresentationComparison {
    pub fn type_reduction(&self) -> f64 {
        1.0 - self.dag_types as f64 / self.clique_types as f64
    }

    pub fn edge_reduction(&self) -> f64 {
        1.0 - self.dag_edges_per_fact / self.clique_edges_per_fact
    }

    pub fn speedup(&self) -> f64 {
        self.clique_decode_ms / self.dag_decode_ms
    }

    /// Rows in `corpus,representation,edges_per_fact,types,decode_ms` form, with header.
    pub fn to_csv(&self, corpus: &str) -> String {
        format!(
            "corpus,representation,edges_per_fact,types,decode_ms\n\
             {corpus},dag,{:.4},{},{:.4}\n\
             {corpus},clique,{:.4},{},{:.4}\n",
            self.dag_edges_per_fact,
            self.dag_types,
            self.dag_decode_ms,
            self.clique_edges_per_fact,
            self.clique_types,
            self.clique_decode_ms
        )
    }
}

/// Measures both representations on the facts the DAG codec can express.
/// Decode times are wall-clock over the whole corpus with edges pre-built.
pub fn compare_representations(
    corpus: &[AnnotatedSentence],
    schema: &Schema,
) -> Result<RepresentationComparison> {
    let dag_space = edge_type_space(schema, CodecVariant::FULL)?;
    let clique_space = clique_edge_type_space(schema)?;

    let mut facts = 0usize;
    let (mut dag_edges, mut clique_edges) = (0usize, 0usize);
    let mut matrices = Vec::with_capacity(corpus.len());
    let mut graphs = Vec::with_capacity(corpus.len());
    for annotated in corpus {
        let n = annotated.sentence.len();
        let mut matrix = EdgeMatrix::new(n, dag_space.len());
        let mut graph = UndirectedLabeledGraph::new(n, schema.virtual_predicates().len());
        for fact in &annotated.facts {
            let Ok(edges) = fact_edges(fact, &dag_space)? else {
                continue;
            };
            facts += 1;
            dag_edges += edges.len();
            for (i, j, k) in edges {
                matrix.insert(i, j, k, None)?;
            }
            let cedges = fact_clique_edges(fact, &clique_space, n)?;
            clique_edges += cedges.len();
            for (u, v, k) in cedges {
                graph.insert(u, v, k);
            }
        }
        matrices.push(matrix);
        graphs.push(graph);
    }

    let decoder = Decoder::new(&dag_space);
    let start = Instant::now();
    for (matrix, annotated) in matrices.iter().zip(corpus) {
        std::hint::black_box(decoder.decode(matrix, &annotated.sentence)?);
    }
    let dag_decode_ms = start.elapsed().as_secs_f64() * 1e3;

    let start = Instant::now();
    for (graph, annotated) in graphs.iter().zip(corpus) {
        std::hint::black_box(clique_decode_with(graph, &annotated.sentence, &clique_space)?);
    }
    let clique_decode_ms = start.elapsed().as_secs_f64() * 1e3;

    let per_fact = |edges: usize| if facts == 0 { 0.0 } else { edges as f64 / facts as f64 };
    Ok(RepresentationComparison {
        facts,
        dag_edges_per_fact: per_fact(dag_edges),
        clique_edges_per_fact: per_fact(clique_edges),
        dag_types: dag_space.len(),
        clique_types: clique_space.len(),
        dag_decode_ms,
        clique_decode_ms,
    })
}
