//! Fact-level evaluation: Gestalt string matching and the two CaRB-style
//! word-overlap scores, each as F1, area under the P-R curve and optimal F1.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::corpus::{CorpusRecord, PredictionRecord};
use crate::error::{Error, Result};
use crate::model::{fact_to_string, Fact, FactKey, Schema, Sentence};

/// Ratcliff/Obershelp similarity over characters: `2M / (|a| + |b|)`, where
/// `M` is the number of characters matched by recursively taking the longest
/// common substring (leftmost in `a`, then in `b`) and recursing on both
/// sides. Two empty strings are identical.
pub fn gestalt_similarity(a: &str, b: &str) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (matched, total) = if a.is_ascii() && b.is_ascii() {
        (both_ways(a.as_bytes(), b.as_bytes()), a.len() + b.len())
    } else {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        (both_ways(&a, &b), a.len() + b.len())
    };
    2.0 * matched as f64 / total as f64
}

/// Tie-breaking favours the first argument, so the two orientations can
/// disagree; the better of the two keeps the score symmetric.
fn both_ways<T: Eq>(a: &[T], b: &[T]) -> usize {
    matched_chars(a, b).max(matched_chars(b, a))
}

fn matched_chars<T: Eq>(a: &[T], b: &[T]) -> usize {
    let (i, j, len) = longest_common_block(a, b);
    if len == 0 {
        return 0;
    }
    len + matched_chars(&a[..i], &b[..j]) + matched_chars(&a[i + len..], &b[j + len..])
}

/// Longest common substring; ties keep the smallest start in `a`, then in
/// `b`. Only the start of each diagonal run is extended, so every run is
/// walked once.
fn longest_common_block<T: Eq>(a: &[T], b: &[T]) -> (usize, usize, usize) {
    let mut best = (0, 0, 0);
    for i in 0..a.len() {
        if a.len() - i <= best.2 {
            break;
        }
        for j in 0..b.len() {
            if a[i] != b[j] || (i > 0 && j > 0 && a[i - 1] == b[j - 1]) {
                continue;
            }
            let len = a[i..].iter().zip(&b[j..]).take_while(|(x, y)| x == y).count();
            if len > best.2 {
                best = (i, j, len);
            }
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    CarbSingle,
    CarbMulti,
    Gestalt,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::CarbSingle, Metric::CarbMulti, Metric::Gestalt];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::CarbSingle => "carb-single",
            Metric::CarbMulti => "carb-multi",
            Metric::Gestalt => "gestalt",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchConfig {
    /// Gestalt similarity needed for a hit.
    pub gestalt_threshold: f64,
    /// Cutoffs for the P-R sweep; `None` sweeps every distinct confidence.
    pub curve_grid: Option<Vec<f64>>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            gestalt_threshold: 0.85,
            curve_grid: None,
        }
    }
}

impl MatchConfig {
    fn validate(&self) -> Result<()> {
        if !(self.gestalt_threshold > 0.0 && self.gestalt_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gestalt threshold {} outside (0,1]",
                self.gestalt_threshold
            )));
        }
        Ok(())
    }
}

/// Summed per-fact credit; micro-averaged precision and recall come from it.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tally {
    pub precision_sum: f64,
    pub predicted: usize,
    pub recall_sum: f64,
    pub gold: usize,
}

impl Tally {
    pub fn add(&mut self, other: &Tally) {
        self.precision_sum += other.precision_sum;
        self.predicted += other.predicted;
        self.recall_sum += other.recall_sum;
        self.gold += other.gold;
    }

    fn sub(&mut self, other: &Tally) {
        self.precision_sum -= other.precision_sum;
        self.predicted -= other.predicted;
        self.recall_sum -= other.recall_sum;
        self.gold -= other.gold;
    }

    /// With nothing predicted and nothing to find, both are 1; otherwise a
    /// zero denominator gives 0.
    pub fn precision_recall(&self) -> (f64, f64) {
        if self.predicted == 0 && self.gold == 0 {
            return (1.0, 1.0);
        }
        let div = |num: f64, den: usize| {
            if den == 0 {
                0.0
            } else {
                (num / den as f64).clamp(0.0, 1.0)
            }
        };
        (
            div(self.precision_sum, self.predicted),
            div(self.recall_sum, self.gold),
        )
    }

    pub fn scores(&self) -> Scores {
        let (p, r) = self.precision_recall();
        Scores::new(p, r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Scores {
    pub fn new(precision: f64, recall: f64) -> Self {
        Scores {
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Word-overlap precision and recall of one (gold, predicted) pair. Elements
/// are aligned by role after splicing same-role spans; common words are
/// counted as a multiset intersection per role.
pub fn carb_pair(gold: &Fact, pred: &Fact, sentence: &Sentence, schema: &Schema) -> (f64, f64) {
    let words = |fact: &Fact| -> BTreeMap<String, Vec<String>> {
        fact.spliced(schema)
            .elements
            .iter()
            .map(|e| {
                let w = e.words(sentence).into_iter().map(str::to_string).collect();
                (e.role.clone(), w)
            })
            .collect()
    };
    let g = words(gold);
    let p = words(pred);
    let gold_total: usize = g.values().map(Vec::len).sum();
    let pred_total: usize = p.values().map(Vec::len).sum();
    let mut common = 0usize;
    for (role, gw) in &g {
        let Some(pw) = p.get(role) else { continue };
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for w in gw {
            *counts.entry(w.as_str()).or_default() += 1;
        }
        for w in pw {
            if let Some(c) = counts.get_mut(w.as_str()) {
                if *c > 0 {
                    *c -= 1;
                    common += 1;
                }
            }
        }
    }
    let ratio = |den: usize| if den == 0 { 0.0 } else { common as f64 / den as f64 };
    (ratio(pred_total), ratio(gold_total))
}

/// Pairwise scores between the gold and predicted facts of one sentence,
/// computed once and reused at every cutoff.
#[derive(Clone, Debug)]
pub struct SentencePairs {
    gold_strings: Vec<String>,
    pred_strings: Vec<String>,
    /// `[g][p]` Gestalt similarity of canonical strings.
    similarity: Vec<Vec<f64>>,
    /// `[g][p]` CaRB pair (precision, recall).
    carb: Vec<Vec<(f64, f64)>>,
}

impl SentencePairs {
    pub fn new(gold: &[Fact], pred: &[Fact], sentence: &Sentence, schema: &Schema) -> Self {
        let text = |f: &Fact| fact_to_string(&f.spliced(schema), sentence, schema);
        let gold_strings: Vec<String> = gold.iter().map(text).collect();
        let pred_strings: Vec<String> = pred.iter().map(text).collect();
        let similarity = gold_strings
            .iter()
            .map(|g| pred_strings.iter().map(|p| gestalt_similarity(g, p)).collect())
            .collect();
        let carb = gold
            .iter()
            .map(|g| pred.iter().map(|p| carb_pair(g, p, sentence, schema)).collect())
            .collect();
        SentencePairs {
            gold_strings,
            pred_strings,
            similarity,
            carb,
        }
    }

    /// Credit for the predictions flagged in `keep` (all when `None`).
    pub fn tally(&self, metric: Metric, keep: Option<&[bool]>, config: &MatchConfig) -> Tally {
        let preds: Vec<usize> = (0..self.pred_strings.len())
            .filter(|&p| keep.is_none_or(|k| k[p]))
            .collect();
        let mut tally = Tally {
            predicted: preds.len(),
            gold: self.gold_strings.len(),
            ..Tally::default()
        };
        match metric {
            Metric::Gestalt => {
                for (g, p) in self.greedy(&preds, |g, p| self.similarity[g][p]) {
                    if self.similarity[g][p] >= config.gestalt_threshold {
                        tally.precision_sum += 1.0;
                        tally.recall_sum += 1.0;
                    }
                }
            }
            Metric::CarbSingle | Metric::CarbMulti => {
                let pair_f1 = |g: usize, p: usize| f1(self.carb[g][p].0, self.carb[g][p].1);
                // summed in gold order by both variants
                let mut recall = vec![0.0; self.gold_strings.len()];
                for (g, p) in self.greedy(&preds, pair_f1) {
                    tally.precision_sum += self.carb[g][p].0;
                    recall[g] = self.carb[g][p].1;
                }
                if metric == Metric::CarbMulti {
                    for (r, row) in recall.iter_mut().zip(&self.carb) {
                        *r = preds.iter().map(|&p| row[p].1).fold(0.0, f64::max);
                    }
                }
                tally.recall_sum = recall.iter().sum();
            }
        }
        tally
    }

    /// One-to-one matching by descending score; ties go to the
    /// lexicographically smaller (gold, predicted) string pair.
    fn greedy(&self, preds: &[usize], score: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(f64, usize, usize)> = (0..self.gold_strings.len())
            .flat_map(|g| preds.iter().map(move |&p| (g, p)))
            .map(|(g, p)| (score(g, p), g, p))
            .filter(|&(s, _, _)| s > 0.0)
            .collect();
        pairs.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.gold_strings[a.1].cmp(&self.gold_strings[b.1]))
                .then_with(|| self.pred_strings[a.2].cmp(&self.pred_strings[b.2]))
                .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
        });
        let mut gold_used = vec![false; self.gold_strings.len()];
        let mut pred_used = vec![false; self.pred_strings.len()];
        let mut out = Vec::new();
        for (_, g, p) in pairs {
            if !gold_used[g] && !pred_used[p] {
                gold_used[g] = true;
                pred_used[p] = true;
                out.push((g, p));
            }
        }
        out
    }
}

fn sentence_scores(
    metric: Metric,
    gold: &[Fact],
    pred: &[Fact],
    sentence: &Sentence,
    schema: &Schema,
    config: &MatchConfig,
) -> Scores {
    SentencePairs::new(gold, pred, sentence, schema)
        .tally(metric, None, config)
        .scores()
}

pub fn gestalt_score(
    gold: &[Fact],
    pred: &[Fact],
    sentence: &Sentence,
    schema: &Schema,
    config: &MatchConfig,
) -> Scores {
    sentence_scores(Metric::Gestalt, gold, pred, sentence, schema, config)
}

pub fn carb_single(gold: &[Fact], pred: &[Fact], sentence: &Sentence, schema: &Schema) -> Scores {
    let config = MatchConfig::default();
    sentence_scores(Metric::CarbSingle, gold, pred, sentence, schema, &config)
}

pub fn carb_multi(gold: &[Fact], pred: &[Fact], sentence: &Sentence, schema: &Schema) -> Scores {
    let config = MatchConfig::default();
    sentence_scores(Metric::CarbMulti, gold, pred, sentence, schema, &config)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub cutoff: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Trapezoidal area under precision over recall. Points are sorted by
/// recall (higher precision first on ties) and anchored at recall 0 with
/// the precision of the first point.
pub fn auc(points: &[CurvePoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.recall, p.precision)).collect();
    pts.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal))
    });
    let Some(&(_, first_p)) = pts.first() else {
        return 0.0;
    };
    let mut area = 0.0;
    let mut prev = (0.0, first_p);
    for &(r, p) in &pts {
        area += (r - prev.0) * (p + prev.1) / 2.0;
        prev = (r, p);
    }
    area
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub points: Vec<CurvePoint>,
    pub auc: f64,
    pub optimal_f1: f64,
}

impl Curve {
    pub fn from_points(points: Vec<CurvePoint>) -> Self {
        let auc = auc(&points);
        let optimal_f1 = points.iter().map(|p| p.f1).fold(0.0, f64::max);
        Curve {
            points,
            auc,
            optimal_f1,
        }
    }

    /// `cutoff,precision,recall,f1` with header, four decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cutoff,precision,recall,f1\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{:.4},{:.4},{:.4},{:.4}",
                p.cutoff, p.precision, p.recall, p.f1
            );
        }
        out
    }
}

/// One sentence's gold facts and scored predictions.
#[derive(Clone, Debug)]
pub struct ScoredSentence<'a> {
    pub sentence: &'a Sentence,
    pub gold: &'a [Fact],
    pub pred: &'a [Fact],
}

/// Keeps the highest-confidence copy of every structurally distinct prediction.
pub fn dedup_predictions(pred: &[Fact], schema: &Schema) -> Vec<Fact> {
    let mut best: BTreeMap<FactKey, Fact> = BTreeMap::new();
    for fact in pred {
        let key = FactKey::of(&fact.spliced(schema), schema);
        match best.get(&key) {
            Some(kept) if kept.confidence >= fact.confidence => {}
            _ => {
                best.insert(key, fact.clone());
            }
        }
    }
    best.into_values().collect()
}

/// Sweeps confidence cutoffs from high to low and reports micro-averaged
/// precision and recall at each one.
pub fn pr_curve(
    sentences: &[ScoredSentence<'_>],
    metric: Metric,
    schema: &Schema,
    config: &MatchConfig,
) -> Result<Curve> {
    config.validate()?;
    let prepared = prepare(sentences, schema)?;
    Ok(curve_from(&prepared, metric, config))
}

struct Prepared {
    pairs: Vec<SentencePairs>,
    confidences: Vec<Vec<f64>>,
}

fn prepare(sentences: &[ScoredSentence<'_>], schema: &Schema) -> Result<Prepared> {
    let mut pairs = Vec::with_capacity(sentences.len());
    let mut confidences = Vec::with_capacity(sentences.len());
    for s in sentences {
        let pred = dedup_predictions(s.pred, schema);
        let conf: Vec<f64> = pred
            .iter()
            .map(|f| f.confidence.ok_or_else(|| Error::MissingConfidence(s.sentence.id.clone())))
            .collect::<Result<_>>()?;
        pairs.push(SentencePairs::new(s.gold, &pred, s.sentence, schema));
        confidences.push(conf);
    }
    Ok(Prepared { pairs, confidences })
}

fn curve_from(prepared: &Prepared, metric: Metric, config: &MatchConfig) -> Curve {
    let mut cutoffs: Vec<f64> = match &config.curve_grid {
        Some(grid) => grid.clone(),
        None => prepared.confidences.iter().flatten().copied().collect(),
    };
    cutoffs.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    cutoffs.dedup();
    if cutoffs.is_empty() {
        cutoffs.push(1.0);
    }

    // each prediction enters once as the cutoff descends; only its sentence is rescored
    let mut entries: Vec<(f64, usize, usize)> = prepared
        .confidences
        .iter()
        .enumerate()
        .flat_map(|(s, conf)| conf.iter().enumerate().map(move |(p, &c)| (c, s, p)))
        .collect();
    entries.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));

    let mut keep: Vec<Vec<bool>> = prepared
        .confidences
        .iter()
        .map(|c| vec![false; c.len()])
        .collect();
    let mut per_sentence: Vec<Tally> = prepared
        .pairs
        .iter()
        .zip(&keep)
        .map(|(pairs, k)| pairs.tally(metric, Some(k), config))
        .collect();
    let mut total = Tally::default();
    for t in &per_sentence {
        total.add(t);
    }

    let mut next = 0;
    let mut points = Vec::with_capacity(cutoffs.len());
    for &cutoff in &cutoffs {
        let mut touched = Vec::new();
        while next < entries.len() && entries[next].0 >= cutoff {
            let (_, s, p) = entries[next];
            keep[s][p] = true;
            touched.push(s);
            next += 1;
        }
        touched.sort_unstable();
        touched.dedup();
        for s in touched {
            total.sub(&per_sentence[s]);
            per_sentence[s] = prepared.pairs[s].tally(metric, Some(&keep[s]), config);
            total.add(&per_sentence[s]);
        }
        let scores = total.scores();
        points.push(CurvePoint {
            cutoff,
            precision: scores.precision,
            recall: scores.recall,
            f1: scores.f1,
        });
    }
    Curve::from_points(points)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub metric: Metric,
    /// Scores over every prediction given (already thresholded upstream).
    pub scores: Scores,
    pub curve: Curve,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricSet {
    pub sentences: usize,
    pub reports: Vec<MetricReport>,
}

impl MetricSet {
    pub fn get(&self, metric: Metric) -> &MetricReport {
        self.reports
            .iter()
            .find(|r| r.metric == metric)
            .expect("every metric is reported")
    }

    /// `metric  F1  AUC  OptF1` rows with four decimals.
    pub fn table(&self) -> String {
        let mut out = String::from("metric\tprecision\trecall\tf1\tauc\topt_f1\n");
        for r in &self.reports {
            let _ = writeln!(
                out,
                "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
                r.metric.name(),
                r.scores.precision,
                r.scores.recall,
                r.scores.f1,
                r.curve.auc,
                r.curve.optimal_f1
            );
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub overall: MetricSet,
    pub domains: BTreeMap<String, MetricSet>,
}

impl EvalReport {
    pub fn text(&self) -> String {
        let mut out = self.overall.table();
        for (domain, set) in &self.domains {
            let _ = writeln!(out, "\n# domain {domain} ({} sentences)", set.sentences);
            out.push_str(&set.table());
        }
        out
    }
}

fn metric_set(sentences: &[ScoredSentence<'_>], schema: &Schema, config: &MatchConfig) -> Result<MetricSet> {
    let prepared = prepare(sentences, schema)?;
    let reports = Metric::ALL
        .iter()
        .map(|&metric| {
            let mut total = Tally::default();
            for pairs in &prepared.pairs {
                total.add(&pairs.tally(metric, None, config));
            }
            MetricReport {
                metric,
                scores: total.scores(),
                curve: curve_from(&prepared, metric, config),
            }
        })
        .collect();
    Ok(MetricSet {
        sentences: sentences.len(),
        reports,
    })
}

/// Scores a prediction file against gold. Every prediction id must name a
/// gold sentence; gold sentences without a prediction record count as having
/// no predictions.
pub fn evaluate(
    gold: &[CorpusRecord],
    predictions: &[PredictionRecord],
    schema: &Schema,
    config: &MatchConfig,
) -> Result<EvalReport> {
    config.validate()?;
    let mut by_id: HashMap<&str, &PredictionRecord> = HashMap::new();
    let gold_ids: HashMap<&str, ()> = gold.iter().map(|r| (r.id.as_str(), ())).collect();
    for p in predictions {
        if !gold_ids.contains_key(p.id.as_str()) {
            return Err(Error::Alignment(format!("prediction id `{}` not in gold", p.id)));
        }
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(Error::Alignment(format!("prediction id `{}` repeated", p.id)));
        }
    }
    let annotated = gold
        .iter()
        .map(CorpusRecord::to_annotated)
        .collect::<Result<Vec<_>>>()?;
    let empty: Vec<Fact> = Vec::new();
    let scored: Vec<ScoredSentence<'_>> = gold
        .iter()
        .zip(&annotated)
        .map(|(record, a)| ScoredSentence {
            sentence: &a.sentence,
            gold: &record.facts,
            pred: by_id
                .get(record.id.as_str())
                .map_or(empty.as_slice(), |p| p.facts.as_slice()),
        })
        .collect();

    let overall = metric_set(&scored, schema, config)?;
    let mut groups: BTreeMap<&str, Vec<ScoredSentence<'_>>> = BTreeMap::new();
    for (record, s) in gold.iter().zip(&scored) {
        if let Some(d) = &record.domain {
            groups.entry(d.as_str()).or_default().push(s.clone());
        }
    }
    let mut domains = BTreeMap::new();
    for (domain, group) in groups {
        domains.insert(domain.to_string(), metric_set(&group, schema, config)?);
    }
    Ok(EvalReport { overall, domains })
}
