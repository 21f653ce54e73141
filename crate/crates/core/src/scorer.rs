//! Trainable edge scorer: a windowed token encoder feeding a biaffine
//! pairwise head, with per-channel sigmoid outputs and binary cross-entropy
//! over the upper triangle (`i <= j`) of the token-pair grid.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::{s, Array1, Array2, Array3, ArrayD, ArrayViewD, ArrayViewMutD, Axis, IxDyn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{edge_type_space, encode_with, CodecVariant, Decoder, EdgeMatrix, EdgeTypeSpace};
use crate::error::{Error, Result};
use crate::metrics::{MatchConfig, Metric, SentencePairs, Tally};
use crate::model::{AnnotatedSentence, Fact, Schema, Sentence};

/// Index reserved for tokens never seen in training.
pub const UNK: usize = 0;
const UNK_TOKEN: &str = "<unk>";

/// Clamp applied to probabilities before taking logarithms.
pub const PROB_EPS: f64 = 1e-12;

/// Default threshold grid searched on the dev split.
pub const DEFAULT_GRID: [f64; 5] = [0.20, 0.25, 0.30, 0.35, 0.40];

#[derive(Clone, Debug, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Tokens in first-seen order after the reserved unknown token.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut vocab = Vocab {
            tokens: vec![UNK_TOKEN.to_string()],
            index: HashMap::new(),
        };
        for t in tokens {
            vocab.insert(t);
        }
        vocab
    }

    fn from_list(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(Error::Checkpoint("vocabulary must start with <unk>".into()));
        }
        let mut vocab = Vocab {
            tokens: vec![UNK_TOKEN.to_string()],
            index: HashMap::new(),
        };
        for t in &tokens[1..] {
            if vocab.index.contains_key(t) || t == UNK_TOKEN {
                return Err(Error::Checkpoint(format!("duplicate vocabulary entry `{t}`")));
            }
            vocab.insert(t);
        }
        Ok(vocab)
    }

    fn insert(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.index.insert(token.to_string(), self.tokens.len());
            self.tokens.push(token.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn ids(&self, sentence: &Sentence) -> Vec<usize> {
        sentence.tokens.iter().map(|t| self.id(t)).collect()
    }
}

/// Maps token ids to contextual vectors and back-propagates into its own
/// parameters.
pub trait Encoder {
    type Pass;

    fn dim(&self) -> usize;
    fn forward(&self, ids: &[usize]) -> Self::Pass;
    fn output<'a>(&self, pass: &'a Self::Pass) -> &'a Array2<f64>;
    /// Accumulates into `grad` the gradient given `d_out = dJ/dh`.
    fn backward(&self, ids: &[usize], pass: &Self::Pass, d_out: &Array2<f64>, grad: &mut Self);
}

/// `h_i = tanh(M [e_{i-w}; ...; e_{i+w}] + m)`, with zero vectors past either end.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowEncoder {
    pub window: usize,
    /// `|V| x d`
    pub embedding: Array2<f64>,
    /// `(2w+1)d x d`
    pub mixer: Array2<f64>,
    /// `d`
    pub mixer_bias: Array1<f64>,
}

pub struct WindowPass {
    inputs: Array2<f64>,
    hidden: Array2<f64>,
}

impl WindowEncoder {
    fn zeros(vocab: usize, dim: usize, window: usize) -> Self {
        WindowEncoder {
            window,
            embedding: Array2::zeros((vocab, dim)),
            mixer: Array2::zeros(((2 * window + 1) * dim, dim)),
            mixer_bias: Array1::zeros(dim),
        }
    }

    fn width(&self) -> usize {
        2 * self.window + 1
    }
}

impl Encoder for WindowEncoder {
    type Pass = WindowPass;

    fn dim(&self) -> usize {
        self.embedding.ncols()
    }

    fn forward(&self, ids: &[usize]) -> WindowPass {
        let (n, d, w) = (ids.len(), self.dim(), self.window);
        let mut inputs = Array2::zeros((n, self.width() * d));
        for i in 0..n {
            for o in 0..self.width() {
                let Some(pos) = (i + o).checked_sub(w).filter(|&p| p < n) else {
                    continue;
                };
                inputs
                    .slice_mut(s![i, o * d..(o + 1) * d])
                    .assign(&self.embedding.row(ids[pos]));
            }
        }
        let mut hidden = inputs.dot(&self.mixer) + &self.mixer_bias;
        hidden.mapv_inplace(f64::tanh);
        WindowPass { inputs, hidden }
    }

    fn output<'a>(&self, pass: &'a WindowPass) -> &'a Array2<f64> {
        &pass.hidden
    }

    fn backward(&self, ids: &[usize], pass: &WindowPass, d_out: &Array2<f64>, grad: &mut Self) {
        let (n, d, w) = (ids.len(), self.dim(), self.window);
        let d_pre = d_out * &pass.hidden.mapv(|h| 1.0 - h * h);
        grad.mixer += &pass.inputs.t().dot(&d_pre);
        grad.mixer_bias += &d_pre.sum_axis(Axis(0));
        let d_inputs = d_pre.dot(&self.mixer.t());
        for i in 0..n {
            for o in 0..self.width() {
                let Some(pos) = (i + o).checked_sub(w).filter(|&p| p < n) else {
                    continue;
                };
                let mut row = grad.embedding.row_mut(ids[pos]);
                row += &d_inputs.slice(s![i, o * d..(o + 1) * d]);
            }
        }
    }
}

/// Every trainable parameter, plus the vocabulary the embedding rows follow.
#[derive(Clone, Debug, PartialEq)]
pub struct ScorerParams {
    pub vocab: Vocab,
    pub encoder: WindowEncoder,
    /// `d x c x d`: `s_k += h_i^T U[:, k, :] h_j`
    pub bilinear: Array3<f64>,
    /// `c x 2d`: `s_k += W[k] . [h_i; h_j]`
    pub linear: Array2<f64>,
    /// `c`
    pub bias: Array1<f64>,
}

impl ScorerParams {
    pub fn zeros(vocab: Vocab, dim: usize, channels: usize, window: usize) -> Self {
        let v = vocab.len();
        ScorerParams {
            vocab,
            encoder: WindowEncoder::zeros(v, dim, window),
            bilinear: Array3::zeros((dim, channels, dim)),
            linear: Array2::zeros((channels, 2 * dim)),
            bias: Array1::zeros(channels),
        }
    }

    /// Uniform initialization scaled by fan-in and fan-out.
    pub fn random(vocab: Vocab, dim: usize, channels: usize, window: usize, rng: &mut impl Rng) -> Self {
        let mut p = ScorerParams::zeros(vocab, dim, channels, window);
        let width = (2 * window + 1) as f64;
        let scales = [
            1.0,
            (6.0 / (width * dim as f64 + dim as f64)).sqrt(),
            0.0,
            (3.0 / dim as f64).sqrt() / dim as f64,
            (6.0 / (2.0 * dim as f64 + channels as f64)).sqrt(),
            0.0,
        ];
        for (mut t, scale) in p.tensors_mut().into_iter().zip(scales) {
            if scale > 0.0 {
                t.mapv_inplace(|_| rng.gen_range(-scale..scale));
            }
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.encoder.dim()
    }

    pub fn channels(&self) -> usize {
        self.bias.len()
    }

    pub fn window(&self) -> usize {
        self.encoder.window
    }

    /// Parameter arrays in checkpoint order.
    pub fn tensors(&self) -> Vec<ArrayViewD<'_, f64>> {
        vec![
            self.encoder.embedding.view().into_dyn(),
            self.encoder.mixer.view().into_dyn(),
            self.encoder.mixer_bias.view().into_dyn(),
            self.bilinear.view().into_dyn(),
            self.linear.view().into_dyn(),
            self.bias.view().into_dyn(),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        vec![
            self.encoder.embedding.view_mut().into_dyn(),
            self.encoder.mixer.view_mut().into_dyn(),
            self.encoder.mixer_bias.view_mut().into_dyn(),
            self.bilinear.view_mut().into_dyn(),
            self.linear.view_mut().into_dyn(),
            self.bias.view_mut().into_dyn(),
        ]
    }

    pub const TENSOR_NAMES: [&'static str; 6] =
        ["embedding", "mixer", "mixer_bias", "bilinear", "linear", "bias"];

    fn zeros_like(&self) -> Self {
        ScorerParams::zeros(self.vocab.clone(), self.dim(), self.channels(), self.window())
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn encode_tokens(&self, sentence: &Sentence) -> Array2<f64> {
        let ids = self.vocab.ids(sentence);
        self.encoder.forward(&ids).hidden
    }

    /// Scores `s[i, j, k]` for `i <= j`; cells below the diagonal are left at 0
    /// and never used.
    pub fn biaffine_scores(&self, h: &Array2<f64>) -> Result<Array3<f64>> {
        let (n, d) = h.dim();
        if d != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "token vectors have {d} dims, scorer expects {}",
                self.dim()
            )));
        }
        let c = self.channels();
        let left = h.dot(&self.linear.slice(s![.., ..d]).t());
        let right = h.dot(&self.linear.slice(s![.., d..]).t());
        let mut out = Array3::zeros((n, n, c));
        for k in 0..c {
            let pair = h.dot(&self.bilinear.index_axis(Axis(1), k)).dot(&h.t());
            for i in 0..n {
                for j in i..n {
                    out[[i, j, k]] = pair[[i, j]] + left[[i, k]] + right[[j, k]] + self.bias[k];
                }
            }
        }
        Ok(out)
    }

    /// Probability tensor for one sentence.
    pub fn probabilities(&self, sentence: &Sentence) -> Array3<f64> {
        let h = self.encode_tokens(sentence);
        let scores = self.biaffine_scores(&h).expect("encoder output matches scorer width");
        edge_probabilities(&scores)
    }

    /// Loss and gradient of every parameter for one sentence.
    pub fn loss_and_gradient(&self, sentence: &Sentence, gold: &EdgeMatrix) -> Result<(f64, ScorerParams)> {
        let ids = self.vocab.ids(sentence);
        let pass = self.encoder.forward(&ids);
        let h = &pass.hidden;
        let scores = self.biaffine_scores(h)?;
        let probs = edge_probabilities(&scores);
        let loss = bce_loss(&probs, gold)?;

        let (n, d) = h.dim();
        let c = self.channels();
        let labels = dense_labels(gold);
        let mut g = &probs - &labels;
        for i in 0..n {
            for j in 0..i {
                g.slice_mut(s![i, j, ..]).fill(0.0);
            }
        }

        let mut grad = self.zeros_like();
        let mut d_h = Array2::<f64>::zeros((n, d));
        for k in 0..c {
            let gk = g.slice(s![.., .., k]);
            let uk = self.bilinear.index_axis(Axis(1), k);
            grad.bilinear
                .index_axis_mut(Axis(1), k)
                .assign(&h.t().dot(&gk).dot(h));
            d_h += &gk.dot(h).dot(&uk.t());
            d_h += &gk.t().dot(h).dot(&uk);
        }
        let rows = g.sum_axis(Axis(1));
        let cols = g.sum_axis(Axis(0));
        grad.linear.slice_mut(s![.., ..d]).assign(&rows.t().dot(h));
        grad.linear.slice_mut(s![.., d..]).assign(&cols.t().dot(h));
        d_h += &rows.dot(&self.linear.slice(s![.., ..d]));
        d_h += &cols.dot(&self.linear.slice(s![.., d..]));
        grad.bias = rows.sum_axis(Axis(0));
        self.encoder.backward(&ids, &pass, &d_h, &mut grad.encoder);
        Ok((loss, grad))
    }

    pub fn loss(&self, sentence: &Sentence, gold: &EdgeMatrix) -> Result<f64> {
        let h = self.encode_tokens(sentence);
        bce_loss(&edge_probabilities(&self.biaffine_scores(&h)?), gold)
    }

    /// Edges with probability at least `threshold`, probabilities attached.
    pub fn predict(&self, sentence: &Sentence, threshold: f64) -> EdgeMatrix {
        let probs = self.probabilities(sentence);
        let n = sentence.len();
        let mut matrix = EdgeMatrix::new(n, self.channels());
        for i in 0..n {
            for j in i..n {
                for k in 0..self.channels() {
                    let p = probs[[i, j, k]];
                    if p >= threshold {
                        matrix
                            .insert(i, j, k, Some(p))
                            .expect("cell inside the matrix");
                    }
                }
            }
        }
        matrix
    }

    /// Predicts, then decodes facts with confidences.
    pub fn extract(
        &self,
        sentence: &Sentence,
        decoder: &Decoder<'_>,
        threshold: f64,
    ) -> Result<Vec<Fact>> {
        decoder.decode(&self.predict(sentence, threshold), sentence)
    }

    fn axpy(&mut self, alpha: f64, other: &ScorerParams) {
        for (mut a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.scaled_add(alpha, &b);
        }
    }

    fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|t| t.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    fn scale(&mut self, factor: f64) {
        for mut t in self.tensors_mut() {
            t.mapv_inplace(|x| x * factor);
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn edge_probabilities(scores: &Array3<f64>) -> Array3<f64> {
    scores.mapv(sigmoid)
}

fn dense_labels(gold: &EdgeMatrix) -> Array3<f64> {
    let mut y = Array3::zeros((gold.n(), gold.n(), gold.channels()));
    for ((i, j, k), _) in gold.iter() {
        y[[i, j, k]] = 1.0;
    }
    y
}

/// `-sum_{i<=j,k} [y ln p + (1-y) ln(1-p)]` with `p` clamped to `[eps, 1-eps]`.
pub fn bce_loss(probs: &Array3<f64>, gold: &EdgeMatrix) -> Result<f64> {
    let (n, m, c) = probs.dim();
    if n != m || n != gold.n() || c != gold.channels() {
        return Err(Error::ShapeMismatch(format!(
            "probabilities {n}x{m}x{c} vs gold {}x{}x{}",
            gold.n(),
            gold.n(),
            gold.channels()
        )));
    }
    let mut loss = 0.0;
    for i in 0..n {
        for j in i..n {
            for k in 0..c {
                let p = probs[[i, j, k]].clamp(PROB_EPS, 1.0 - PROB_EPS);
                loss -= if gold.contains(i, j, k) { p.ln() } else { (1.0 - p).ln() };
            }
        }
    }
    Ok(loss)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub max_len: usize,
    pub threshold: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub dim: usize,
    pub window: usize,
    /// Rescales a batch gradient whose norm exceeds this value.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            momentum: 0.9,
            epochs: 30,
            max_len: 200,
            threshold: 0.3,
            seed: 0,
            batch_size: 1,
            dim: 32,
            window: 1,
            clip_norm: Some(5.0),
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0,1)");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 || self.dim == 0 || self.max_len == 0 {
            return bad("batch size, dimension and max length must be positive");
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return bad("learning rate must be positive and momentum in [0,1)");
        }
        if self.clip_norm.is_some_and(|c| !(c > 0.0)) {
            return bad("clip norm must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub dev_f1: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ScorerParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,loss,dev_f1\n");
    for r in history {
        out.push_str(&format!("{},{:.4},{:.4}\n", r.epoch, r.loss, r.dev_f1));
    }
    out
}

/// Cuts a sentence to `max_len` tokens, dropping facts that reach past it.
fn truncate(annotated: &AnnotatedSentence, max_len: usize) -> AnnotatedSentence {
    if annotated.sentence.len() <= max_len {
        return annotated.clone();
    }
    let sentence = Sentence {
        id: annotated.sentence.id.clone(),
        tokens: annotated.sentence.tokens[..max_len].to_vec(),
    };
    let facts = annotated
        .facts
        .iter()
        .filter(|f| f.elements.iter().flat_map(|e| &e.spans).all(|s| s.end < max_len))
        .cloned()
        .collect();
    AnnotatedSentence { sentence, facts }
}

/// Micro-averaged Gestalt F1 of decoded predictions at `threshold`.
pub fn gestalt_f1(
    params: &ScorerParams,
    corpus: &[AnnotatedSentence],
    space: &EdgeTypeSpace,
    threshold: f64,
) -> Result<f64> {
    let decoder = Decoder::new(space);
    let config = MatchConfig::default();
    let mut tally = Tally::default();
    for a in corpus {
        let pred = params.extract(&a.sentence, &decoder, threshold)?;
        let pairs = SentencePairs::new(&a.facts, &pred, &a.sentence, space.schema());
        tally.add(&pairs.tally(Metric::Gestalt, None, &config));
    }
    Ok(tally.scores().f1)
}

/// Stochastic gradient descent with momentum; returns the parameters of the
/// epoch with the best dev Gestalt F1, the latest on ties. An empty dev split
/// is replaced by the training split.
pub fn train(
    train: &[AnnotatedSentence],
    dev: &[AnnotatedSentence],
    schema: &Schema,
    variant: CodecVariant,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let train_ids: std::collections::HashSet<&str> =
        train.iter().map(|a| a.sentence.id.as_str()).collect();
    if let Some(a) = dev.iter().find(|a| train_ids.contains(a.sentence.id.as_str())) {
        return Err(Error::InvalidConfig(format!(
            "sentence `{}` is in both train and dev",
            a.sentence.id
        )));
    }
    let space = edge_type_space(schema, variant)?;
    let data: Vec<(AnnotatedSentence, EdgeMatrix)> = train
        .iter()
        .map(|a| {
            let a = truncate(a, config.max_len);
            let (m, _) = encode_with(&a, &space)?;
            Ok((a, m))
        })
        .collect::<Result<_>>()?;
    let dev_set: Vec<AnnotatedSentence> = if dev.is_empty() {
        data.iter().map(|(a, _)| a.clone()).collect()
    } else {
        dev.to_vec()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab = Vocab::build(data.iter().flat_map(|(a, _)| a.sentence.tokens.iter().map(String::as_str)));
    let mut params = ScorerParams::random(vocab, config.dim, space.len(), config.window, &mut rng);
    params.bias = label_prior_logits(&data, space.len());

    let mut velocity = params.zeros_like();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ScorerParams)> = None;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grad = params.zeros_like();
            for &idx in batch {
                let (a, gold) = &data[idx];
                let (loss, g) = params.loss_and_gradient(&a.sentence, gold)?;
                epoch_loss += loss;
                grad.axpy(1.0, &g);
            }
            if let Some(limit) = config.clip_norm {
                let norm = grad.norm();
                if norm > limit {
                    grad.scale(limit / norm);
                }
            }
            velocity.scale(config.momentum);
            velocity.axpy(1.0, &grad);
            params.axpy(-config.learning_rate, &velocity);
        }
        if !params.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "training diverged in epoch {epoch}; lower the learning rate"
            )));
        }
        let dev_f1 = gestalt_f1(&params, &dev_set, &space, config.threshold)?;
        history.push(EpochRecord {
            epoch,
            loss: epoch_loss,
            dev_f1,
        });
        if best.as_ref().is_none_or(|(f, _, _)| dev_f1 >= *f) {
            best = Some((dev_f1, epoch, params.clone()));
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
    })
}

fn label_prior_logits(data: &[(AnnotatedSentence, EdgeMatrix)], channels: usize) -> Array1<f64> {
    let mut positive = vec![0usize; channels];
    let mut cells = 0usize;
    for (a, m) in data {
        let n = a.sentence.len();
        cells += n * (n + 1) / 2;
        for ((_, _, k), _) in m.iter() {
            positive[k] += 1;
        }
    }
    Array1::from_iter(positive.into_iter().map(|p| {
        let q = (p as f64 / cells.max(1) as f64).clamp(1e-4, 0.5);
        (q / (1.0 - q)).ln()
    }))
}

/// Grid point with the best dev Gestalt F1; ties go to the larger threshold.
pub fn tune_threshold(
    params: &ScorerParams,
    dev: &[AnnotatedSentence],
    schema: &Schema,
    variant: CodecVariant,
    grid: &[f64],
) -> Result<f64> {
    if grid.is_empty() || grid.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
        return Err(Error::InvalidConfig("threshold grid must be non-empty within (0,1)".into()));
    }
    let space = edge_type_space(schema, variant)?;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for &delta in grid {
        let f = gestalt_f1(params, dev, &space, delta)?;
        if f > best.0 || (f == best.0 && delta > best.1) {
            best = (f, delta);
        }
    }
    Ok(best.1)
}

#[derive(Serialize, Deserialize)]
struct TensorFile {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    dim: usize,
    channels: usize,
    window: usize,
    schema: Schema,
    variant: VariantFlags,
    vocab: Vec<String>,
    tensors: Vec<TensorFile>,
}

#[derive(Serialize, Deserialize)]
struct VariantFlags {
    use_ee: bool,
    use_be: bool,
    role_pair_labels: bool,
}

const CHECKPOINT_FORMAT: &str = "dagie-scorer";
const CHECKPOINT_VERSION: u32 = 1;

/// A trained scorer together with the label space it was trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ScorerParams,
    pub schema: Schema,
    pub variant: CodecVariant,
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            dim: self.params.dim(),
            channels: self.params.channels(),
            window: self.params.window(),
            schema: self.schema.clone(),
            variant: VariantFlags {
                use_ee: self.variant.use_ee,
                use_be: self.variant.use_be,
                role_pair_labels: self.variant.role_pair_labels,
            },
            vocab: self.params.vocab.tokens.clone(),
            tensors: self
                .params
                .tensors()
                .iter()
                .zip(ScorerParams::TENSOR_NAMES)
                .map(|(t, name)| TensorFile {
                    name: name.into(),
                    shape: t.shape().to_vec(),
                    data: t.iter().copied().collect(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("checkpoint serializes")
    }

    /// Parses a checkpoint and checks every dimension against the label space
    /// of its schema and variant.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: CheckpointFile =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if file.format != CHECKPOINT_FORMAT || file.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                file.format, file.version
            )));
        }
        let variant = CodecVariant {
            use_ee: file.variant.use_ee,
            use_be: file.variant.use_be,
            role_pair_labels: file.variant.role_pair_labels,
        };
        let space = edge_type_space(&file.schema, variant)?;
        if file.channels != space.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} channels, schema and variant give {}",
                file.channels,
                space.len()
            )));
        }
        if file.dim == 0 {
            return Err(Error::Checkpoint("zero dimension".into()));
        }
        let vocab = Vocab::from_list(file.vocab)?;
        let mut params = ScorerParams::zeros(vocab, file.dim, file.channels, file.window);
        if file.tensors.len() != ScorerParams::TENSOR_NAMES.len() {
            return Err(Error::Checkpoint("wrong number of tensors".into()));
        }
        for (mut target, source) in params.tensors_mut().into_iter().zip(file.tensors) {
            if target.shape() != source.shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{}` has shape {:?}, expected {:?}",
                    source.name,
                    source.shape,
                    target.shape()
                )));
            }
            let array = ArrayD::from_shape_vec(IxDyn(&source.shape), source.data)
                .map_err(|e| Error::Checkpoint(format!("tensor `{}`: {e}", source.name)))?;
            target.assign(&array);
        }
        if !params.is_finite() {
            return Err(Error::Checkpoint("non-finite weights".into()));
        }
        Ok(Checkpoint {
            params,
            schema: file.schema,
            variant,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Checkpoint::from_json(&fs::read_to_string(path)?)
    }
}
