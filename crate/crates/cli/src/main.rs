//! Batch command-line front end: corpus generation, statistics, encoding,
//! decoding, training, prediction, evaluation and benchmarking.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dagie::clique::compare_representations;
use dagie::codec::{
    edge_type_space, encode_with, roundtrip_check, CodecVariant, Decoder, EdgeMatrix,
};
use dagie::corpus::{
    corpus_stats, corpus_to_string, generate_synthetic, parse_corpus_str, parse_predictions_str,
    predictions_to_string, to_annotated, validate_corpus, CorpusRecord, GenConfig,
    PredictionRecord,
};
use dagie::metrics::{evaluate, MatchConfig, Metric};
use dagie::model::{AnnotatedSentence, Schema};
use dagie::scorer::{history_csv, train, tune_threshold, Checkpoint, TrainConfig, DEFAULT_GRID};
use dagie::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "dagie", version, about = "Open fact extraction as DAG edge prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus.
    Gen(GenArgs),
    /// Print corpus statistics.
    Stats(StatsArgs),
    /// Write one edge file per sentence.
    Encode(EncodeArgs),
    /// Decode edge files into a prediction file.
    Decode(DecodeArgs),
    /// Report encode/decode coverage.
    Roundtrip(RoundtripArgs),
    /// Train an edge scorer.
    Train(TrainArgs),
    /// Predict facts with a trained scorer.
    Predict(PredictArgs),
    /// Score predictions against gold facts.
    Eval(EvalArgs),
    /// Compare the DAG and maximal-clique representations.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct SchemaArgs {
    /// Schema JSON `{"roles": [...], "virtual_predicates": [...]}`; defaults to
    /// the six-role open-domain schema.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VariantArgs {
    /// Drop the end-to-end inter-span edges.
    #[arg(long)]
    no_ee: bool,
    /// Drop the begin-to-end fact edges (a root edge takes their place).
    #[arg(long)]
    no_be: bool,
    /// Tag begin edges with (previous role, next role) pairs.
    #[arg(long)]
    role_pair: bool,
}

impl VariantArgs {
    fn variant(&self) -> CodecVariant {
        CodecVariant {
            use_ee: !self.no_ee,
            use_be: !self.no_be,
            role_pair_labels: self.role_pair,
        }
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    schema: SchemaArgs,
    #[arg(long, default_value_t = 1000)]
    sentences: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `saoke` (open-domain proportions) or `plain` (no complications).
    #[arg(long, default_value = "saoke")]
    preset: String,
    /// Full generator config as JSON; overrides the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    overlap: Option<f64>,
    #[arg(long)]
    nesting: Option<f64>,
    #[arg(long)]
    discontinuity: Option<f64>,
    #[arg(long = "virtual")]
    virtual_rate: Option<f64>,
    /// Replaces the default `syn-` id prefix, keeping separately generated
    /// splits disjoint.
    #[arg(long)]
    id_prefix: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    input: PathBuf,
    #[command(flatten)]
    schema: SchemaArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    input: PathBuf,
    #[command(flatten)]
    schema: SchemaArgs,
    #[command(flatten)]
    variant: VariantArgs,
    /// Directory receiving `<id>.tsv` files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    /// Corpus supplying ids and tokens.
    input: PathBuf,
    /// Directory of `<id>.tsv` edge files.
    #[arg(long)]
    edges: PathBuf,
    #[command(flatten)]
    schema: SchemaArgs,
    #[command(flatten)]
    variant: VariantArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RoundtripArgs {
    input: PathBuf,
    #[command(flatten)]
    schema: SchemaArgs,
    #[command(flatten)]
    variant: VariantArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training corpus.
    input: PathBuf,
    /// Dev corpus for model selection; the training corpus is used when absent.
    #[arg(long)]
    dev: Option<PathBuf>,
    #[command(flatten)]
    schema: SchemaArgs,
    #[command(flatten)]
    variant: VariantArgs,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch `epoch,loss,dev_f1` CSV.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Decision threshold used for dev F1.
    #[arg(long)]
    delta: Option<f64>,
    /// Gradient-norm clip; 0 disables clipping.
    #[arg(long)]
    clip_norm: Option<f64>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    input: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    delta: f64,
    /// Pick the threshold from the default grid on this dev corpus instead.
    #[arg(long)]
    tune: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Gold corpus.
    gold: PathBuf,
    /// Prediction file.
    pred: PathBuf,
    #[command(flatten)]
    schema: SchemaArgs,
    /// Gestalt match threshold.
    #[arg(long, default_value_t = 0.85)]
    tau: f64,
    /// Reject predicted facts without a confidence instead of treating them as certain.
    #[arg(long)]
    strict: bool,
    /// Directory receiving one `<metric>.csv` precision-recall file per metric.
    #[arg(long)]
    pr_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    input: PathBuf,
    #[command(flatten)]
    schema: SchemaArgs,
    /// Corpus label for the CSV; defaults to the file stem.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

fn load_schema(args: &SchemaArgs) -> Result<Schema> {
    match &args.schema {
        None => Ok(Schema::saoke()),
        Some(path) => {
            let text = read(path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::InvalidSchema(format!("{}: {e}", path.display())))
        }
    }
}

fn load_corpus(path: &Path, schema: &Schema) -> Result<Vec<CorpusRecord>> {
    let records = parse_corpus_str(&read(path)?)?;
    validate_corpus(&records, schema)?;
    Ok(records)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn edge_file(dir: &Path, id: &str) -> Result<PathBuf> {
    if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
        return Err(Error::InvalidRecord {
            id: id.to_string(),
            message: "id cannot be used as a file name".into(),
        });
    }
    Ok(dir.join(format!("{id}.tsv")))
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let schema = load_schema(&args.schema)?;
    let mut config = match &args.config {
        Some(path) => serde_json::from_str(&read(path)?)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?,
        None => match args.preset.as_str() {
            "saoke" => GenConfig::saoke_like(args.sentences, args.seed),
            "plain" => GenConfig {
                sentences: args.sentences,
                seed: args.seed,
                ..GenConfig::default()
            },
            other => return Err(Error::InvalidConfig(format!("unknown preset `{other}`"))),
        },
    };
    if args.config.is_some() {
        config.sentences = args.sentences;
        config.seed = args.seed;
    }
    let overrides = [
        (args.overlap, &mut config.overlap_rate),
        (args.nesting, &mut config.nesting_rate),
        (args.discontinuity, &mut config.discontinuity_rate),
        (args.virtual_rate, &mut config.virtual_rate),
    ];
    for (value, slot) in overrides {
        if let Some(v) = value {
            *slot = v;
        }
    }
    let mut records = generate_synthetic(&config, &schema)?;
    if let Some(prefix) = &args.id_prefix {
        for r in &mut records {
            if let Some(rest) = r.id.strip_prefix("syn-") {
                r.id = format!("{prefix}{rest}");
            }
        }
    }
    emit(args.out.as_deref(), &corpus_to_string(&records))
}

fn cmd_stats(args: &StatsArgs) -> Result<()> {
    let schema = load_schema(&args.schema)?;
    let records = load_corpus(&args.input, &schema)?;
    let stats = corpus_stats(&records)?;
    let mut report = stats.report();
    let edges = dagie::codec::edge_stats(&to_annotated(&records)?, &schema, CodecVariant::FULL)?;
    let _ = writeln!(report, "dag_edges_per_fact\t{:.4}", edges.mean_edges_per_fact);
    emit(args.out.as_deref(), &report)
}

fn cmd_encode(args: &EncodeArgs) -> Result<()> {
    let schema = load_schema(&args.schema)?;
    let space = edge_type_space(&schema, args.variant.variant())?;
    let records = load_corpus(&args.input, &schema)?;
    fs::create_dir_all(&args.out)?;
    let (mut encoded, mut uncoverable) = (0usize, 0usize);
    for record in &records {
        let path = edge_file(&args.out, &record.id)?;
        let (matrix, report) = encode_with(&record.to_annotated()?, &space)?;
        encoded += report.facts_encoded;
        uncoverable += report.facts_uncoverable;
        for (idx, reason) in &report.reasons {
            eprintln!("{}: fact {idx} not encoded ({})", record.id, reason.as_str());
        }
        write(&path, &matrix.to_tsv(&space))?;
    }
    println!(
        "sentences\t{}\nfacts_encoded\t{encoded}\nfacts_uncoverable\t{uncoverable}",
        records.len()
    );
    Ok(())
}

fn cmd_decode(args: &DecodeArgs) -> Result<()> {
    let schema = load_schema(&args.schema)?;
    let space = edge_type_space(&schema, args.variant.variant())?;
    let decoder = Decoder::new(&space);
    let records = load_corpus(&args.input, &schema)?;
    let mut predictions = Vec::with_capacity(records.len());
    for record in &records {
        let sentence = record.to_annotated()?.sentence;
        let text = read(&edge_file(&args.edges, &record.id)?)?;
        let matrix = EdgeMatrix::from_tsv(&text, sentence.len(), &space)?;
        let mut facts = decoder.decode(&matrix, &sentence)?;
        for f in &mut facts {
            f.confidence.get_or_insert(1.0);
        }
        predictions.push(PredictionRecord {
            id: record.id.clone(),
            facts,
        });
    }
    emit(args.out.as_deref(), &predictions_to_string(&predictions))
}

fn cmd_roundtrip(args: &RoundtripArgs) -> Result<()> {
    let schema = load_schema(&args.schema)?;
    let records = load_corpus(&args.input, &schema)?;
    let report = roundtrip_check(&to_annotated(&records)?, &schema, args.variant.variant())?;
    let mut reasons: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, _, reason) in &report.uncoverable {
        *reasons.entry(reason.as_str()).or_default() += 1;
    }
    let mut out = String::new();
    let _ = writeln!(out, "variant\t{}", args.variant.variant());
    let _ = writeln!(out, "sentences\t{}", report.sentences);
    let _ = writeln!(out, "facts\t{}", report.facts_total);
    let _ = writeln!(out, "encodable\t{}", report.facts_encodable);
    let _ = writeln!(out, "recovered\t{}", report.facts_recovered);
    let _ = writeln!(out, "spurious\t{}", report.facts_spurious);
    for (reason, count) in reasons {
        let _ = writeln!(out, "uncoverable.{reason}\t{count}");
    }
    let _ = writeln!(out, "recall\t{:.4}", report.recall());
    let _ = writeln!(out, "coverage\t{:.4}", report.coverage());
    emit(args.out.as_deref(), &out)
}

fn annotated(path: &Path, schema: &Schema) -> Result<Vec<AnnotatedSentence>> {
    to_annotated(&load_corpus(path, schema)?)
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let schema = load_schema(&args.schema)?;
    let variant = args.variant.variant();
    let train_set = annotated(&args.input, &schema)?;
    let dev_set = match &args.dev {
        Some(path) => annotated(path, &schema)?,
        None => Vec::new(),
    };
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        learning_rate: args.lr.unwrap_or(defaults.learning_rate),
        momentum: args.momentum.unwrap_or(defaults.momentum),
        epochs: args.epochs.unwrap_or(defaults.epochs),
        max_len: args.max_len.unwrap_or(defaults.max_len),
        threshold: args.delta.unwrap_or(defaults.threshold),
        seed: args.seed,
        batch_size: args.batch_size.unwrap_or(defaults.batch_size),
        dim: args.dim.unwrap_or(defaults.dim),
        window: args.window.unwrap_or(defaults.window),
        clip_norm: match args.clip_norm {
            Some(c) if c == 0.0 => None,
            Some(c) => Some(c),
            None => defaults.clip_norm,
        },
    };
    let outcome = train(&train_set, &dev_set, &schema, variant, &config)?;
    Checkpoint {
        params: outcome.params,
        schema,
        variant,
    }
    .save(&args.out)?;
    if let Some(path) = &args.history {
        write(path, &history_csv(&outcome.history))?;
    }
    let best = &outcome.history[outcome.best_epoch - 1];
    println!(
        "best_epoch\t{}\nloss\t{:.4}\ndev_f1\t{:.4}",
        best.epoch, best.loss, best.dev_f1
    );
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let checkpoint = Checkpoint::from_json(&read(&args.checkpoint)?)?;
    let (schema, variant) = (&checkpoint.schema, checkpoint.variant);
    let delta = match &args.tune {
        Some(path) => {
            let dev = annotated(path, schema)?;
            let delta = tune_threshold(&checkpoint.params, &dev, schema, variant, &DEFAULT_GRID)?;
            eprintln!("threshold\t{delta:.4}");
            delta
        }
        None => args.delta,
    };
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidConfig("threshold must lie in (0,1]".into()));
    }
    let space = edge_type_space(schema, variant)?;
    let decoder = Decoder::new(&space);
    let records = parse_corpus_str(&read(&args.input)?)?;
    let mut predictions = Vec::with_capacity(records.len());
    for record in &records {
        let sentence = record.to_annotated()?.sentence;
        predictions.push(PredictionRecord {
            id: record.id.clone(),
            facts: checkpoint.params.extract(&sentence, &decoder, delta)?,
        });
    }
    emit(args.out.as_deref(), &predictions_to_string(&predictions))
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let schema = load_schema(&args.schema)?;
    let gold = load_corpus(&args.gold, &schema)?;
    let mut predictions = parse_predictions_str(&read(&args.pred)?)?;
    if !args.strict {
        for fact in predictions.iter_mut().flat_map(|p| &mut p.facts) {
            fact.confidence.get_or_insert(1.0);
        }
    }
    let config = MatchConfig {
        gestalt_threshold: args.tau,
        ..MatchConfig::default()
    };
    let report = evaluate(&gold, &predictions, &schema, &config)?;
    if let Some(dir) = &args.pr_dir {
        fs::create_dir_all(dir)?;
        for metric in Metric::ALL {
            let curve = &report.overall.get(metric).curve;
            write(&dir.join(format!("{}.csv", metric.name())), &curve.to_csv())?;
        }
    }
    emit(args.out.as_deref(), &report.text())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let schema = load_schema(&args.schema)?;
    let records = load_corpus(&args.input, &schema)?;
    let comparison = compare_representations(&to_annotated(&records)?, &schema)?;
    let name = args.name.clone().unwrap_or_else(|| {
        args.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".into())
    });
    eprintln!(
        "type_reduction\t{:.4}\nedge_reduction\t{:.4}\nspeedup\t{:.4}",
        comparison.type_reduction(),
        comparison.edge_reduction(),
        comparison.speedup()
    );
    emit(args.out.as_deref(), &comparison.to_csv(&name))
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Roundtrip(a) => cmd_roundtrip(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
