//! End-to-end acceptance checks. Each check prints one PASS/FAIL line to the
//! real stderr (bypassing test capture) and the test fails if any check does.

use std::collections::BTreeSet;
use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use dagie::clique::{
    bron_kerbosch, clique_edge_type_space, compare_representations, fact_clique_edges,
    SimpleGraph,
};
use dagie::codec::{
    edge_stats, edge_type_space, encode_with, fact_edges, roundtrip_check, CodecVariant, Decoder,
    EdgeMatrix,
};
use dagie::corpus::{
    corpus_stats, fact_count_bin, generate_synthetic, to_annotated, CorpusRecord, GenConfig,
};
use dagie::metrics::{
    auc, carb_multi, carb_single, gestalt_similarity, pr_curve, CurvePoint, MatchConfig, Metric,
    ScoredSentence,
};
use dagie::model::{
    classify_sentence, AnnotatedSentence, Element, Fact, FactKey, Schema, Sentence, Span,
};
use dagie::scorer::{gestalt_f1, train, ScorerParams, TrainConfig, Vocab, DEFAULT_GRID};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn generate(config: &GenConfig) -> Vec<AnnotatedSentence> {
    to_annotated(&generate_synthetic(config, &Schema::saoke()).unwrap()).unwrap()
}

fn edge_type_arithmetic() -> Check {
    let schema = Schema::saoke();
    let dag = edge_type_space(&schema, CodecVariant::FULL).unwrap().len();
    let clique = clique_edge_type_space(&schema).unwrap().len();
    ensure(dag == 21, format!("{dag} DAG types, want 21"))?;
    ensure(clique == 176, format!("{clique} clique types, want 176"))?;
    let reduction = 100.0 * (1.0 - dag as f64 / clique as f64);
    ensure(
        format!("{reduction:.1}") == "88.1" && reduction.round() == 88.0,
        format!("type reduction {reduction:.4}%"),
    )?;
    Ok(format!("21 vs 176 types, reduction {reduction:.1}%"))
}

fn complicated_config(sentences: usize, seed: u64) -> GenConfig {
    GenConfig {
        sentences,
        overlap_rate: 0.8,
        nesting_rate: 0.6,
        discontinuity_rate: 0.8,
        virtual_rate: 0.1,
        intra_fact_nesting_rate: 0.05,
        seed,
        ..GenConfig::default()
    }
}

fn roundtrip_codec() -> Check {
    let corpus = generate(&complicated_config(2000, 2));
    let report = roundtrip_check(&corpus, &Schema::saoke(), CodecVariant::FULL).unwrap();
    ensure(
        report.facts_recovered == report.facts_encodable,
        format!(
            "recovered {} of {} encodable facts",
            report.facts_recovered, report.facts_encodable
        ),
    )?;
    ensure(
        report.facts_encodable + report.uncoverable.len() == report.facts_total,
        "every fact is either encoded or reported",
    )?;
    ensure(!report.uncoverable.is_empty(), "corpus exercises uncoverable facts")?;
    // a reported fact must never come back, whole or altered into another gold fact's key
    let space = edge_type_space(&Schema::saoke(), CodecVariant::FULL).unwrap();
    let decoder = Decoder::new(&space);
    let schema = Schema::saoke();
    for (id, idx, _) in &report.uncoverable {
        let a = corpus.iter().find(|a| &a.sentence.id == id).unwrap();
        let (m, _) = encode_with(a, &space).unwrap();
        let decoded: BTreeSet<FactKey> = decoder
            .decode(&m, &a.sentence)
            .unwrap()
            .iter()
            .map(|f| FactKey::of(&f.spliced(&schema), &schema))
            .collect();
        let key = FactKey::of(&a.facts[*idx].spliced(&schema), &schema);
        ensure(!decoded.contains(&key), format!("uncoverable fact {idx} of {id} decoded"))?;
    }
    Ok(format!(
        "{}/{} encodable facts recovered, {} reported uncoverable",
        report.facts_recovered,
        report.facts_encodable,
        report.uncoverable.len()
    ))
}

fn shares_end_not_begin(a: &AnnotatedSentence) -> bool {
    let spans: Vec<Span> = a
        .facts
        .iter()
        .flat_map(|f| &f.elements)
        .flat_map(|e| e.spans.iter().copied())
        .collect();
    spans
        .iter()
        .any(|s| spans.iter().any(|t| s.end == t.end && s.begin != t.begin))
}

fn ablation_sensitivity() -> Check {
    let schema = Schema::saoke();
    let mut lines = Vec::new();
    for seed in 0..5 {
        let corpus = generate(&complicated_config(300, 100 + seed));
        ensure(
            corpus.iter().any(shares_end_not_begin),
            "corpus has spans sharing an ending word",
        )?;
        let coverage = |c: &[AnnotatedSentence], v| roundtrip_check(c, &schema, v).unwrap().coverage();
        let (full, no_ee) = (coverage(&corpus, CodecVariant::FULL), coverage(&corpus, CodecVariant::NO_EE));
        ensure(no_ee < full, format!("seed {seed}: no-EE {no_ee:.4} vs full {full:.4}"))?;
        let overlapping: Vec<AnnotatedSentence> = corpus
            .iter()
            .filter(|a| classify_sentence(a).overlapping)
            .cloned()
            .collect();
        let (full_o, no_be) = (
            coverage(&overlapping, CodecVariant::FULL),
            coverage(&overlapping, CodecVariant::NO_BE),
        );
        ensure(no_be < full_o, format!("seed {seed}: no-BE {no_be:.4} vs full {full_o:.4}"))?;
        lines.push(format!("{full:.3}/{no_ee:.3}/{full_o:.3}/{no_be:.3}"));
    }
    Ok(format!("full/no-EE/full-overlap/no-BE coverage per seed: {}", lines.join(" ")))
}

fn edge_count_complexity() -> Check {
    let schema = Schema::saoke();
    let corpus = generate(&GenConfig::saoke_like(2000, 0));
    let stats = edge_stats(&corpus, &schema, CodecVariant::FULL).unwrap();
    let dag_mean = stats.mean_edges_per_fact;
    ensure((8.0..=12.0).contains(&dag_mean), format!("DAG mean {dag_mean:.4}"))?;
    let dag_space = edge_type_space(&schema, CodecVariant::FULL).unwrap();
    let clique_space = clique_edge_type_space(&schema).unwrap();
    let (mut facts, mut clique_total, mut big) = (0usize, 0usize, 0usize);
    for a in &corpus {
        for fact in &a.facts {
            let Ok(dag) = fact_edges(fact, &dag_space).unwrap() else {
                continue;
            };
            let clique = fact_clique_edges(fact, &clique_space, a.sentence.len()).unwrap();
            facts += 1;
            clique_total += clique.len();
            if fact.span_count() >= 4 {
                big += 1;
                ensure(
                    clique.len() > dag.len(),
                    format!("{}: {} clique vs {} DAG edges", a.sentence.id, clique.len(), dag.len()),
                )?;
            }
        }
    }
    ensure(facts == stats.facts, "same coverable facts on both sides")?;
    let clique_mean = clique_total as f64 / facts as f64;
    ensure(clique_mean > 2.0 * dag_mean, format!("clique mean {clique_mean:.4}"))?;
    Ok(format!(
        "DAG {dag_mean:.4} vs clique {clique_mean:.4} edges/fact ({:.2}x); {big} facts with >= 4 spans",
        clique_mean / dag_mean
    ))
}

fn brute_force_cliques(g: &SimpleGraph) -> Vec<Vec<usize>> {
    let n = g.len();
    let is_clique = |mask: u32| {
        (0..n).all(|u| {
            mask & (1 << u) == 0 || (u + 1..n).all(|v| mask & (1 << v) == 0 || g.has_edge(u, v))
        })
    };
    let mut out: Vec<Vec<usize>> = (1u32..(1 << n))
        .filter(|&m| is_clique(m))
        .filter(|&m| (0..n).all(|v| m & (1 << v) != 0 || !is_clique(m | (1 << v))))
        .map(|m| (0..n).filter(|&v| m & (1 << v) != 0).collect())
        .collect();
    out.sort();
    out
}

fn bron_kerbosch_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cliques = 0;
    for graph_idx in 0..100 {
        let n = rng.gen_range(0..=12);
        let density = rng.gen_range(0.1..0.9);
        let mut g = SimpleGraph::new(n);
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(density) {
                    g.add_edge(u, v);
                }
            }
        }
        let mut fast = bron_kerbosch(&g);
        fast.sort();
        let slow = brute_force_cliques(&g);
        ensure(fast == slow, format!("graph {graph_idx} (n={n}) differs"))?;
        cliques += slow.len();
    }
    Ok(format!("100 graphs, {cliques} maximal cliques identical"))
}

fn decoding_speed() -> Check {
    let corpus = generate(&GenConfig::saoke_like(1000, 4));
    let mut speedups: Vec<f64> = (0..3)
        .map(|_| compare_representations(&corpus, &Schema::saoke()).unwrap().speedup())
        .collect();
    speedups.sort_by(f64::total_cmp);
    let median = speedups[1];
    ensure(median >= 2.0, format!("median speedup {median:.4}"))?;
    Ok(format!("DAG decoding {median:.2}x faster than clique decoding (median of 3)"))
}

fn gradient_check() -> Check {
    let schema = Schema::new(["subject", "predicate"], Vec::<String>::new()).unwrap();
    let channels = edge_type_space(&schema, CodecVariant::FULL).unwrap().len();
    ensure(channels <= 6, "small label space")?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for instance in 0..20 {
        let n = rng.gen_range(2..=10);
        let dim = rng.gen_range(1..=8);
        let window = rng.gen_range(0..=2);
        let words = ["a", "b", "c", "d", "e", "f"];
        let vocab = Vocab::build(words[..4].iter().copied());
        let mut params = ScorerParams::random(vocab, dim, channels, window, &mut rng);
        params.bias.mapv_inplace(|_| rng.gen_range(-1.0..1.0));
        let tokens: Vec<&str> = (0..n).map(|_| words[rng.gen_range(0..words.len())]).collect();
        let sentence = Sentence::new(format!("g{instance}"), tokens).unwrap();
        let mut gold = EdgeMatrix::new(n, channels);
        for i in 0..n {
            for j in i..n {
                for k in 0..channels {
                    if rng.gen_bool(0.2) {
                        gold.insert(i, j, k, None).unwrap();
                    }
                }
            }
        }
        let (_, grad) = params.loss_and_gradient(&sentence, &gold).unwrap();
        let sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        let total: usize = sizes.iter().sum();
        for _ in 0..50 {
            let mut flat = rng.gen_range(0..total);
            let mut tensor = 0;
            while flat >= sizes[tensor] {
                flat -= sizes[tensor];
                tensor += 1;
            }
            let analytic = grad.tensors()[tensor].iter().nth(flat).copied().unwrap();
            let h = 1e-5;
            let shifted = |delta: f64| {
                let mut p = params.clone();
                *p.tensors_mut()[tensor].iter_mut().nth(flat).unwrap() += delta;
                p.loss(&sentence, &gold).unwrap()
            };
            let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
            let scale = analytic.abs().max(numeric.abs());
            let rel = if scale == 0.0 { 0.0 } else { (analytic - numeric).abs() / scale };
            ensure(
                rel < 1e-4,
                format!(
                    "instance {instance} tensor {} coordinate {flat}: analytic {analytic:e} numeric {numeric:e}",
                    ScorerParams::TENSOR_NAMES[tensor]
                ),
            )?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("1000 coordinates, worst relative error {worst:.2e}"))
}

fn overfit_sanity() -> Check {
    let schema = Schema::saoke();
    let corpus = generate(&GenConfig {
        sentences: 50,
        vocab_size: 5000,
        overlap_rate: 0.3,
        discontinuity_rate: 0.3,
        virtual_rate: 0.1,
        seed: 2,
        ..GenConfig::default()
    });
    let exact = roundtrip_check(&corpus, &schema, CodecVariant::FULL).unwrap();
    ensure(exact.coverage() == 1.0, "training corpus round-trips exactly")?;
    let config = TrainConfig {
        epochs: 200,
        dim: 32,
        ..TrainConfig::default()
    };
    let outcome = train(&corpus, &[], &schema, CodecVariant::FULL, &config).unwrap();
    let space = edge_type_space(&schema, CodecVariant::FULL).unwrap();
    let f1 = gestalt_f1(&outcome.params, &corpus, &space, config.threshold).unwrap();
    ensure(f1 >= 0.95, format!("training Gestalt F1 {f1:.4}"))?;
    let decoder = Decoder::new(&space);
    let keys = |facts: &[Fact]| -> BTreeSet<FactKey> {
        facts.iter().map(|f| FactKey::of(&f.spliced(&schema), &schema)).collect()
    };
    for delta in DEFAULT_GRID {
        for a in &corpus {
            let predicted = outcome.params.extract(&a.sentence, &decoder, delta).unwrap();
            ensure(
                keys(&predicted) == keys(&a.facts),
                format!("threshold {delta}: sentence {} differs from gold", a.sentence.id),
            )?;
        }
    }
    Ok(format!(
        "training F1 {f1:.4} (best epoch {}), gold reproduced at every grid threshold",
        outcome.best_epoch
    ))
}

fn oracle_matched(a: &[u8], b: &[u8]) -> usize {
    for len in (1..=a.len().min(b.len())).rev() {
        for i in 0..=a.len() - len {
            for j in 0..=b.len() - len {
                if a[i..i + len] == b[j..j + len] {
                    return len
                        + oracle_matched(&a[..i], &b[..j])
                        + oracle_matched(&a[i + len..], &b[j + len..]);
                }
            }
        }
    }
    0
}

fn oracle_similarity(a: &str, b: &str) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (a, b) = (a.as_bytes(), b.as_bytes());
    let matched = oracle_matched(a, b).max(oracle_matched(b, a));
    2.0 * matched as f64 / (a.len() + b.len()) as f64
}

fn all_strings(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut all = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|s| alphabet.iter().map(move |&c| format!("{s}{c}")))
            .collect();
        all.extend(frontier.iter().cloned());
    }
    all
}

/// Letters appear in alphabet order of first occurrence.
fn is_canonical(s: &str) -> bool {
    let mut next = b'a';
    for c in s.bytes() {
        if c == next {
            next += 1;
        } else if c > next {
            return false;
        }
    }
    true
}

fn relabel(s: &str, perm: &[char; 3]) -> String {
    s.bytes().map(|c| perm[(c - b'a') as usize]).collect()
}

fn metric_oracles() -> Check {
    // Both similarity functions only test characters for equality, so every
    // pair is covered up to a relabeling of the alphabet: the first string is
    // canonical, the second arbitrary. Invariance is checked directly below.
    let strings = all_strings(&['a', 'b', 'c'], 8);
    let mut pairs = 0usize;
    for a in strings.iter().filter(|s| is_canonical(s)) {
        for b in &strings {
            let (got, want) = (gestalt_similarity(a, b), oracle_similarity(a, b));
            ensure(got == want, format!("`{a}` vs `{b}`: {got} != {want}"))?;
            pairs += 1;
        }
    }
    let perms = [
        ['a', 'b', 'c'],
        ['a', 'c', 'b'],
        ['b', 'a', 'c'],
        ['b', 'c', 'a'],
        ['c', 'a', 'b'],
        ['c', 'b', 'a'],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20_000 {
        let a = &strings[rng.gen_range(0..strings.len())];
        let b = &strings[rng.gen_range(0..strings.len())];
        let base = gestalt_similarity(a, b);
        for p in &perms {
            ensure(
                gestalt_similarity(&relabel(a, p), &relabel(b, p)) == base,
                format!("relabeling changes `{a}` vs `{b}`"),
            )?;
        }
    }

    let schema = Schema::saoke();
    let sentence = Sentence::new("s", (0..12).map(|i| format!("t{}", i % 5))).unwrap();
    let random_fact = |rng: &mut ChaCha8Rng| {
        let span = |rng: &mut ChaCha8Rng| {
            let b = rng.gen_range(0..12);
            Span::new(b, rng.gen_range(b..12.min(b + 3)))
        };
        let mut elements = vec![
            Element::concrete("subject", [span(rng)]),
            Element::concrete("predicate", [span(rng)]),
        ];
        for _ in 0..rng.gen_range(0..3) {
            elements.push(Element::concrete("object", [span(rng)]));
        }
        Fact::new(elements)
    };
    for pair in 0..1000 {
        let gold: Vec<Fact> = (0..rng.gen_range(0..4)).map(|_| random_fact(&mut rng)).collect();
        let pred: Vec<Fact> = (0..rng.gen_range(0..4)).map(|_| random_fact(&mut rng)).collect();
        let single = carb_single(&gold, &pred, &sentence, &schema);
        let multi = carb_multi(&gold, &pred, &sentence, &schema);
        ensure(multi.recall >= single.recall, format!("pair {pair}: multi recall {} below single {}", multi.recall, single.recall))?;
    }

    let points = [
        CurvePoint { cutoff: 0.9, precision: 1.0, recall: 0.5, f1: 2.0 / 3.0 },
        CurvePoint { cutoff: 0.5, precision: 0.5, recall: 1.0, f1: 2.0 / 3.0 },
    ];
    ensure(auc(&points) == 0.875, format!("trapezoid AUC {}", auc(&points)))?;
    let s = Sentence::new("c", (0..10).map(|i| format!("x{i}"))).unwrap();
    let fact = |a: usize, b: usize, c: usize| {
        Fact::new([
            Element::span("subject", a, a),
            Element::span("predicate", b, b),
            Element::span("object", c, c),
        ])
    };
    let gold = [fact(0, 1, 2), fact(3, 4, 5)];
    let pred = [
        fact(0, 1, 2).with_confidence(0.9),
        fact(3, 4, 5).with_confidence(0.5),
        fact(6, 7, 8).with_confidence(0.5),
        fact(9, 8, 7).with_confidence(0.5),
    ];
    let scored = [ScoredSentence { sentence: &s, gold: &gold, pred: &pred }];
    let curve = pr_curve(&scored, Metric::Gestalt, &schema, &MatchConfig::default()).unwrap();
    let pr: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.precision, p.recall)).collect();
    ensure(pr == [(1.0, 0.5), (0.5, 1.0)], format!("curve points {pr:?}"))?;
    ensure(curve.auc == 0.875, format!("curve AUC {}", curve.auc))?;
    Ok(format!(
        "{pairs} string pairs match the oracle; CaRB multi >= single on 1000 pairs; AUC 0.875"
    ))
}

fn fixture(id: usize, facts: usize) -> CorpusRecord {
    let tokens: Vec<String> = (0..3).map(|i| format!("w{i}")).collect();
    let fact = Fact::new([Element::span("subject", 0, 0), Element::span("predicate", 1, 1)]);
    CorpusRecord {
        id: format!("f{id}"),
        domain: None,
        tokens,
        facts: vec![fact; facts],
    }
}

fn statistics_fidelity() -> Check {
    let counts = [0, 1, 3, 4, 5, 6, 7, 9, 10, 12, 13, 16, 40];
    let want = [3, 3, 2, 2, 3];
    let records: Vec<CorpusRecord> = counts.iter().enumerate().map(|(i, &c)| fixture(i, c)).collect();
    let stats = corpus_stats(&records).unwrap();
    ensure(stats.fact_count_bins == want, format!("bins {:?}", stats.fact_count_bins))?;
    ensure(stats.fact_count_bins.iter().sum::<usize>() == records.len(), "bins sum")?;
    let single = corpus_stats(&[fixture(0, 5)]).unwrap();
    ensure(single.fact_count_bins == [0, 1, 0, 0, 0], "five facts fall in the second bin")?;
    for (c, bin) in [(3, 0), (4, 1), (6, 1), (7, 2), (9, 2), (10, 3), (12, 3), (13, 4)] {
        ensure(fact_count_bin(c) == bin, format!("{c} facts"))?;
    }
    let mut shares = Vec::new();
    for seed in 0..3 {
        let records = generate_synthetic(&GenConfig::saoke_like(2000, seed), &Schema::saoke()).unwrap();
        let pct = corpus_stats(&records).unwrap().complicated_pct();
        ensure((pct - 95.6).abs() <= 5.0, format!("seed {seed}: complicated {pct:.4}%"))?;
        shares.push(format!("{pct:.2}%"));
    }
    Ok(format!("bins exact on fixtures; preset complicated share {}", shares.join(", ")))
}

#[test]
fn acceptance() {
    let checks: [(&str, Duration, fn() -> Check); 10] = [
        ("edge-type-space arithmetic", Duration::from_secs(1), edge_type_arithmetic),
        ("round-trip codec", Duration::from_secs(10), roundtrip_codec),
        ("ablation sensitivity", Duration::from_secs(10), ablation_sensitivity),
        ("edge-count complexity", Duration::from_secs(10), edge_count_complexity),
        ("bron-kerbosch correctness", Duration::from_secs(30), bron_kerbosch_oracle),
        ("decoding speed direction", Duration::from_secs(60), decoding_speed),
        ("gradient check", Duration::from_secs(30), gradient_check),
        ("overfit sanity", Duration::from_secs(300), overfit_sanity),
        ("metric oracles", Duration::from_secs(60), metric_oracles),
        ("statistics fidelity", Duration::from_secs(10), statistics_fidelity),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr();
    for (name, budget, check) in checks {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed <= budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; took {elapsed:.1?}, budget {budget:?}"))
            }
        });
        let line = match &outcome {
            Ok(detail) => format!("PASS  {name}: {detail} [{elapsed:.2?}]"),
            Err(reason) => format!("FAIL  {name}: {reason} [{elapsed:.2?}]"),
        };
        let _ = writeln!(err, "{line}");
        if outcome.is_err() {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
