//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Run with `cargo test -p qa-eval --test acceptance -- --nocapture` to see
//! the per-criterion lines.

mod support;

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qa_eval_core::fixtures::{adversarial_routing_dataset, score_targets, synthetic_dataset};
use qa_eval_core::metrics::{
    edit_distance, external_grade, lcs_length, token_prf, ExternalGraderConfig,
};
use qa_eval_core::routing::{
    default_routing_table, default_routing_table_with_grader, route_dataset, route_score,
    ClassifierConfig,
};
use qa_eval_core::stats::{kendall_tau, mean_score_delta, pearson, spearman};
use qa_eval_core::text::{normalize, tokenize, NormalizationConfig, TokenSeq};
use qa_eval_core::{
    evaluate_all, evaluate_all_sequential, summarize, Dataset, Error, MetricContext, MetricId,
    MetricRegistry, QARecord, Score,
};

use support::{StubBehavior, StubGrader};

// ---------------------------------------------------------------------------
// Criterion 1: metric oracle equivalence
// ---------------------------------------------------------------------------

/// Brute force: enumerate subsequences of `a`, keep the longest that also
/// embeds in `b`.
fn lcs_brute_force(a: &[u8], b: &[u8]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1u32 << a.len()) {
        let picked = mask.count_ones() as usize;
        if picked <= best {
            continue;
        }
        let mut cursor = 0usize;
        let mut embeds = true;
        for (i, &token) in a.iter().enumerate() {
            if mask & (1 << i) != 0 {
                match b[cursor..].iter().position(|&x| x == token) {
                    Some(offset) => cursor += offset + 1,
                    None => {
                        embeds = false;
                        break;
                    }
                }
            }
        }
        if embeds {
            best = picked;
        }
    }
    best
}

/// The recursive Levenshtein definition, memoized on (i, j).
fn edit_distance_recursive(a: &[char], b: &[char]) -> usize {
    fn go(
        a: &[char],
        b: &[char],
        i: usize,
        j: usize,
        memo: &mut HashMap<(usize, usize), usize>,
    ) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&known) = memo.get(&(i, j)) {
            return known;
        }
        let result = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j + 1, memo)
                .min(go(a, b, i + 1, j, memo))
                .min(go(a, b, i, j + 1, memo))
        };
        memo.insert((i, j), result);
        result
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

fn token_seq(ids: &[u8]) -> TokenSeq {
    TokenSeq::from_tokens(ids.iter().map(|t| format!("tok{t}")).collect()).unwrap()
}

#[test]
fn criterion_01_metric_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let pairs = 10_000;

    for _ in 0..pairs {
        let la = rng.gen_range(0..=10);
        let lb = rng.gen_range(0..=10);
        let a: Vec<u8> = (0..la).map(|_| rng.gen_range(0..4)).collect();
        let b: Vec<u8> = (0..lb).map(|_| rng.gen_range(0..4)).collect();
        assert_eq!(
            lcs_length(&token_seq(&a), &token_seq(&b)),
            lcs_brute_force(&a, &b),
            "lcs mismatch on {a:?} vs {b:?}"
        );
    }

    for _ in 0..pairs {
        let la = rng.gen_range(0..=8);
        let lb = rng.gen_range(0..=8);
        let a: String = (0..la)
            .map(|_| rng.gen_range(b'a'..=b'd') as char)
            .collect();
        let b: String = (0..lb)
            .map(|_| rng.gen_range(b'a'..=b'd') as char)
            .collect();
        let chars_a: Vec<char> = a.chars().collect();
        let chars_b: Vec<char> = b.chars().collect();
        assert_eq!(
            edit_distance(&a, &b),
            edit_distance_recursive(&chars_a, &chars_b),
            "edit distance mismatch on {a:?} vs {b:?}"
        );
    }

    let vocabulary = ["bb", "cc", "dd", "ee"];
    let ctx = MetricContext::default();
    for _ in 0..pairs {
        let lg = rng.gen_range(0..=10);
        let la = rng.gen_range(0..=10);
        let gold_tokens: Vec<&str> = (0..lg).map(|_| vocabulary[rng.gen_range(0..4)]).collect();
        let attempt_tokens: Vec<&str> = (0..la).map(|_| vocabulary[rng.gen_range(0..4)]).collect();
        let gold = gold_tokens.join(" ");
        let attempt = attempt_tokens.join(" ");

        // Naive multiset counting: consume one matching gold token per
        // attempt token.
        let mut remaining = gold_tokens.clone();
        let mut overlap = 0usize;
        for token in &attempt_tokens {
            if let Some(pos) = remaining.iter().position(|g| g == token) {
                remaining.remove(pos);
                overlap += 1;
            }
        }
        let (expected_f1, expected_recall) = if lg == 0 && la == 0 {
            (1.0, 1.0)
        } else if lg == 0 || la == 0 {
            (0.0, 0.0)
        } else {
            let p = overlap as f64 / la as f64;
            let r = overlap as f64 / lg as f64;
            let f1 = if overlap == 0 {
                0.0
            } else {
                2.0 * p * r / (p + r)
            };
            (f1, r)
        };
        let prf = token_prf(&gold, &attempt, &ctx);
        assert!(
            (prf.f1 - expected_f1).abs() < 1e-12,
            "f1: {gold:?} vs {attempt:?}"
        );
        assert!(
            (prf.recall - expected_recall).abs() < 1e-12,
            "recall: {gold:?} vs {attempt:?}"
        );
    }

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    println!(
        "PASS criterion 1: lcs/edit-distance/token-f1 match brute-force oracles on {pairs} pairs each ({elapsed:?})"
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: range and identity invariants under Unicode fuzz
// ---------------------------------------------------------------------------

fn random_unicode(rng: &mut ChaCha8Rng, max_len: usize) -> String {
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .filter_map(|_| char::from_u32(rng.gen_range(0u32..=0x10FFFF)))
        .collect()
}

fn all_metric_values(golds: &[String], attempt: &str, ctx_seed: u64) -> Vec<(MetricId, f64)> {
    use qa_eval_core::metrics as m;
    let norm = NormalizationConfig::default();
    let mut docs: Vec<TokenSeq> = golds
        .iter()
        .map(|g| tokenize(&normalize(g, &norm)))
        .collect();
    docs.push(tokenize(&normalize(attempt, &norm)));
    let model = qa_eval_core::fit_tfidf(&docs).unwrap();
    let ctx = MetricContext {
        tfidf_model: Some(std::sync::Arc::new(model)),
        random_seed: ctx_seed,
        ..MetricContext::default()
    };
    vec![
        (
            MetricId::ExactMatch,
            m::exact_match(golds, attempt, &ctx).unwrap().value(),
        ),
        (
            MetricId::TokenF1,
            m::token_f1(golds, attempt, &ctx).unwrap().value(),
        ),
        (
            MetricId::TokenRecall,
            m::token_recall(golds, attempt, &ctx).unwrap().value(),
        ),
        (
            MetricId::Bleu,
            m::bleu(golds, attempt, &ctx).unwrap().value(),
        ),
        (
            MetricId::RougeL,
            m::rouge_l(golds, attempt, &ctx).unwrap().value(),
        ),
        (
            MetricId::Levenshtein,
            m::levenshtein_similarity(golds, attempt, &ctx)
                .unwrap()
                .value(),
        ),
        (
            MetricId::TfidfCosine,
            m::tfidf_cosine(golds, attempt, &ctx).unwrap().value(),
        ),
        (
            MetricId::RandomBaseline,
            m::random_baseline(golds, attempt, &ctx).unwrap().value(),
        ),
    ]
}

/// Case/punctuation/article noise that normalization removes.
fn normalization_noise(rng: &mut ChaCha8Rng, text: &str) -> String {
    let mut out = String::new();
    for c in text.chars() {
        if rng.gen_bool(0.3) {
            out.extend(c.to_uppercase());
        } else {
            out.push(c);
        }
        if rng.gen_bool(0.1) {
            out.push(['.', ',', '!', '\''][rng.gen_range(0..4)]);
        }
    }
    if rng.gen_bool(0.4) {
        out.push_str(" the");
    }
    if rng.gen_bool(0.3) {
        out = format!("  {out} ");
    }
    out
}

#[test]
fn criterion_02_range_and_identity_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let trials = 10_000;
    let mut violations = 0usize;

    for i in 0..trials {
        let golds = vec![random_unicode(&mut rng, 16)];
        let attempt = random_unicode(&mut rng, 16);
        for (id, value) in all_metric_values(&golds, &attempt, i as u64) {
            if !(0.0..=1.0).contains(&value) {
                eprintln!("{id} out of range: {value} on {golds:?} vs {attempt:?}");
                violations += 1;
            }
        }
    }

    let norm = NormalizationConfig::default();
    let ctx = MetricContext::default();
    for _ in 0..trials {
        let base: String = {
            let words = rng.gen_range(1..5);
            (0..words)
                .map(|_| {
                    let len = rng.gen_range(1..7);
                    (0..len)
                        .map(|_| rng.gen_range(b'a'..=b'z') as char)
                        .collect::<String>()
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        let attempt = normalization_noise(&mut rng, &base);
        assert_eq!(
            normalize(&base, &norm),
            normalize(&attempt, &norm),
            "noise changed the normal form of {base:?}"
        );
        let golds = vec![base];
        use qa_eval_core::metrics as m;
        for value in [
            m::exact_match(&golds, &attempt, &ctx).unwrap().value(),
            m::token_f1(&golds, &attempt, &ctx).unwrap().value(),
            m::rouge_l(&golds, &attempt, &ctx).unwrap().value(),
            m::levenshtein_similarity(&golds, &attempt, &ctx)
                .unwrap()
                .value(),
        ] {
            if value != 1.0 {
                eprintln!("identity pair scored {value}: {golds:?} vs {attempt:?}");
                violations += 1;
            }
        }
    }

    assert_eq!(violations, 0);
    println!(
        "PASS criterion 2: all metrics in [0,1] and normalized-identical pairs score 1 over {trials} fuzz pairs"
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: statistics correctness
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_statistics_correctness() {
    // Hand-computed closed forms.
    let r = pearson(&[1.0, 2.0, 3.0, 5.0], &[2.0, 2.0, 5.0, 4.0])
        .unwrap()
        .unwrap();
    assert!((r - (7.0f64 / 15.0).sqrt()).abs() < 1e-9);
    let rho = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0])
        .unwrap()
        .unwrap();
    assert!((rho - 0.9f64.sqrt()).abs() < 1e-9);
    let tau = kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0])
        .unwrap()
        .unwrap();
    assert!((tau - 1.0 / 3.0).abs() < 1e-9);

    let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() < 1e-9,
        (None, None) => true,
        _ => false,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..1_000 {
        let n = rng.gen_range(2..30);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();

        // Symmetry.
        assert!(close(pearson(&x, &y).unwrap(), pearson(&y, &x).unwrap()));
        assert!(close(spearman(&x, &y).unwrap(), spearman(&y, &x).unwrap()));
        assert!(close(
            kendall_tau(&x, &y).unwrap(),
            kendall_tau(&y, &x).unwrap()
        ));

        // Pearson: positive affine invariance.
        let scale = rng.gen_range(0.1..10.0);
        let shift = rng.gen_range(-5.0..5.0);
        let affine: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
        assert!(close(
            pearson(&x, &y).unwrap(),
            pearson(&affine, &y).unwrap()
        ));

        // Rank methods: strictly monotone invariance.
        let monotone: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        assert!(close(
            spearman(&x, &y).unwrap(),
            spearman(&monotone, &y).unwrap()
        ));
        assert!(close(
            kendall_tau(&x, &y).unwrap(),
            kendall_tau(&monotone, &y).unwrap()
        ));
    }
    println!("PASS criterion 3: correlation fixtures match to 1e-9; symmetry and invariance hold over 1000 trials");
}

// ---------------------------------------------------------------------------
// Criterion 4: mean score delta formula
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_mean_score_delta_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..1_000 {
        let n = rng.gen_range(1..200);
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let h: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let expected = s.iter().zip(&h).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64;
        let actual = mean_score_delta(&s, &h).unwrap();
        assert!((actual - expected).abs() < 1e-12);
    }
    println!("PASS criterion 4: mean score delta matches the direct formula on 1000 random series pairs to 1e-12");
}

// ---------------------------------------------------------------------------
// Criterion 5: random baseline uncorrelated on the 359-record fixture
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_random_baseline_uncorrelated() {
    let started = Instant::now();
    let dataset = synthetic_dataset(359);
    let summary = summarize(&dataset);
    let mean = summary.score_mean.unwrap();
    let std = summary.score_std.unwrap();
    assert!((mean - 0.42).abs() < 0.01, "fixture mean {mean}");
    assert!((std - 0.42).abs() < 0.01, "fixture std {std}");

    let registry = MetricRegistry::with_builtins();
    let fixed_metrics: Vec<MetricId> = MetricId::BUILTINS
        .iter()
        .filter(|m| **m != MetricId::RandomBaseline)
        .cloned()
        .collect();
    let matrix = evaluate_all(
        &dataset,
        &fixed_metrics,
        &registry,
        &MetricContext::default(),
    )
    .unwrap();
    let mut columns: Vec<Vec<f64>> = (0..fixed_metrics.len())
        .map(|c| matrix.column_values(c).into_iter().flatten().collect())
        .collect();
    columns.push(matrix.human_values().into_iter().flatten().collect());

    let mut passing_seeds = 0;
    for seed in 0..100u64 {
        let ctx = MetricContext {
            random_seed: seed,
            ..MetricContext::default()
        };
        let random_column: Vec<f64> = dataset
            .records()
            .iter()
            .map(|r| {
                qa_eval_core::metrics::random_baseline(&r.gold_answers, &r.attempt, &ctx)
                    .unwrap()
                    .value()
            })
            .collect();
        let all_uncorrelated = columns.iter().all(|column| {
            let r = pearson(&random_column, column).unwrap().unwrap();
            r.abs() < 0.15
        });
        if all_uncorrelated {
            passing_seeds += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(passing_seeds >= 95, "only {passing_seeds}/100 seeds passed");
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    println!(
        "PASS criterion 5: random baseline uncorrelated (|r| < 0.15) with every metric for {passing_seeds}/100 seeds ({elapsed:?})"
    );
}

// ---------------------------------------------------------------------------
// Criterion 6: summary pipeline reproduces known counts and moments
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_summary_reproduces_known_counts() {
    let mut records = Vec::new();
    let questions = ["q1", "q1", "q1", "q2", "q3", "q4", "q5", "q6", "q7", "q8"];
    let golds = ["g1", "g1", "g2", "g2", "g3", "g3", "g4", "g4", "g5", "g6"];
    let attempts = ["a1", "a1", "a1", "a1", "a2", "a3", "a4", "a5", "a6", "a7"];
    let justifications = [
        Some("j1"),
        Some("j1"),
        Some("j2"),
        Some("j2"),
        Some("j3"),
        Some("j4"),
        None,
        None,
        None,
        None,
    ];
    let question_types = [
        Some("qt1"),
        Some("qt1"),
        Some("qt1"),
        Some("qt2"),
        Some("qt2"),
        None,
        None,
        None,
        None,
        None,
    ];
    let answer_types = [
        "name",
        "name",
        "name",
        "name",
        "numerical",
        "numerical",
        "numerical",
        "essay",
        "essay",
        "essay",
    ];
    let scores = [1.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.5, 1.0, 0.0, 0.5];
    for i in 0..10 {
        records.push(QARecord {
            id: format!("r{i}"),
            question: questions[i].to_string(),
            gold_answers: vec![golds[i].to_string()],
            attempt: attempts[i].to_string(),
            human_score: Some(Score::new(scores[i]).unwrap()),
            justification: justifications[i].map(str::to_string),
            question_type: question_types[i].map(str::to_string),
            answer_type: Some(answer_types[i].parse().unwrap()),
        });
    }
    let dataset = Dataset::from_records(records, "table-check").unwrap();
    let summary = summarize(&dataset);

    assert_eq!(summary.record_count, 10);
    assert_eq!(summary.unique_counts["question"], 8);
    assert_eq!(summary.unique_counts["gold"], 6);
    assert_eq!(summary.unique_counts["attempt"], 7);
    assert_eq!(summary.unique_counts["justification"], 4);
    assert_eq!(summary.unique_counts["question_type"], 2);
    assert_eq!(summary.unique_counts["answer_type"], 3);

    // 3 ones + 4 halves + 3 zeros: mean 0.5, variance 0.4 - 0.25 = 0.15.
    assert!((summary.score_mean.unwrap() - 0.5).abs() < 1e-9);
    assert!((summary.score_std.unwrap() - 0.15f64.sqrt()).abs() < 1e-9);

    // The 359-record generator's own targets reproduce through summarize.
    let synthetic = synthetic_dataset(359);
    let (target_mean, target_std) = score_targets(359);
    let synthetic_summary = summarize(&synthetic);
    assert!((synthetic_summary.score_mean.unwrap() - target_mean).abs() < 1e-9);
    assert!((synthetic_summary.score_std.unwrap() - target_std).abs() < 1e-9);

    println!("PASS criterion 6: summarize reproduces constructed unique counts exactly and generator moments to 1e-9");
}

// ---------------------------------------------------------------------------
// Criterion 7: routing beats every single metric on the adversarial fixture
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_routing_beats_single_metrics() {
    let dataset = adversarial_routing_dataset();
    let registry = MetricRegistry::with_builtins();
    let ctx = MetricContext::default();
    let human: Vec<f64> = dataset
        .records()
        .iter()
        .map(|r| r.human_score.unwrap().value())
        .collect();

    let routed = route_dataset(
        &dataset,
        &default_routing_table(),
        &registry,
        &ctx,
        &ClassifierConfig::default(),
    )
    .unwrap();
    let routed_scores: Vec<f64> = routed.iter().map(|r| r.score.value()).collect();
    let routed_delta = mean_score_delta(&routed_scores, &human).unwrap();

    let matrix = evaluate_all(&dataset, &MetricId::BUILTINS, &registry, &ctx).unwrap();
    for (column, id) in matrix.metric_ids().iter().enumerate() {
        let values: Vec<f64> = matrix.column_values(column).into_iter().flatten().collect();
        let metric_delta = mean_score_delta(&values, &human).unwrap();
        assert!(
            routed_delta <= metric_delta,
            "routed delta {routed_delta} > {id} delta {metric_delta}"
        );
        assert!(
            metric_delta > 0.0,
            "{id} delta is zero; fixture is not adversarial for it"
        );
    }
    println!(
        "PASS criterion 7: routed grading delta {routed_delta:.6} <= every single-metric delta"
    );
}

// ---------------------------------------------------------------------------
// Criterion 8: byte-identical pipeline runs
// ---------------------------------------------------------------------------

fn run_cli(args: &[&str]) {
    let output = Command::new(env!("CARGO_BIN_EXE_qa-eval"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "qa-eval {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    entries
}

#[test]
fn criterion_08_pipeline_determinism() {
    let temp = tempfile::tempdir().unwrap();
    let dataset_path = temp.path().join("fixture.jsonl");
    let file = std::fs::File::create(&dataset_path).unwrap();
    synthetic_dataset(359).write_json_lines(file).unwrap();
    let dataset_arg = dataset_path.to_str().unwrap();

    let mut file_count = 0;
    for run in ["run_a", "run_b"] {
        let base = temp.path().join(run);
        run_cli(&[
            "evaluate",
            "--dataset",
            dataset_arg,
            "--seed",
            "0",
            "--out",
            base.join("evaluate").to_str().unwrap(),
        ]);
        run_cli(&[
            "analyze",
            "--dataset",
            dataset_arg,
            "--method",
            "all",
            "--seed",
            "0",
            "--out",
            base.join("analyze").to_str().unwrap(),
        ]);
        run_cli(&[
            "route",
            "--dataset",
            dataset_arg,
            "--seed",
            "0",
            "--out",
            base.join("route").to_str().unwrap(),
        ]);
    }

    for stage in ["evaluate", "analyze", "route"] {
        let a = dir_contents(&temp.path().join("run_a").join(stage));
        let b = dir_contents(&temp.path().join("run_b").join(stage));
        let names_a: Vec<&String> = a.iter().map(|(n, _)| n).collect();
        let names_b: Vec<&String> = b.iter().map(|(n, _)| n).collect();
        assert_eq!(names_a, names_b, "{stage} file sets differ");
        for ((name, bytes_a), (_, bytes_b)) in a.iter().zip(&b) {
            assert_eq!(bytes_a, bytes_b, "{stage}/{name} differs between runs");
            file_count += 1;
        }
    }
    println!("PASS criterion 8: two full evaluate/analyze/route runs produced byte-identical outputs ({file_count} files)");
}

// ---------------------------------------------------------------------------
// Criterion 9: external grader contract
// ---------------------------------------------------------------------------

fn grader_config(endpoint: &str, timeout: Duration, retries: u32) -> ExternalGraderConfig {
    ExternalGraderConfig::new(
        MetricId::External("grader".into()),
        endpoint,
        timeout,
        retries,
    )
    .unwrap()
}

fn sample_record() -> QARecord {
    QARecord::new(
        "r0",
        "Explain the process of photosynthesis.",
        vec!["Plants convert sunlight into chemical energy.".into()],
        "Plants make food using sunlight.",
    )
    .unwrap()
}

#[test]
fn criterion_09_external_grader_contract() {
    // Happy path: score and justification come through.
    let stub = StubGrader::start(StubBehavior::Respond {
        status: 200,
        body: r#"{"score":0.7,"justification":"Partial explanation"}"#.to_string(),
    });
    let graded = external_grade(
        &grader_config(&stub.endpoint, Duration::from_secs(2), 0),
        &sample_record(),
    )
    .unwrap();
    assert_eq!(graded.score.value(), 0.7);
    assert_eq!(graded.justification.as_deref(), Some("Partial explanation"));
    drop(stub);

    // Timeout honored: the stub stalls past the client deadline.
    let stub = StubGrader::start(StubBehavior::RespondAfter {
        delay: Duration::from_millis(600),
        body: r#"{"score":0.5}"#.to_string(),
    });
    let started = Instant::now();
    let err = external_grade(
        &grader_config(&stub.endpoint, Duration::from_millis(150), 0),
        &sample_record(),
    )
    .unwrap_err();
    let waited = started.elapsed();
    assert!(
        matches!(err, Error::GraderUnavailable { attempts: 1, .. }),
        "{err:?}"
    );
    assert!(
        waited < Duration::from_millis(600),
        "timeout ignored: {waited:?}"
    );
    drop(stub);

    // Retry count honored: two dropped connections, then success.
    let stub = StubGrader::start(StubBehavior::FailConnectionsThenRespond {
        failures: 2,
        body: r#"{"score":0.4}"#.to_string(),
    });
    let graded = external_grade(
        &grader_config(&stub.endpoint, Duration::from_secs(2), 2),
        &sample_record(),
    )
    .unwrap();
    assert_eq!(graded.score.value(), 0.4);
    assert_eq!(stub.hits(), 3, "expected 1 + 2 retries");
    drop(stub);

    // Out-of-range score is a protocol error naming the value.
    let stub = StubGrader::start(StubBehavior::Respond {
        status: 200,
        body: r#"{"score":1.5}"#.to_string(),
    });
    let err = external_grade(
        &grader_config(&stub.endpoint, Duration::from_secs(2), 0),
        &sample_record(),
    )
    .unwrap_err();
    match &err {
        Error::GraderProtocol(reason) => assert!(reason.contains("1.5"), "{reason}"),
        other => panic!("expected protocol error, got {other:?}"),
    }
    drop(stub);

    // Routed fallback: grader down -> fallback metric, flagged.
    let dead = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}/grade", dead.local_addr().unwrap());
    drop(dead);
    let mut registry = MetricRegistry::with_builtins();
    registry.register_external(grader_config(&endpoint, Duration::from_millis(200), 1));
    let table = default_routing_table_with_grader(MetricId::External("grader".into())).unwrap();
    let mut record = sample_record();
    record.answer_type = Some("essay".parse().unwrap());
    let routed = route_score(
        &record,
        &table,
        &registry,
        &MetricContext::default(),
        &ClassifierConfig::default(),
    )
    .unwrap();
    assert!(routed.fallback_used);
    assert_eq!(routed.metric_used, MetricId::RougeL);

    println!("PASS criterion 9: grader stub honors timeout, retries, range validation, and routed fallback");
}

// ---------------------------------------------------------------------------
// Criterion 10: performance envelope
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_performance_envelope() {
    let dataset = synthetic_dataset(359);
    let registry = MetricRegistry::with_builtins();
    let ctx = MetricContext::default();
    // Warm-up evaluation keeps one-time costs out of the measured run.
    let _ = evaluate_all_sequential(&dataset, &MetricId::BUILTINS, &registry, &ctx).unwrap();

    let started = Instant::now();
    let matrix = evaluate_all_sequential(&dataset, &MetricId::BUILTINS, &registry, &ctx).unwrap();
    let elapsed = started.elapsed();
    assert_eq!(matrix.record_count(), 359);
    assert!(
        elapsed < Duration::from_secs(1),
        "sequential 359x8 evaluation took {elapsed:?}"
    );
    println!(
        "PASS criterion 10: sequential evaluate_all on 359 records x 8 metrics in {elapsed:?} (< 1s)"
    );
}
