//! Deterministic synthetic datasets for tests and benchmarks.
//!
//! No randomness: the same call always builds the same records, so test
//! expectations and benchmark workloads stay stable.

use crate::dataset::{AnswerType, Dataset, QARecord, Score};
use crate::metrics::{rouge_l, MetricContext};

struct Template {
    question: &'static str,
    gold: &'static str,
    partial: &'static str,
    wrong: &'static str,
    answer_type: AnswerType,
}

const TEMPLATES: [Template; 16] = [
    Template {
        question: "What is the capital of Norway?",
        gold: "Oslo",
        partial: "Olso",
        wrong: "Bergen",
        answer_type: AnswerType::SingleWord,
    },
    Template {
        question: "What is 12 times 12?",
        gold: "144",
        partial: "140",
        wrong: "122",
        answer_type: AnswerType::Numerical,
    },
    Template {
        question: "Describe how rain forms.",
        gold: "Water evaporates from the surface. The vapor rises and cools. \
               Droplets gather around dust. Clouds grow heavy. Drops fall as rain.",
        partial: "Water evaporates from the surface. Clouds grow heavy. Drops fall as rain.",
        wrong: "Wind pushes sand across dunes. Heat cracks dry stone over years.",
        answer_type: AnswerType::Paragraph,
    },
    Template {
        question: "Write a loop that sums an array.",
        gold: "for (int i = 0; i < n; i++) {\n    sum += values[i];\n}",
        partial: "for (int i = 0; i < n; i++) {\n    total = values[i];\n}",
        wrong: "while queue:\n    node = queue.pop()",
        answer_type: AnswerType::CodeSnippet,
    },
    Template {
        question: "State one effect of deforestation.",
        gold: "Deforestation reduces habitat for countless forest species.",
        partial: "Deforestation reduces rainfall in some regions.",
        wrong: "Volcanoes release ash that cools the climate briefly.",
        answer_type: AnswerType::Sentence,
    },
    Template {
        question: "Give the mass-energy relation.",
        gold: "E = mc^2",
        partial: "E = mc",
        wrong: "F = ma",
        answer_type: AnswerType::Equation,
    },
    Template {
        question: "Name the phrase for an unavoidable outcome.",
        gold: "a foregone conclusion",
        partial: "a known conclusion",
        wrong: "an open question",
        answer_type: AnswerType::Phrase,
    },
    Template {
        question: "Who painted the ceiling of the Sistine Chapel?",
        gold: "Michelangelo Buonarroti",
        partial: "Michelangelo",
        wrong: "Leonardo da Vinci",
        answer_type: AnswerType::Name,
    },
    Template {
        question: "Is the Sun a star?",
        gold: "yes",
        partial: "probably",
        wrong: "no",
        answer_type: AnswerType::Boolean,
    },
    Template {
        question: "List three primary colors.",
        gold: "red, yellow, blue",
        partial: "red, blue",
        wrong: "green, purple",
        answer_type: AnswerType::List,
    },
    Template {
        question: "Which symbol denotes logical and?",
        gold: "&&",
        partial: "&",
        wrong: "||",
        answer_type: AnswerType::Symbol,
    },
    Template {
        question: "Which letter marks the unknown in algebra?",
        gold: "x",
        partial: "y",
        wrong: "q",
        answer_type: AnswerType::SingleCharacter,
    },
    Template {
        question: "Give the chemical formula of glucose.",
        gold: "C6H12O6",
        partial: "C6H12O",
        wrong: "NaCl2",
        answer_type: AnswerType::Formula,
    },
    Template {
        question: "Explain the water cycle in detail.",
        gold: "The sun heats oceans and lakes. Water turns to vapor. Vapor rises high. \
               Air cools with altitude. Vapor condenses on particles. Clouds drift inland. \
               Rain falls on hills. Streams gather the water. Rivers carry it back.",
        partial: "The sun heats oceans and lakes. Vapor rises high. Clouds drift inland. \
                  Rain falls on hills.",
        wrong: "Markets open at dawn. Traders shout their bids. Prices move with news. \
                Bells end the session. Clerks settle accounts. Reports print overnight. \
                Analysts argue all week. Nothing is ever certain. Cycles repeat anyway.",
        answer_type: AnswerType::LongParagraph,
    },
    Template {
        question: "Write a short essay on why cities grew near rivers.",
        gold: "Rivers gave early cities water to drink. They watered the fields. \
               Boats moved grain cheaply. Trade followed the current. Markets rose at the banks. \
               Ferries stitched the shores together. Mills ran on the flow. Walls rose with the wealth. \
               Laws followed the markets. Schools followed the laws. Floods taught planning. \
               Bridges taught engineering. The river was the first teacher.",
        partial: "Rivers gave early cities water to drink. Boats moved grain cheaply. \
                  Markets rose at the banks. Mills ran on the flow. The river was the first teacher.",
        wrong: "Deserts reward patience above all. Caravans follow the stars. Wells decide the route. \
                Salt buys silver. Storms erase the road. Guides sell memory. Camps move with the moon. \
                Dunes swallow the careless. Maps lie within a season. Songs carry the way. \
                Elders keep the names. Children learn the winds. Sand keeps no promises.",
        answer_type: AnswerType::Essay,
    },
    Template {
        question: "Summarize photosynthesis in two sentences.",
        gold: "Green plants capture sunlight with chlorophyll. They turn water and carbon dioxide into sugar.",
        partial: "Green plants capture sunlight. They make sugar.",
        wrong: "Fungi digest wood from the outside. They release spores at night.",
        answer_type: AnswerType::ShortParagraph,
    },
];

#[derive(Clone, Copy, PartialEq)]
enum Outcome {
    Wrong,
    Partial,
    Exact,
}

/// Proportional outcome schedule: 0.0 / 0.5 / 1.0 human scores mixed so the
/// overall mean and population std both land near 0.42.
fn outcome_schedule(n: usize) -> Vec<Outcome> {
    let (zeros, halves, ones) = outcome_counts(n);
    let targets = [zeros, halves, ones];
    let kinds = [Outcome::Wrong, Outcome::Partial, Outcome::Exact];
    let mut assigned = [0usize; 3];
    let mut schedule = Vec::with_capacity(n);
    for _ in 0..n {
        let next = (0..3)
            .filter(|&k| assigned[k] < targets[k])
            .min_by(|&a, &b| {
                let fa = (assigned[a] + 1) as f64 / targets[a].max(1) as f64;
                let fb = (assigned[b] + 1) as f64 / targets[b].max(1) as f64;
                fa.partial_cmp(&fb).expect("finite ratios")
            })
            .expect("targets sum to n");
        assigned[next] += 1;
        schedule.push(kinds[next]);
    }
    schedule
}

fn outcome_counts(n: usize) -> (usize, usize, usize) {
    let ones = (n as f64 * 0.2856).round() as usize;
    let halves = (n as f64 * 0.2688).round() as usize;
    let zeros = n - ones.min(n) - halves.min(n - ones.min(n));
    (zeros, halves.min(n - ones.min(n)), ones.min(n))
}

/// The human-score mean and population std this generator aims for, computed
/// independently of `summarize` from the outcome counts.
pub fn score_targets(n: usize) -> (f64, f64) {
    let (_, halves, ones) = outcome_counts(n);
    let n = n as f64;
    let mean = (0.5 * halves as f64 + ones as f64) / n;
    let second_moment = (0.25 * halves as f64 + ones as f64) / n;
    (mean, (second_moment - mean * mean).sqrt())
}

/// Builds a labeled synthetic dataset of `n` records spanning all 16 answer
/// types, with human scores in {0, 0.5, 1} mixed to match [`score_targets`].
/// Gold and attempt texts carry a per-record marker token so no two records
/// share an identical (gold, attempt) pair.
pub fn synthetic_dataset(n: usize) -> Dataset {
    let schedule = outcome_schedule(n);
    let mut records = Vec::with_capacity(n);
    for (i, outcome) in schedule.into_iter().enumerate() {
        let template = &TEMPLATES[i % TEMPLATES.len()];
        let marker = format!("c{i}");
        let gold = format!("{} {marker}", template.gold);
        let (attempt, human) = match outcome {
            Outcome::Exact => (gold.clone(), 1.0),
            Outcome::Partial => (format!("{} {marker}", template.partial), 0.5),
            Outcome::Wrong => (format!("{} {marker}", template.wrong), 0.0),
        };
        records.push(QARecord {
            id: format!("s{i:04}"),
            question: format!("{} (case {i})", template.question),
            gold_answers: vec![gold],
            attempt,
            human_score: Some(Score::new(human).expect("pool scores are valid")),
            justification: Some(match outcome {
                Outcome::Exact => "Matches the reference answer.".to_string(),
                Outcome::Partial => "Partially covers the reference answer.".to_string(),
                Outcome::Wrong => "Does not answer the question.".to_string(),
            }),
            question_type: Some(format!("qt{}", i % 61)),
            answer_type: Some(template.answer_type),
        });
    }
    Dataset::from_records(records, "synthetic").expect("generated records are valid")
}

/// A labeled fixture where exact match is the perfect grader for short forms
/// and ROUGE-L is the perfect grader for long forms, so routing by type beats
/// every single metric.
///
/// Short-form records alternate exact hits (human 1) and near misses
/// (human 0, but with token overlap that inflates the softer metrics).
/// Long-form records set the human score to the ROUGE-L value of a partial
/// attempt, which exact match scores 0.
pub fn adversarial_routing_dataset() -> Dataset {
    let ctx = MetricContext::default();
    let mut records = Vec::new();

    let short_types = [
        AnswerType::SingleWord,
        AnswerType::Name,
        AnswerType::Numerical,
        AnswerType::Boolean,
    ];
    let short_cases = [
        ("blue whale", "blue whale", 1.0),
        ("blue whale", "blue shark", 0.0),
        ("mount everest", "mount everest", 1.0),
        ("mount everest", "mount fuji", 0.0),
        ("nitrogen gas", "nitrogen gas", 1.0),
        ("nitrogen gas", "nitrogen oxide", 0.0),
        ("silk road", "silk road", 1.0),
        ("silk road", "silk route", 0.0),
    ];
    for (i, (gold, attempt, human)) in short_cases.iter().enumerate() {
        records.push(QARecord {
            id: format!("short{i:02}"),
            question: format!("short question {i}"),
            gold_answers: vec![gold.to_string()],
            attempt: attempt.to_string(),
            human_score: Some(Score::new(*human).expect("fixture scores valid")),
            justification: None,
            question_type: None,
            answer_type: Some(short_types[i % short_types.len()]),
        });
    }

    let long_types = [
        AnswerType::ShortParagraph,
        AnswerType::Paragraph,
        AnswerType::LongParagraph,
        AnswerType::Essay,
    ];
    let long_cases = [
        (
            "The engine draws in air. Fuel mixes with the air. A spark ignites the mixture. \
             Expanding gas drives the piston.",
            "The engine draws in air. A spark ignites the mixture.",
        ),
        (
            "Glaciers carve valleys over centuries. Ice drags rock across bedrock. \
             Meltwater rivers finish the work. The valley floor ends up rounded.",
            "Glaciers carve valleys over centuries. Meltwater rivers finish the work.",
        ),
        (
            "A bill starts in committee. Members amend the draft. The chamber debates it. \
             Votes send it across the hall. The executive signs or vetoes.",
            "A bill starts in committee. The chamber debates it. The executive signs or vetoes.",
        ),
        (
            "Tides follow the moon. Water bulges toward its pull. The earth turns beneath the bulge. \
             Coasts see two highs a day. Storms stack surges on top.",
            "Tides follow the moon. Coasts see two highs a day.",
        ),
    ];
    for (i, (gold, attempt)) in long_cases.iter().enumerate() {
        let golds = vec![gold.to_string()];
        let human = rouge_l(&golds, attempt, &ctx).expect("nonempty golds");
        records.push(QARecord {
            id: format!("long{i:02}"),
            question: format!("long question {i}"),
            gold_answers: golds,
            attempt: attempt.to_string(),
            human_score: Some(human),
            justification: None,
            question_type: None,
            answer_type: Some(long_types[i % long_types.len()]),
        });
    }

    Dataset::from_records(records, "adversarial").expect("fixture records are valid")
}
