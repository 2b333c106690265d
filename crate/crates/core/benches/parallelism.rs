//! Sequential vs. data-parallel throughput for the batch entry points.
//!
//! Run with `cargo bench -p dialokit-core`; the "sequential" rows pin one
//! worker, the "parallel" rows let the global pool size itself. Building
//! with `--no-default-features` makes both rows run the sequential path.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dialokit_core::corpus::{DialogueSession, TokenSeq, Tokenizer, TokenizerConfig, Utterance};
use dialokit_core::exec::AUTO_WORKERS;
use dialokit_core::metrics::{evaluate, EvalPair};
use dialokit_core::quality::QualityScorer;

const WORDS: [&str; 8] = ["今天", "天气", "真好", "我们", "出去", "走走", "怎么样", "好啊"];

fn synth_sessions(n: usize) -> Vec<DialogueSession> {
    (0..n)
        .map(|i| {
            let turns = 2 + i % 4;
            let utterances = (0..turns)
                .map(|t| {
                    let text: String =
                        (0..6).map(|k| WORDS[(i * 7 + t * 3 + k) % WORDS.len()]).collect();
                    Utterance::new(text).unwrap()
                })
                .collect();
            DialogueSession::new(format!("bench-{i:04}"), "bench", utterances).unwrap()
        })
        .collect()
}

fn synth_pairs(n: usize) -> Vec<EvalPair> {
    (0..n)
        .map(|i| {
            let side = |salt: usize| -> TokenSeq {
                (0..12).map(|k| WORDS[(i * 5 + salt + k) % WORDS.len()].to_string()).collect()
            };
            EvalPair { hypothesis: side(0), reference: side(i % 3) }
        })
        .collect()
}

fn bench_quality_batch(c: &mut Criterion) {
    let tokenizer = Tokenizer::new(&TokenizerConfig::default()).unwrap();
    let scorer = QualityScorer::new(tokenizer);
    let sessions = synth_sessions(512);
    let mut group = c.benchmark_group("quality-batch");
    group.sample_size(20);
    for (label, workers) in [("sequential", 1usize), ("parallel", AUTO_WORKERS)] {
        group.bench_with_input(BenchmarkId::from_parameter(label), &workers, |b, &w| {
            b.iter(|| scorer.score_batch(&sessions, w).unwrap());
        });
    }
    group.finish();
}

fn bench_metric_suite(c: &mut Criterion) {
    let pairs = synth_pairs(4096);
    let mut group = c.benchmark_group("metric-suite");
    group.sample_size(20);
    for (label, workers) in [("sequential", 1usize), ("parallel", AUTO_WORKERS)] {
        group.bench_with_input(BenchmarkId::from_parameter(label), &workers, |b, &w| {
            b.iter(|| evaluate(&pairs, w).unwrap());
        });
    }
    group.finish();
}

criterion_group!(benches, bench_quality_batch, bench_metric_suite);
criterion_main!(benches);
