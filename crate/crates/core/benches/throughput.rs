//! Sequential vs parallel execution of the three data-parallel hot paths.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gesture_stream::calibrate::{compute_s, derive_params};
use gesture_stream::cgr::run_stream;
use gesture_stream::par::Execution;
use gesture_stream::pipeline::probability_stream;
use gesture_stream::rnn::{train_with, ModelParams, TrainConfig};
use gesture_stream::synthgen::{generate_corpus, Corpus, CorpusConfig};
use gesture_stream::GestureDictionary;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn corpus() -> Corpus {
    generate_corpus(&CorpusConfig {
        per_class_count: 20,
        sequences: 4,
        ..CorpusConfig::default()
    })
    .unwrap()
}

fn bench(c: &mut Criterion) {
    let corpus = corpus();
    let all = corpus.isolated.all();
    let durations = compute_s(&all, 6).unwrap();
    let dict = GestureDictionary::from_durations(&durations).unwrap();
    let model = ModelParams::init(32, 6, 40, 1);
    let rec = &corpus.continuous[0].recording;

    let mut g = c.benchmark_group("probability_stream");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| probability_stream(&model, rec, exec).unwrap())
        });
    }
    g.finish();

    let cfg = TrainConfig {
        epochs: 1,
        window_len: Some(40),
        ..TrainConfig::default()
    };
    let mut g = c.benchmark_group("train_epoch");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| train_with(&corpus.isolated.train, &dict, &cfg, exec).unwrap())
        });
    }
    g.finish();

    let probs: Vec<_> = corpus
        .continuous
        .iter()
        .map(|s| probability_stream(&model, &s.recording, Execution::Parallel).unwrap())
        .collect();
    let m = vec![0.9; 6];
    let grid: Vec<(f64, f64)> = [0.05, 0.1, 0.25, 0.5]
        .iter()
        .flat_map(|&a| [0.3, 0.6, 0.9].map(|g| (a, g)))
        .collect();
    let mut g = c.benchmark_group("sweep");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                exec.map(&grid, |&(alpha, gamma)| {
                    let params = derive_params(&durations, &m, 40, alpha, gamma, 0.2).unwrap();
                    probs
                        .iter()
                        .map(|p| run_stream(p, &params).unwrap().len())
                        .sum::<usize>()
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
