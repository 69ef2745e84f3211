//! Sequential vs parallel execution of the data-parallel hot paths.
//! Build with `--no-default-features` to see both modes collapse to one.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use textclf::bow::{BowPipeline, StopwordList};
use textclf::classifiers::{Classifier, KnnModel, KnnParams};
use textclf::cnn::{forward, Architecture, NetworkParams};
use textclf::corpus::{parse_corpus, Label, Schema};
use textclf::embeddings::random_table;
use textclf::eval::{run_experiments, ExperimentConfig, Method};
use textclf::numerics::{Matrix, SeededRng};
use textclf::textprep::{encode_and_pad, tokenize, Vocabulary};
use textclf::viz::{tsne_2d, TsneParams};
use textclf::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn corpus_tokens() -> (Vec<Vec<String>>, Vec<Label>) {
    let docs = parse_corpus(textclf::MICRO_CORPUS.as_bytes(), &Schema::default()).unwrap();
    (docs.iter().map(|d| tokenize(d.text())).collect(), docs.iter().map(|d| d.label()).collect())
}

fn cnn_forward(c: &mut Criterion) {
    let (tokens, _) = corpus_tokens();
    let vocab = Vocabulary::build(&tokens).unwrap();
    let mut rng = SeededRng::new(1);
    let table = random_table(&vocab, 64, &mut rng).unwrap();
    let params =
        NetworkParams::init(table, &Architecture { filters: 64, heights: vec![3, 4, 5] }, 40, &mut rng).unwrap();
    let docs: Vec<_> = tokens.iter().cycle().take(256).map(|t| encode_and_pad(t, &vocab, 40)).collect();
    let mut g = c.benchmark_group("cnn_forward_256_docs");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| forward(&params, black_box(&docs), exec).unwrap())
        });
    }
    g.finish();
}

fn knn_predict(c: &mut Criterion) {
    let mut rng = SeededRng::new(2);
    let (n, p) = (1000, 150);
    let x = Matrix::from_vec(n, p, (0..n * p).map(|_| rng.normal()).collect()).unwrap();
    let y: Vec<Label> = (0..n).map(|i| Label::from_index(i % 2)).collect();
    let model = KnnModel::fit(&x, &y, &KnnParams::default()).unwrap();
    let q = Matrix::from_vec(200, p, (0..200 * p).map(|_| rng.normal()).collect()).unwrap();
    let mut g = c.benchmark_group("knn_predict_200_queries");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| model.predict(black_box(&q), exec).unwrap()));
    }
    g.finish();
}

fn bow_transform(c: &mut Criterion) {
    let (tokens, _) = corpus_tokens();
    let many: Vec<Vec<String>> = tokens.iter().cycle().take(4000).cloned().collect();
    let (pipeline, _) = BowPipeline::fit(&tokens, &StopwordList::english(), 0.99, Exec::Sequential).unwrap();
    let mut g = c.benchmark_group("bow_transform_4000_docs");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pipeline.transform_all(black_box(&many), exec))
        });
    }
    g.finish();
}

fn tsne(c: &mut Criterion) {
    let mut rng = SeededRng::new(3);
    let n = 200;
    let x = Matrix::from_vec(n, 10, (0..n * 10).map(|i| rng.normal() + (i / 10 % 4) as f64).collect()).unwrap();
    let labels = vec![String::from("x"); n];
    let params = TsneParams { perplexity: 20.0, iterations: 100, ..TsneParams::default() };
    let mut g = c.benchmark_group("tsne_200_points_100_iters");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| tsne_2d(black_box(&x), labels.clone(), &params, exec).unwrap())
        });
    }
    g.finish();
}

fn repetitions(c: &mut Criterion) {
    let docs = parse_corpus(textclf::MICRO_CORPUS.as_bytes(), &Schema::default()).unwrap();
    let mut g = c.benchmark_group("svm_8_repetitions");
    g.sample_size(10);
    for (name, exec) in MODES {
        let config = ExperimentConfig { repetitions: 8, exec, ..ExperimentConfig::default() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_experiments(Method::Svm, black_box(&docs), &config, None).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, cnn_forward, knn_predict, bow_transform, tsne, repetitions);
criterion_main!(benches);
