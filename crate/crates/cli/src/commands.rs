use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use textclf::bow::{read_matrix_market, BowPipeline, StopwordList};
use textclf::classifiers::{
    Classifier, ClassifierModel, Distance, KernelSpec, KnnParams, NbKind, SavedClassifier, SvmParams,
};
use textclf::cnn::{predict_batch, Architecture, CnnModelFile, LossKind, TrainingConfig, MODEL_MAGIC};
use textclf::corpus::{
    balanced_subsample_with, parse_corpus, write_corpus, BalanceMode, Label, LabeledDocument, Schema,
};
use textclf::embeddings::PretrainedVectors;
use textclf::eval::{
    cnn_encode, confusion, fit_bow, fit_cnn, method_seed, metrics, repetition_seed, repetition_split, run_experiments,
    write_results, ExperimentConfig, Method,
};
use textclf::numerics::{fnv1a, Matrix};
use textclf::textprep::{tokenize, Vocabulary};
use textclf::viz::{pca_2d, tsne_2d, TsneParams};
use textclf::Exec;

use crate::args::*;
use crate::error::{usage, CliError};

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Serialize)]
struct DataInfo {
    path: String,
    bytes: usize,
    fingerprint: String,
}

impl DataInfo {
    fn of(path: Option<&Path>, bytes: &[u8]) -> Self {
        Self {
            path: path.map_or_else(|| "bundled".to_owned(), |p| p.display().to_string()),
            bytes: bytes.len(),
            fingerprint: format!("{:016x}", fnv1a(bytes.iter().copied())),
        }
    }
}

/// `manifest.json`: everything needed to rerun the command via `--config`.
fn write_manifest<A: Serialize>(
    out: &Path,
    command: &str,
    args: &A,
    data: Option<DataInfo>,
    outputs: &[&str],
) -> CliResult {
    let m = json!({
        "tool": "textclf",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": args,
        "data": data,
        "outputs": outputs,
    });
    let mut text = serde_json::to_string_pretty(&m).map_err(textclf::Error::from)?;
    text.push('\n');
    std::fs::write(out.join("manifest.json"), text)?;
    Ok(())
}

fn exec(common: &CommonArgs) -> Exec {
    if common.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

fn require_file(p: &Path, what: &str) -> CliResult {
    if p.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} file not found: {}", p.display())))
    }
}

fn read_bytes(p: &Path, what: &str) -> CliResult<Vec<u8>> {
    require_file(p, what)?;
    Ok(std::fs::read(p)?)
}

fn create_out(common: &CommonArgs) -> CliResult<PathBuf> {
    std::fs::create_dir_all(&common.out)?;
    Ok(common.out.clone())
}

fn load_corpus(data: &DataArgs) -> CliResult<(Vec<LabeledDocument>, DataInfo)> {
    let bytes = match &data.data {
        Some(p) => read_bytes(p, "data")?,
        None => textclf::MICRO_CORPUS.as_bytes().to_vec(),
    };
    let docs = parse_corpus(&bytes, &Schema::default())?;
    log::info!("read {} documents", docs.len());
    Ok((docs, DataInfo::of(data.data.as_deref(), &bytes)))
}

fn load_stopwords(path: &Option<PathBuf>) -> CliResult<StopwordList> {
    match path {
        Some(p) => Ok(StopwordList::from_lines(&String::from_utf8_lossy(&read_bytes(p, "stop-word")?))),
        None => Ok(StopwordList::english()),
    }
}

fn check_range(ok: bool, msg: String) -> CliResult {
    if ok {
        Ok(())
    } else {
        Err(CliError::Usage(msg))
    }
}

fn check_data(d: &DataArgs) -> CliResult {
    check_range(
        d.train_fraction > 0.0 && d.train_fraction < 1.0,
        format!("--train-fraction must lie in (0, 1), got {}", d.train_fraction),
    )
}

fn check_sparsity(s: f64) -> CliResult {
    check_range(s > 0.0 && s < 1.0, format!("--max-sparsity must lie in (0, 1), got {s}"))
}

fn check_bow(b: &BowArgs) -> CliResult {
    check_sparsity(b.max_sparsity)?;
    check_range(b.k % 2 == 1, format!("--k must be odd, got {}", b.k))?;
    check_range(b.svm_c > 0.0 && b.svm_c.is_finite(), format!("--svm-c must be positive, got {}", b.svm_c))?;
    if let Some(g) = b.gamma {
        check_range(g > 0.0 && g.is_finite(), format!("--gamma must be positive, got {g}"))?;
    }
    Ok(())
}

fn check_cnn(c: &CnnArgs) -> CliResult {
    check_range(c.filters > 0, "--filters must be at least 1".into())?;
    check_range(
        !c.heights.is_empty() && !c.heights.contains(&0),
        format!("--heights must be positive, got {:?}", c.heights),
    )?;
    check_range(c.lr > 0.0 && c.lr.is_finite(), format!("--lr must be positive, got {}", c.lr))?;
    check_range(c.batch > 0, "--batch must be at least 1".into())?;
    check_range(c.epochs > 0, "--epochs must be at least 1".into())?;
    if let Some(d) = c.embed_dim {
        check_range(d > 0, "--embed-dim must be at least 1".into())?;
    }
    if c.max_len > 0 {
        let tallest = c.heights.iter().copied().max().unwrap_or(0);
        check_range(
            c.max_len >= tallest,
            format!("--max-len {} is shorter than the tallest filter ({tallest})", c.max_len),
        )?;
    }
    Ok(())
}

fn base_config(data: &DataArgs, common: &CommonArgs) -> ExperimentConfig {
    ExperimentConfig {
        master_seed: data.seed,
        train_fraction: data.train_fraction,
        balance: match data.balance {
            BalanceArg::Strict => BalanceMode::Strict,
            BalanceArg::DownsampleToxic => BalanceMode::DownsampleToxic,
        },
        exec: exec(common),
        ..ExperimentConfig::default()
    }
}

fn model_config(
    data: &DataArgs,
    common: &CommonArgs,
    bow: &BowArgs,
    cnn: &CnnArgs,
    vectors: Option<&PretrainedVectors>,
) -> CliResult<ExperimentConfig> {
    Ok(ExperimentConfig {
        stopwords: load_stopwords(&bow.stopwords)?,
        max_sparsity: bow.max_sparsity,
        nb: match bow.nb {
            NbArg::Gaussian => NbKind::Gaussian,
            NbArg::Multinomial => NbKind::Multinomial,
        },
        knn: KnnParams {
            k: bow.k,
            distance: match bow.distance {
                DistanceArg::Euclidean => Distance::Euclidean,
                DistanceArg::Cosine => Distance::Cosine,
            },
        },
        svm: SvmParams {
            c: bow.svm_c,
            kernel: match bow.kernel {
                KernelArg::Rbf => KernelSpec::Rbf { gamma: bow.gamma },
                KernelArg::Linear => KernelSpec::Linear,
            },
            ..SvmParams::default()
        },
        architecture: Architecture { filters: cnn.filters, heights: cnn.heights.clone() },
        embed_dim: cnn.embed_dim.or(vectors.map(|v| v.dim)).unwrap_or(300),
        max_len: cnn.max_len,
        training: TrainingConfig {
            batch_size: cnn.batch,
            learning_rate: cnn.lr,
            epochs: cnn.epochs,
            seed: 0,
            loss: match cnn.loss {
                LossArg::Mse => LossKind::SquaredError,
                LossArg::Xent => LossKind::CrossEntropy,
            },
        },
        ..base_config(data, common)
    })
}

/// Reads word vectors, keeping only words that occur in the corpus.
fn load_vectors(path: &Path, corpus: &[LabeledDocument]) -> CliResult<PretrainedVectors> {
    require_file(path, "embeddings")?;
    let keep: HashSet<String> = corpus.iter().flat_map(|d| tokenize(d.text())).collect();
    let v = PretrainedVectors::read(BufReader::new(File::open(path)?), Some(&keep))?;
    log::info!("loaded {} word vectors of dimension {}", v.vectors.len(), v.dim);
    Ok(v)
}

fn labels_text(labels: impl Iterator<Item = Label>) -> String {
    labels.map(|l| format!("{}\n", l.as_str())).collect()
}

pub fn prepare(a: &PrepareArgs) -> CliResult {
    check_data(&a.data)?;
    check_sparsity(a.max_sparsity)?;
    let stopwords = load_stopwords(&a.stopwords)?;
    let (corpus, info) = load_corpus(&a.data)?;
    let out = create_out(&a.common)?;
    let config = base_config(&a.data, &a.common);
    let parts = repetition_split(&corpus, &config, 0)?;
    let schema = Schema::default();
    std::fs::write(out.join("train.csv"), write_corpus(&parts.train, &schema))?;
    std::fs::write(out.join("test.csv"), write_corpus(&parts.test, &schema))?;

    let tokens: Vec<Vec<String>> = parts.train.iter().map(|d| tokenize(d.text())).collect();
    let vocab = Vocabulary::build(&tokens)?;
    std::fs::write(out.join("vocab.tsv"), vocab.to_tsv())?;
    let (pipeline, dtm) = BowPipeline::fit(&tokens, &stopwords, a.max_sparsity, config.exec)?;
    std::fs::write(out.join("dtm_train.mtx"), dtm.to_matrix_market())?;
    std::fs::write(out.join("terms_train.txt"), pipeline.terms.iter().map(|t| format!("{t}\n")).collect::<String>())?;
    std::fs::write(out.join("labels_train.txt"), labels_text(parts.train.iter().map(LabeledDocument::label)))?;
    log::info!(
        "{} training and {} test documents, {} words, {} terms after pruning",
        parts.train.len(),
        parts.test.len(),
        vocab.len(),
        pipeline.n_features()
    );
    write_manifest(
        &out,
        "prepare",
        a,
        Some(info),
        &["train.csv", "test.csv", "vocab.tsv", "dtm_train.mtx", "terms_train.txt", "labels_train.txt"],
    )
}

pub fn train(a: &TrainArgs) -> CliResult {
    check_data(&a.data)?;
    check_bow(&a.bow)?;
    check_cnn(&a.cnn)?;
    match (a.method, &a.cnn.embeddings) {
        (Method::CnnFix, None) => return Err(usage("--method cnn_fix requires --embeddings")),
        (m, Some(_)) if m != Method::CnnFix => {
            return Err(usage(format!("--embeddings only applies to cnn_fix, not {m}")))
        }
        _ => {}
    }
    let (corpus, info) = load_corpus(&a.data)?;
    let vectors = a.cnn.embeddings.as_deref().map(|p| load_vectors(p, &corpus)).transpose()?;
    let config = model_config(&a.data, &a.common, &a.bow, &a.cnn, vectors.as_ref())?;
    let out = create_out(&a.common)?;
    let parts = repetition_split(&corpus, &config, 0)?;
    let seed = method_seed(&config, 0);
    let truth: Vec<Label> = parts.test.iter().map(LabeledDocument::label).collect();
    let test_texts: Vec<&str> = parts.test.iter().map(LabeledDocument::text).collect();

    let mut diagnostics = json!({});
    let (predictions, outputs): (Vec<Label>, Vec<&str>) = if a.method.is_cnn() {
        let (model, losses) = fit_cnn(a.method, &parts.train, &config, vectors.as_ref(), seed)?;
        let mut w = BufWriter::new(File::create(out.join("model.cnn"))?);
        model.write_to(&mut w)?;
        w.flush()?;
        let mut trace = String::from("epoch,loss\n");
        for (e, l) in losses.iter().enumerate() {
            trace.push_str(&format!("{},{l:?}\n", e + 1));
        }
        std::fs::write(out.join("trace.csv"), trace)?;
        let enc = cnn_encode(&model.vocabulary, model.params.max_len, &test_texts);
        let preds = predict_batch(&model.params, &enc, config.exec)?.into_iter().map(|p| p.label).collect();
        (preds, vec!["model.cnn", "trace.csv", "metrics.json"])
    } else {
        let saved = fit_bow(a.method, &parts.train, &config)?;
        if let ClassifierModel::Svm(m) = &saved.model {
            diagnostics = json!({
                "support_vectors": m.support_indices.len(),
                "passes": m.passes,
                "kkt_residual": m.kkt_residual,
                "dual_objective": m.dual_objective,
            });
        }
        std::fs::write(out.join("model.json"), saved.to_json()?)?;
        let tokens: Vec<Vec<String>> = test_texts.iter().map(|t| tokenize(t)).collect();
        let x = saved.pipeline.transform_all(&tokens, config.exec);
        (saved.model.predict(&x, config.exec)?, vec!["model.json", "metrics.json"])
    };

    let cm = confusion(&predictions, &truth)?;
    let report = metrics(&cm);
    log::info!("{}: held-out accuracy {:?}", a.method, report.accuracy);
    let summary = json!({
        "method": a.method,
        "train_size": parts.train.len(),
        "test_size": parts.test.len(),
        "confusion": cm,
        "metrics": report,
        "diagnostics": diagnostics,
    });
    let mut text = serde_json::to_string_pretty(&summary).map_err(textclf::Error::from)?;
    text.push('\n');
    std::fs::write(out.join("metrics.json"), text)?;
    write_manifest(&out, "train", a, Some(info), &outputs)
}

enum LoadedModel {
    Bow(SavedClassifier),
    Cnn(CnnModelFile),
}

fn load_model(path: &Path) -> CliResult<LoadedModel> {
    let bytes = read_bytes(path, "model")?;
    if bytes.starts_with(MODEL_MAGIC) {
        Ok(LoadedModel::Cnn(CnnModelFile::read_from(bytes.as_slice())?))
    } else {
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| textclf::Error::Corruption(format!("{} is neither a CNN model nor JSON", path.display())))?;
        Ok(LoadedModel::Bow(SavedClassifier::from_json(text)?))
    }
}

pub fn predict(a: &PredictArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let mut raw = Vec::new();
    File::open(&a.input)
        .map_err(|_| usage(format!("input file not found: {}", a.input.display())))?
        .read_to_end(&mut raw)?;
    let text = String::from_utf8(raw.clone())
        .map_err(|_| textclf::Error::Format { line: 0, message: "input is not valid UTF-8".into() })?;
    let lines: Vec<&str> = text.lines().collect();
    let exec = exec(&a.common);
    let labels: Vec<Label> = match &model {
        LoadedModel::Cnn(m) => {
            let enc = cnn_encode(&m.vocabulary, m.params.max_len, &lines);
            predict_batch(&m.params, &enc, exec)?.into_iter().map(|p| p.label).collect()
        }
        LoadedModel::Bow(m) => {
            let tokens: Vec<Vec<String>> = lines.iter().map(|l| tokenize(l)).collect();
            let x: Matrix = m.pipeline.transform_all(&tokens, exec);
            m.model.predict(&x, exec)?
        }
    };
    let out = create_out(&a.common)?;
    let mut csv = String::from("row,label\n");
    for (i, l) in labels.iter().enumerate() {
        csv.push_str(&format!("{i},{}\n", l.as_str()));
    }
    std::fs::write(out.join("predictions.csv"), csv)?;
    log::info!("labelled {} lines", labels.len());
    write_manifest(&out, "predict", a, Some(DataInfo::of(Some(&a.input), &raw)), &["predictions.csv"])
}

pub fn benchmark(a: &BenchmarkArgs) -> CliResult {
    check_data(&a.data)?;
    check_bow(&a.bow)?;
    check_cnn(&a.cnn)?;
    check_range(a.reps > 0, "--reps must be at least 1".into())?;
    let methods: Vec<Method> = if a.methods.is_empty() {
        Method::ALL.into_iter().filter(|m| *m != Method::CnnFix || a.cnn.embeddings.is_some()).collect()
    } else {
        let mut seen = Vec::new();
        for m in &a.methods {
            if !seen.contains(m) {
                seen.push(*m);
            }
        }
        seen
    };
    let has_fix = methods.contains(&Method::CnnFix);
    if has_fix && a.cnn.embeddings.is_none() {
        return Err(usage("cnn_fix requires --embeddings"));
    }
    if !has_fix && a.cnn.embeddings.is_some() {
        return Err(usage("--embeddings given but cnn_fix is not among --methods"));
    }
    let (corpus, info) = load_corpus(&a.data)?;
    let vectors = a.cnn.embeddings.as_deref().map(|p| load_vectors(p, &corpus)).transpose()?;
    let config =
        ExperimentConfig { repetitions: a.reps, ..model_config(&a.data, &a.common, &a.bow, &a.cnn, vectors.as_ref())? };
    let out = create_out(&a.common)?;
    let mut results = Vec::with_capacity(methods.len());
    for m in methods {
        log::info!("{m}: {} repetitions", a.reps);
        let r = run_experiments(m, &corpus, &config, vectors.as_ref())?;
        log::info!("{m}: mean accuracy {:?}", r.summary(textclf::eval::Metric::Accuracy).mean);
        results.push(r);
    }
    write_results(&out, &results)?;
    write_manifest(
        &out,
        "benchmark",
        a,
        Some(info),
        &[
            "summary.csv",
            "runs.csv",
            "box_accuracy.svg",
            "box_precision.svg",
            "box_recall.svg",
            "box_f1.svg",
            "box_specificity.svg",
            "box_fdr.svg",
        ],
    )
}

/// The matrix to project, its row labels and the data fingerprint.
fn viz_input(a: &VizArgs) -> CliResult<(Matrix, Vec<String>, DataInfo)> {
    if let Some(p) = &a.input_dtm {
        let bytes = read_bytes(p, "DTM")?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| textclf::Error::Format { line: 0, message: "DTM is not valid UTF-8".into() })?;
        let x = read_matrix_market(&text)?;
        let labels = match &a.labels {
            Some(lp) => {
                let l: Vec<String> =
                    String::from_utf8_lossy(&read_bytes(lp, "labels")?).lines().map(str::to_owned).collect();
                if l.len() != x.rows() {
                    return Err(usage(format!("{} labels for a DTM with {} rows", l.len(), x.rows())));
                }
                l
            }
            None => vec!["unknown".to_owned(); x.rows()],
        };
        return Ok((x, labels, DataInfo::of(Some(p), &bytes)));
    }
    check_data(&a.data)?;
    check_sparsity(a.max_sparsity)?;
    let stopwords = load_stopwords(&a.stopwords)?;
    let (corpus, info) = load_corpus(&a.data)?;
    let config = base_config(&a.data, &a.common);
    let docs = balanced_subsample_with(&corpus, repetition_seed(a.data.seed, 0), config.balance)?;
    let tokens: Vec<Vec<String>> = docs.iter().map(|d| tokenize(d.text())).collect();
    let (_, dtm) = BowPipeline::fit(&tokens, &stopwords, a.max_sparsity, config.exec)?;
    let labels = docs.iter().map(|d| d.label().as_str().to_owned()).collect();
    Ok((dtm.to_dense(), labels, info))
}

pub fn viz_pca(a: &VizArgs) -> CliResult {
    let (x, labels, info) = viz_input(a)?;
    log::info!("projecting {}×{} matrix with PCA", x.rows(), x.cols());
    let proj = pca_2d(&x, labels)?;
    let out = create_out(&a.common)?;
    proj.write(&out, "pca")?;
    write_manifest(&out, "viz pca", a, Some(info), &["pca.csv", "pca.svg"])
}

pub fn viz_tsne(a: &TsneArgs) -> CliResult {
    check_range(
        a.perplexity > 0.0 && a.perplexity.is_finite(),
        format!("--perplexity must be positive, got {}", a.perplexity),
    )?;
    check_range(a.iters > 0, "--iters must be at least 1".into())?;
    let (x, labels, info) = viz_input(&a.viz)?;
    log::info!("projecting {}×{} matrix with t-SNE", x.rows(), x.cols());
    let params =
        TsneParams { perplexity: a.perplexity, iterations: a.iters, seed: a.viz.data.seed, ..TsneParams::default() };
    let res = tsne_2d(&x, labels, &params, exec(&a.viz.common))?;
    let out = create_out(&a.viz.common)?;
    res.projection.write(&out, "tsne")?;
    let mut kl = String::from("iteration,kl\n");
    for (i, v) in &res.kl_trace {
        kl.push_str(&format!("{i},{v:?}\n"));
    }
    std::fs::write(out.join("tsne_kl.csv"), kl)?;
    write_manifest(&out, "viz tsne", a, Some(info), &["tsne.csv", "tsne.svg", "tsne_kl.csv"])
}
