//! Repeated balanced train/test runs and their diagnostics.

mod export;

pub use export::{box_plot_svg, read_runs_csv, runs_csv, summary_csv, write_results, RunRow};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bow::{BowPipeline, StopwordList};
use crate::classifiers::{Classifier, ClassifierSpec, KnnParams, NbKind, SavedClassifier, SvmParams};
use crate::cnn::{predict_batch, train, Architecture, CnnModelFile, TrainingConfig};
use crate::corpus::{balanced_subsample_with, split, BalanceMode, CorpusSplit, Label, LabeledDocument};
use crate::embeddings::{random_table, PretrainedVectors};
use crate::error::{Error, Result};
use crate::exec::{try_map_range, Exec};
use crate::numerics::{derive_seed, mean, sample_std, streams, Matrix, SeededRng};
use crate::textprep::{corpus_max_len, encode_and_pad, tokenize, EncodedDocument, Vocabulary};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.tn + self.fp
    }
}

/// Tally with `toxic` as the positive class.
pub fn confusion(preds: &[Label], truth: &[Label]) -> Result<ConfusionMatrix> {
    if preds.len() != truth.len() {
        return Err(Error::arg(format!("{} predictions for {} labels", preds.len(), truth.len())));
    }
    if preds.is_empty() {
        return Err(Error::arg("no predictions to score"));
    }
    let mut cm = ConfusionMatrix::default();
    for (p, t) in preds.iter().zip(truth) {
        match (t, p) {
            (Label::Toxic, Label::Toxic) => cm.tp += 1,
            (Label::Toxic, Label::NonToxic) => cm.fn_ += 1,
            (Label::NonToxic, Label::NonToxic) => cm.tn += 1,
            (Label::NonToxic, Label::Toxic) => cm.fp += 1,
        }
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Precision,
    Recall,
    F1,
    Specificity,
    Fdr,
}

impl Metric {
    pub const ALL: [Metric; 6] =
        [Metric::Accuracy, Metric::Precision, Metric::Recall, Metric::F1, Metric::Specificity, Metric::Fdr];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
            Metric::Specificity => "specificity",
            Metric::Fdr => "fdr",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| Error::arg(format!("unknown metric `{s}`")))
    }
}

/// Six diagnostics; `None` marks a zero denominator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub specificity: Option<f64>,
    pub fdr: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    MetricsReport {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision,
        recall,
        f1,
        specificity: ratio(cm.tn, cm.tn + cm.fp),
        fdr: ratio(cm.fp, cm.fp + cm.tp),
    }
}

impl MetricsReport {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Accuracy => self.accuracy,
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::F1 => self.f1,
            Metric::Specificity => self.specificity,
            Metric::Fdr => self.fdr,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    CnnFix,
    CnnRand,
    Svm,
    Nb,
    Knn,
    Lda,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::CnnFix, Method::CnnRand, Method::Svm, Method::Nb, Method::Knn, Method::Lda];

    pub fn name(self) -> &'static str {
        match self {
            Method::CnnFix => "cnn_fix",
            Method::CnnRand => "cnn_rand",
            Method::Svm => "svm",
            Method::Nb => "nb",
            Method::Knn => "knn",
            Method::Lda => "lda",
        }
    }

    pub fn is_cnn(self) -> bool {
        matches!(self, Method::CnnFix | Method::CnnRand)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            Error::arg(format!("unknown method `{s}` (expected one of cnn_fix, cnn_rand, svm, nb, knn, lda)"))
        })
    }
}

/// Everything a benchmark run needs besides the corpus and the method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub repetitions: usize,
    pub master_seed: u64,
    pub train_fraction: f64,
    pub balance: BalanceMode,
    pub stopwords: StopwordList,
    pub max_sparsity: f64,
    pub nb: NbKind,
    pub knn: KnnParams,
    pub svm: SvmParams,
    pub architecture: Architecture,
    pub embed_dim: usize,
    /// 0 means "longest training document".
    pub max_len: usize,
    /// `seed` is ignored; each repetition derives its own.
    pub training: TrainingConfig,
    pub exec: Exec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            repetitions: 20,
            master_seed: 0,
            train_fraction: 0.8,
            balance: BalanceMode::Strict,
            stopwords: StopwordList::english(),
            max_sparsity: 0.99,
            nb: NbKind::Gaussian,
            knn: KnnParams::default(),
            svm: SvmParams::default(),
            architecture: Architecture::default(),
            embed_dim: 300,
            max_len: 0,
            training: TrainingConfig::default(),
            exec: Exec::Parallel,
        }
    }
}

/// Seed of repetition `r`; depends only on the master seed, so every
/// method sees the same subsample and split.
pub fn repetition_seed(master: u64, repetition: usize) -> u64 {
    derive_seed(derive_seed(master, streams::REPETITION), repetition as u64)
}

/// The held-out predictions of one repetition.
#[derive(Clone, Debug, PartialEq)]
pub struct RepetitionOutcome {
    pub test_ids: Vec<String>,
    pub truth: Vec<Label>,
    pub predictions: Vec<Label>,
    pub confusion: ConfusionMatrix,
    pub report: MetricsReport,
}

/// Train-fitted bag-of-words features for both sides of a split.
pub fn bow_features(
    train: &[LabeledDocument],
    test: &[LabeledDocument],
    config: &ExperimentConfig,
) -> Result<(BowPipeline, Matrix, Matrix)> {
    let tr: Vec<Vec<String>> = train.iter().map(|d| tokenize(d.text())).collect();
    let te: Vec<Vec<String>> = test.iter().map(|d| tokenize(d.text())).collect();
    let (pipeline, dtm) = BowPipeline::fit(&tr, &config.stopwords, config.max_sparsity, config.exec)?;
    let x_test = pipeline.transform_all(&te, config.exec);
    Ok((pipeline, dtm.to_dense(), x_test))
}

/// Classifier hyperparameters for a bag-of-words method.
pub fn classifier_spec(method: Method, config: &ExperimentConfig) -> Result<ClassifierSpec> {
    Ok(match method {
        Method::Nb => ClassifierSpec::NaiveBayes { variant: config.nb },
        Method::Knn => ClassifierSpec::Knn(config.knn.clone()),
        Method::Lda => ClassifierSpec::Lda,
        Method::Svm => ClassifierSpec::Svm(config.svm.clone()),
        Method::CnnFix | Method::CnnRand => return Err(Error::arg(format!("{method} is not a bag-of-words method"))),
    })
}

/// Fits the feature pipeline and a bag-of-words classifier on `train`.
pub fn fit_bow(method: Method, train: &[LabeledDocument], config: &ExperimentConfig) -> Result<SavedClassifier> {
    let spec = classifier_spec(method, config)?;
    let (pipeline, x_train, _) = bow_features(train, &[], config)?;
    let y: Vec<Label> = train.iter().map(LabeledDocument::label).collect();
    Ok(SavedClassifier::new(pipeline, spec.fit(&x_train, &y)?))
}

/// Tokenizes and encodes texts against a trained network's vocabulary.
pub fn cnn_encode<S: AsRef<str>>(vocab: &Vocabulary, max_len: usize, texts: &[S]) -> Vec<EncodedDocument> {
    texts.iter().map(|t| encode_and_pad(&tokenize(t.as_ref()), vocab, max_len)).collect()
}

/// Builds the vocabulary and embedding table from `train` and trains a
/// network. `vectors` is required for [`Method::CnnFix`].
pub fn fit_cnn(
    method: Method,
    train_docs: &[LabeledDocument],
    config: &ExperimentConfig,
    vectors: Option<&PretrainedVectors>,
    seed: u64,
) -> Result<(CnnModelFile, Vec<f64>)> {
    if !method.is_cnn() {
        return Err(Error::arg(format!("{method} is not a CNN method")));
    }
    let tr: Vec<Vec<String>> = train_docs.iter().map(|d| tokenize(d.text())).collect();
    let vocab = Vocabulary::build(&tr)?;
    let min_len = config.architecture.heights.iter().copied().max().unwrap_or(1);
    let max_len = if config.max_len == 0 { corpus_max_len(&tr).max(min_len) } else { config.max_len };
    let enc_train: Vec<EncodedDocument> = tr.iter().map(|t| encode_and_pad(t, &vocab, max_len)).collect();
    let mut rng = SeededRng::substream(seed, streams::EMBEDDING_INIT);
    let table = match method {
        Method::CnnRand => random_table(&vocab, config.embed_dim, &mut rng)?,
        _ => vectors.ok_or_else(|| Error::Config("cnn_fix needs pretrained word vectors".into()))?.table(
            &vocab,
            config.embed_dim,
            &mut rng,
        )?,
    };
    let labels: Vec<Label> = train_docs.iter().map(LabeledDocument::label).collect();
    let training = TrainingConfig { seed, ..config.training.clone() };
    let outcome = train(&enc_train, &labels, table, &config.architecture, &training, config.exec)?;
    Ok((CnnModelFile { params: outcome.params, vocabulary: vocab, training }, outcome.epoch_losses))
}

/// The balanced subsample and split used by repetition `repetition`.
pub fn repetition_split(
    corpus: &[LabeledDocument],
    config: &ExperimentConfig,
    repetition: usize,
) -> Result<CorpusSplit> {
    let seed = repetition_seed(config.master_seed, repetition);
    let balanced = balanced_subsample_with(corpus, seed, config.balance)?;
    split(&balanced, config.train_fraction, seed)
}

/// Seed handed to the method in repetition `repetition`.
pub fn method_seed(config: &ExperimentConfig, repetition: usize) -> u64 {
    derive_seed(repetition_seed(config.master_seed, repetition), streams::METHOD)
}

/// One repetition: subsample, split, fit on the training side, score the
/// held-out side.
pub fn run_repetition(
    method: Method,
    corpus: &[LabeledDocument],
    config: &ExperimentConfig,
    vectors: Option<&PretrainedVectors>,
    repetition: usize,
) -> Result<RepetitionOutcome> {
    let parts = repetition_split(corpus, config, repetition)?;
    let seed = method_seed(config, repetition);
    let predictions = if method.is_cnn() {
        let (model, _) = fit_cnn(method, &parts.train, config, vectors, seed)?;
        let texts: Vec<&str> = parts.test.iter().map(LabeledDocument::text).collect();
        let enc = cnn_encode(&model.vocabulary, model.params.max_len, &texts);
        predict_batch(&model.params, &enc, config.exec)?.into_iter().map(|p| p.label).collect()
    } else {
        let (_, x_train, x_test) = bow_features(&parts.train, &parts.test, config)?;
        let y: Vec<Label> = parts.train.iter().map(LabeledDocument::label).collect();
        let model = classifier_spec(method, config)?.fit(&x_train, &y)?;
        model.predict(&x_test, config.exec)?
    };
    let truth: Vec<Label> = parts.test.iter().map(LabeledDocument::label).collect();
    let cm = confusion(&predictions, &truth)?;
    Ok(RepetitionOutcome {
        test_ids: parts.test.iter().map(|d| d.id().to_owned()).collect(),
        truth,
        predictions,
        confusion: cm,
        report: metrics(&cm),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Repetitions in which the metric was defined.
    pub defined: usize,
}

pub fn summarize(values: &[Option<f64>]) -> MetricSummary {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    MetricSummary { mean: mean(&defined), std: sample_std(&defined), defined: defined.len() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub method: Method,
    pub confusions: Vec<ConfusionMatrix>,
    pub reports: Vec<MetricsReport>,
}

impl ExperimentResult {
    pub fn summary(&self, m: Metric) -> MetricSummary {
        summarize(&self.reports.iter().map(|r| r.get(m)).collect::<Vec<_>>())
    }
}

pub fn run_experiments(
    method: Method,
    corpus: &[LabeledDocument],
    config: &ExperimentConfig,
    vectors: Option<&PretrainedVectors>,
) -> Result<ExperimentResult> {
    if config.repetitions == 0 {
        return Err(Error::arg("at least one repetition is required"));
    }
    let outcomes = try_map_range(config.exec, config.repetitions, |r| {
        log::info!("{method}: repetition {}/{}", r + 1, config.repetitions);
        run_repetition(method, corpus, config, vectors, r)
            .map_err(|e| Error::Repetition { repetition: r, source: Box::new(e) })
    })?;
    Ok(ExperimentResult {
        method,
        confusions: outcomes.iter().map(|o| o.confusion).collect(),
        reports: outcomes.iter().map(|o| o.report).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_corpus, Schema};
    use proptest::prelude::*;

    fn micro() -> Vec<LabeledDocument> {
        parse_corpus(crate::MICRO_CORPUS.as_bytes(), &Schema::default()).unwrap()
    }

    #[test]
    fn confusion_examples() {
        use Label::{NonToxic as N, Toxic as T};
        let cm = confusion(&[T, T, N, N], &[T, T, N, N]).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 2, fn_: 0, tn: 2, fp: 0 });
        let cm = confusion(&[T, T], &[T, N]).unwrap();
        assert_eq!((cm.tp, cm.fp), (1, 1));
        assert!(confusion(&[T], &[T, N]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn confusion_matches_pairwise_tally() {
        let mut rng = SeededRng::new(11);
        let preds: Vec<Label> = (0..1000).map(|_| Label::from_index(rng.below(2))).collect();
        let truth: Vec<Label> = (0..1000).map(|_| Label::from_index(rng.below(2))).collect();
        let cm = confusion(&preds, &truth).unwrap();
        let count =
            |p: usize, t: usize| preds.iter().zip(&truth).filter(|(a, b)| a.index() == p && b.index() == t).count();
        assert_eq!(cm, ConfusionMatrix { tp: count(1, 1), fn_: count(0, 1), tn: count(0, 0), fp: count(1, 0) });
        assert_eq!(cm.total(), 1000);
    }

    #[test]
    fn metric_formulas() {
        let r = metrics(&ConfusionMatrix { tp: 45, fp: 5, fn_: 10, tn: 40 });
        let close = |v: Option<f64>, e: f64| (v.unwrap() - e).abs() < 5e-5;
        assert!(close(r.precision, 0.9));
        assert!(close(r.recall, 0.8182));
        assert!(close(r.accuracy, 0.85));
        assert!(close(r.specificity, 0.8889));
        assert!(close(r.fdr, 0.1));
        assert!(close(r.f1, 0.8571));
    }

    #[test]
    fn zero_denominators_are_undefined() {
        let r = metrics(&ConfusionMatrix { tp: 0, fp: 0, fn_: 3, tn: 2 });
        assert_eq!((r.precision, r.fdr, r.f1), (None, None, None));
        assert_eq!(r.recall, Some(0.0));
        let r = metrics(&ConfusionMatrix { tp: 2, fp: 0, fn_: 0, tn: 0 });
        assert_eq!(r.specificity, None);
        assert_eq!(r.accuracy, Some(1.0));
    }

    proptest! {
        #[test]
        fn fdr_complements_precision(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50, tn in 0usize..50) {
            prop_assume!(tp + fp + fn_ + tn > 0);
            let cm = ConfusionMatrix { tp, fp, fn_, tn };
            let r = metrics(&cm);
            if let (Some(p), Some(f)) = (r.precision, r.fdr) {
                prop_assert!((p + f - 1.0).abs() < 1e-12);
            }
            prop_assert_eq!(r.accuracy.unwrap(), (tp + tn) as f64 / cm.total() as f64);
        }
    }

    #[test]
    fn summary_uses_sample_std() {
        let s = summarize(&[Some(0.9), Some(0.91), None, Some(0.92)]);
        assert!((s.mean.unwrap() - 0.91).abs() < 1e-12);
        assert!((s.std.unwrap() - 0.01).abs() < 1e-12);
        assert_eq!(s.defined, 3);
        assert_eq!(summarize(&[None]).mean, None);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("cnn".parse::<Method>().is_err());
    }

    fn quick_config(reps: usize) -> ExperimentConfig {
        ExperimentConfig { repetitions: reps, master_seed: 3, max_sparsity: 0.98, ..ExperimentConfig::default() }
    }

    #[test]
    fn repetitions_are_counted_and_reproducible() {
        let docs = micro();
        let config = quick_config(4);
        for method in [Method::Nb, Method::Knn, Method::Lda, Method::Svm] {
            let a = run_experiments(method, &docs, &config, None).unwrap();
            assert_eq!(a.reports.len(), 4);
            let b =
                run_experiments(method, &docs, &ExperimentConfig { exec: Exec::Sequential, ..config.clone() }, None)
                    .unwrap();
            assert_eq!(a, b);
            for (cm, r) in a.confusions.iter().zip(&a.reports) {
                assert_eq!(cm.total(), 32);
                assert_eq!(r.accuracy.unwrap(), (cm.tp + cm.tn) as f64 / cm.total() as f64);
            }
        }
    }

    #[test]
    fn every_method_sees_the_same_split() {
        let docs = micro();
        let config = quick_config(1);
        let a = run_repetition(Method::Nb, &docs, &config, None, 0).unwrap();
        let b = run_repetition(Method::Lda, &docs, &config, None, 0).unwrap();
        assert_eq!(a.test_ids, b.test_ids);
        let c = run_repetition(Method::Nb, &docs, &config, None, 1).unwrap();
        assert_ne!(a.test_ids, c.test_ids);
    }

    #[test]
    fn cnn_fix_without_vectors_is_a_config_error() {
        let docs = micro();
        let r = run_experiments(Method::CnnFix, &docs, &quick_config(1), None);
        match r {
            Err(Error::Repetition { repetition: 0, source }) => assert!(matches!(*source, Error::Config(_))),
            other => panic!("{other:?}"),
        }
    }
}
