//! Bag-of-words baselines over dense TF-IDF rows.

mod knn;
mod lda;
mod nb;
mod svm;

pub use knn::{Distance, KnnModel, KnnParams};
pub use lda::LdaModel;
pub use nb::{GaussianNbModel, MultinomialNbModel, NaiveBayesModel, NbKind, VARIANCE_FLOOR};
pub use svm::{Kernel, KernelSpec, SvmModel, SvmParams};

use serde::{Deserialize, Serialize};

use crate::bow::BowPipeline;
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::exec::{try_map_range, Exec};
use crate::numerics::Matrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Shared fit-free contract: every fitted model labels a single feature row.
pub trait Classifier: Sync {
    fn n_features(&self) -> usize;

    fn predict_one(&self, x: &[f64]) -> Result<Label>;

    fn predict(&self, x: &Matrix, exec: Exec) -> Result<Vec<Label>> {
        if x.cols() != self.n_features() {
            return Err(Error::dim(format!("model expects {} features, got {}", self.n_features(), x.cols())));
        }
        try_map_range(exec, x.rows(), |i| self.predict_one(x.row(i)))
    }
}

/// Hyperparameters of one baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    NaiveBayes { variant: NbKind },
    Knn(KnnParams),
    Lda,
    Svm(SvmParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierModel {
    NaiveBayes(NaiveBayesModel),
    Knn(KnnModel),
    Lda(LdaModel),
    Svm(SvmModel),
}

impl ClassifierSpec {
    pub fn fit(&self, x: &Matrix, y: &[Label]) -> Result<ClassifierModel> {
        Ok(match self {
            ClassifierSpec::NaiveBayes { variant } => {
                ClassifierModel::NaiveBayes(NaiveBayesModel::fit(x, y, *variant)?)
            }
            ClassifierSpec::Knn(p) => ClassifierModel::Knn(KnnModel::fit(x, y, p)?),
            ClassifierSpec::Lda => ClassifierModel::Lda(LdaModel::fit(x, y)?),
            ClassifierSpec::Svm(p) => ClassifierModel::Svm(SvmModel::fit(x, y, p)?),
        })
    }
}

impl ClassifierModel {
    fn inner(&self) -> &dyn Classifier {
        match self {
            ClassifierModel::NaiveBayes(m) => m,
            ClassifierModel::Knn(m) => m,
            ClassifierModel::Lda(m) => m,
            ClassifierModel::Svm(m) => m,
        }
    }
}

impl Classifier for ClassifierModel {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn predict_one(&self, x: &[f64]) -> Result<Label> {
        self.inner().predict_one(x)
    }
}

/// A fitted baseline together with the feature pipeline it was trained on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedClassifier {
    pub format_version: u32,
    pub pipeline: BowPipeline,
    pub model: ClassifierModel,
}

impl SavedClassifier {
    pub fn new(pipeline: BowPipeline, model: ClassifierModel) -> Self {
        Self { format_version: MODEL_FORMAT_VERSION, pipeline, model }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut s: SavedClassifier = serde_json::from_str(text)?;
        if s.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Corruption(format!("unsupported model format version {}", s.format_version)));
        }
        if s.pipeline.n_features() != s.model.n_features() {
            return Err(Error::Corruption("pipeline and model disagree on the feature count".into()));
        }
        s.pipeline.rebuild_index();
        Ok(s)
    }
}

/// Per-class row indices, after checking shapes and that each class has at
/// least `min_per_class` rows.
pub(crate) fn class_rows(x: &Matrix, y: &[Label], min_per_class: usize) -> Result<[Vec<usize>; 2]> {
    if x.rows() != y.len() {
        return Err(Error::dim(format!("{} rows but {} labels", x.rows(), y.len())));
    }
    if x.cols() == 0 {
        return Err(Error::dim("feature matrix has no columns"));
    }
    let mut rows = [Vec::new(), Vec::new()];
    for (i, l) in y.iter().enumerate() {
        rows[l.index()].push(i);
    }
    for (c, r) in rows.iter().enumerate() {
        if r.len() < min_per_class {
            return Err(Error::DegenerateFit(format!(
                "class {} has {} training rows, need at least {min_per_class}",
                Label::from_index(c),
                r.len()
            )));
        }
    }
    Ok(rows)
}

pub(crate) fn check_width(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::dim(format!("model expects {expected} features, got {}", x.len())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    fn blobs(n: usize, seed: u64) -> (Matrix, Vec<Label>) {
        let mut rng = SeededRng::new(seed);
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let l = Label::from_index(i % 2);
            let c = if l == Label::Toxic { 1.0 } else { -1.0 };
            data.extend([c + 0.5 * rng.normal(), c + 0.5 * rng.normal(), rng.uniform()]);
            y.push(l);
        }
        (Matrix::from_vec(n, 3, data).unwrap(), y)
    }

    fn specs() -> Vec<ClassifierSpec> {
        vec![
            ClassifierSpec::NaiveBayes { variant: NbKind::Gaussian },
            ClassifierSpec::Knn(KnnParams::default()),
            ClassifierSpec::Lda,
            ClassifierSpec::Svm(SvmParams::default()),
        ]
    }

    #[test]
    fn refitting_is_deterministic_and_modes_agree() {
        let (x, y) = blobs(60, 1);
        let (q, _) = blobs(30, 2);
        for spec in specs() {
            let a = spec.fit(&x, &y).unwrap();
            let b = spec.fit(&x, &y).unwrap();
            assert_eq!(a, b);
            let p = a.predict(&q, Exec::Parallel).unwrap();
            assert_eq!(p, b.predict(&q, Exec::Sequential).unwrap());
            let acc = a.predict(&x, Exec::Sequential).unwrap().iter().zip(&y).filter(|(p, t)| p == t).count();
            assert!(acc >= 50, "{spec:?}: {acc}/60");
        }
    }

    #[test]
    fn single_class_training_is_degenerate() {
        let (x, _) = blobs(10, 3);
        let y = vec![Label::Toxic; 10];
        for spec in specs() {
            assert!(matches!(spec.fit(&x, &y), Err(Error::DegenerateFit(_))), "{spec:?}");
        }
    }

    #[test]
    fn saved_model_round_trip() {
        let (x, y) = blobs(20, 4);
        let pipeline = BowPipeline::new(vec!["a".into(), "b".into(), "c".into()], vec![1.0, 2.0, 3.0]).unwrap();
        for spec in specs() {
            let saved = SavedClassifier::new(pipeline.clone(), spec.fit(&x, &y).unwrap());
            let back = SavedClassifier::from_json(&saved.to_json().unwrap()).unwrap();
            assert_eq!(back, saved);
            assert_eq!(back.pipeline.transform(&["b".into()]), vec![0.0, 2.0, 0.0]);
        }
        let mut bad = SavedClassifier::new(pipeline, specs()[2].fit(&x, &y).unwrap());
        bad.format_version = 99;
        assert!(matches!(SavedClassifier::from_json(&bad.to_json().unwrap()), Err(Error::Corruption(_))));
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let (x, y) = blobs(20, 5);
        let m = specs()[0].fit(&x, &y).unwrap();
        assert!(matches!(m.predict(&Matrix::zeros(2, 4), Exec::Sequential), Err(Error::Dimension(_))));
        assert!(matches!(m.predict_one(&[0.0]), Err(Error::Dimension(_))));
    }
}
