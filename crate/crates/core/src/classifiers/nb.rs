use serde::{Deserialize, Serialize};

use super::{check_width, class_rows, Classifier};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::numerics::{softmax, Matrix};

pub const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NbKind {
    #[default]
    Gaussian,
    /// Laplace-smoothed multinomial over non-negative features.
    Multinomial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultinomialNbModel {
    pub priors: [f64; 2],
    pub log_probs: [Vec<f64>; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum NaiveBayesModel {
    Gaussian(GaussianNbModel),
    Multinomial(MultinomialNbModel),
}

impl NaiveBayesModel {
    pub fn fit(x: &Matrix, y: &[Label], kind: NbKind) -> Result<Self> {
        let rows = class_rows(x, y, 2)?;
        let n = y.len() as f64;
        let priors = [rows[0].len() as f64 / n, rows[1].len() as f64 / n];
        let p = x.cols();
        match kind {
            NbKind::Gaussian => {
                let stats = rows.each_ref().map(|idx| {
                    let m = x.select_rows(idx);
                    let means = m.column_means();
                    let mut var = vec![0.0; p];
                    for r in m.iter_rows() {
                        for j in 0..p {
                            let d = r[j] - means[j];
                            var[j] += d * d;
                        }
                    }
                    let k = idx.len() as f64;
                    var.iter_mut().for_each(|v| *v = (*v / k).max(VARIANCE_FLOOR));
                    (means, var)
                });
                let [(m0, v0), (m1, v1)] = stats;
                Ok(Self::Gaussian(GaussianNbModel { priors, means: [m0, m1], variances: [v0, v1] }))
            }
            NbKind::Multinomial => {
                if x.as_slice().iter().any(|&v| v < 0.0) {
                    return Err(Error::arg("multinomial naive Bayes needs non-negative features"));
                }
                let log_probs = rows.each_ref().map(|idx| {
                    let mut totals = vec![1.0; p];
                    for &i in idx {
                        for (t, v) in totals.iter_mut().zip(x.row(i)) {
                            *t += v;
                        }
                    }
                    let sum: f64 = totals.iter().sum();
                    totals.iter().map(|t| (t / sum).ln()).collect()
                });
                Ok(Self::Multinomial(MultinomialNbModel { priors, log_probs }))
            }
        }
    }

    /// Unnormalized log posterior of each class.
    pub fn log_joint(&self, x: &[f64]) -> Result<[f64; 2]> {
        check_width(self.n_features(), x)?;
        Ok(match self {
            Self::Gaussian(m) => [0, 1].map(|c| {
                let mut s = m.priors[c].ln();
                for ((&xj, &mu), &var) in x.iter().zip(&m.means[c]).zip(&m.variances[c]) {
                    let d = xj - mu;
                    s -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var);
                }
                s
            }),
            Self::Multinomial(m) => {
                [0, 1].map(|c| m.priors[c].ln() + x.iter().zip(&m.log_probs[c]).map(|(a, b)| a * b).sum::<f64>())
            }
        })
    }

    /// Class posteriors `[P(non_toxic | x), P(toxic | x)]`.
    pub fn posterior(&self, x: &[f64]) -> Result<[f64; 2]> {
        let p = softmax(&self.log_joint(x)?);
        Ok([p[0], p[1]])
    }
}

impl Classifier for NaiveBayesModel {
    fn n_features(&self) -> usize {
        match self {
            Self::Gaussian(m) => m.means[0].len(),
            Self::Multinomial(m) => m.log_probs[0].len(),
        }
    }

    fn predict_one(&self, x: &[f64]) -> Result<Label> {
        let p = self.posterior(x)?;
        Ok(if p[1] > p[0] { Label::Toxic } else { Label::NonToxic })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_d(points: &[(f64, Label)]) -> (Matrix, Vec<Label>) {
        let x = Matrix::from_vec(points.len(), 1, points.iter().map(|p| p.0).collect()).unwrap();
        (x, points.iter().map(|p| p.1).collect())
    }

    #[test]
    fn symmetric_classes_split_evenly_at_origin() {
        let (x, y) =
            one_d(&[(-1.5, Label::NonToxic), (-0.5, Label::NonToxic), (0.5, Label::Toxic), (1.5, Label::Toxic)]);
        let m = NaiveBayesModel::fit(&x, &y, NbKind::Gaussian).unwrap();
        let p = m.posterior(&[0.0]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn four_point_closed_form() {
        // class means 1 and 4, both variances 1, equal priors
        let (x, y) = one_d(&[(0.0, Label::NonToxic), (2.0, Label::NonToxic), (3.0, Label::Toxic), (5.0, Label::Toxic)]);
        let m = NaiveBayesModel::fit(&x, &y, NbKind::Gaussian).unwrap();
        let NaiveBayesModel::Gaussian(g) = &m else { unreachable!() };
        assert_eq!(g.means, [vec![1.0], vec![4.0]]);
        assert_eq!(g.variances, [vec![1.0], vec![1.0]]);
        for t in [-1.0, 0.0, 2.0, 2.5, 3.7, 8.0] {
            let expected = 1.0 / (1.0 + (((t - 4.0f64).powi(2) - (t - 1.0f64).powi(2)) / 2.0).exp());
            assert!((m.posterior(&[t]).unwrap()[1] - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_feature_uses_variance_floor() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [1.0, 5.0], [1.0, 6.0]]).unwrap();
        let y = [Label::NonToxic, Label::NonToxic, Label::Toxic, Label::Toxic];
        let m = NaiveBayesModel::fit(&x, &y, NbKind::Gaussian).unwrap();
        let NaiveBayesModel::Gaussian(g) = &m else { unreachable!() };
        assert_eq!(g.variances[0][0], VARIANCE_FLOOR);
        assert_eq!(m.predict_one(&[1.0, 5.5]).unwrap(), Label::Toxic);
    }

    #[test]
    fn multinomial_prefers_the_class_that_uses_the_word() {
        let x = Matrix::from_rows(&[[3.0, 0.0], [2.0, 1.0], [0.0, 4.0], [1.0, 3.0]]).unwrap();
        let y = [Label::NonToxic, Label::NonToxic, Label::Toxic, Label::Toxic];
        let m = NaiveBayesModel::fit(&x, &y, NbKind::Multinomial).unwrap();
        assert_eq!(m.predict_one(&[0.0, 2.0]).unwrap(), Label::Toxic);
        assert_eq!(m.predict_one(&[2.0, 0.0]).unwrap(), Label::NonToxic);
        let neg = Matrix::from_rows(&[[-1.0], [0.0], [1.0], [2.0]]).unwrap();
        assert!(NaiveBayesModel::fit(&neg, &y, NbKind::Multinomial).is_err());
    }

    #[test]
    fn one_row_class_is_degenerate() {
        let (x, y) = one_d(&[(0.0, Label::NonToxic), (1.0, Label::NonToxic), (3.0, Label::Toxic)]);
        assert!(matches!(NaiveBayesModel::fit(&x, &y, NbKind::Gaussian), Err(Error::DegenerateFit(_))));
    }

    proptest! {
        #[test]
        fn posteriors_sum_to_one(pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 4..20), q in (-50.0f64..50.0, -50.0f64..50.0)) {
            let x = Matrix::from_vec(pts.len(), 2, pts.iter().flat_map(|p| [p.0, p.1]).collect()).unwrap();
            let y: Vec<Label> = (0..pts.len()).map(|i| Label::from_index(i % 2)).collect();
            let m = NaiveBayesModel::fit(&x, &y, NbKind::Gaussian).unwrap();
            let p = m.posterior(&[q.0, q.1]).unwrap();
            prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }

        #[test]
        fn class_means_are_arithmetic_means(vals in prop::collection::vec(-10.0f64..10.0, 4..30)) {
            let x = Matrix::from_vec(vals.len(), 1, vals.clone()).unwrap();
            let y: Vec<Label> = (0..vals.len()).map(|i| Label::from_index(i % 2)).collect();
            let NaiveBayesModel::Gaussian(g) = NaiveBayesModel::fit(&x, &y, NbKind::Gaussian).unwrap() else { unreachable!() };
            for c in 0..2 {
                let own: Vec<f64> = vals.iter().enumerate().filter(|(i, _)| i % 2 == c).map(|(_, &v)| v).collect();
                let mean = own.iter().sum::<f64>() / own.len() as f64;
                prop_assert!((g.means[c][0] - mean).abs() < 1e-12);
            }
        }
    }
}
