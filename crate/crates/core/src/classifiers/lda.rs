use serde::{Deserialize, Serialize};

use super::{check_width, class_rows, Classifier};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::numerics::{cholesky, cholesky_solve, dot, Matrix};

const RIDGE_START: f64 = 1e-6;
const RIDGE_MAX: f64 = 1e-2;

/// Linear discriminant with a pooled, ridge-regularized covariance.
///
/// Only `Σ⁻¹μ_c` and the constant term of each class are kept; the
/// discriminant is `δ_c(x) = xᵀ(Σ⁻¹μ_c) − ½μ_cᵀΣ⁻¹μ_c + ln π_c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub means: [Vec<f64>; 2],
    pub priors: [f64; 2],
    pub weights: [Vec<f64>; 2],
    pub offsets: [f64; 2],
    /// Ridge factor λ that made the covariance positive definite.
    pub ridge: f64,
}

impl LdaModel {
    pub fn fit(x: &Matrix, y: &[Label]) -> Result<Self> {
        let rows = class_rows(x, y, 2)?;
        let p = x.cols();
        let n = y.len();
        let means = rows.each_ref().map(|idx| x.select_rows(idx).column_means());
        let mut cov = Matrix::zeros(p, p);
        let mut d = vec![0.0; p];
        for (i, l) in y.iter().enumerate() {
            for ((dj, xj), mj) in d.iter_mut().zip(x.row(i)).zip(&means[l.index()]) {
                *dj = xj - mj;
            }
            for a in 0..p {
                if d[a] == 0.0 {
                    continue;
                }
                let row = cov.row_mut(a);
                for b in 0..p {
                    row[b] += d[a] * d[b];
                }
            }
        }
        let denom = (n - 2) as f64;
        cov.as_mut_slice().iter_mut().for_each(|v| *v /= denom);

        let scale = match cov.trace() / p as f64 {
            s if s > 0.0 => s,
            _ => 1.0,
        };
        let mut lambda = RIDGE_START;
        let chol = loop {
            let mut reg = cov.clone();
            for j in 0..p {
                reg.set(j, j, reg.get(j, j) + lambda * scale);
            }
            if let Some(l) = cholesky(&reg) {
                break l;
            }
            if lambda >= RIDGE_MAX {
                return Err(Error::Singular { ridge: lambda });
            }
            lambda *= 10.0;
        };
        if lambda > RIDGE_START {
            log::debug!("pooled covariance needed ridge {lambda:e}");
        }
        let priors = [rows[0].len() as f64 / n as f64, rows[1].len() as f64 / n as f64];
        let weights = means.each_ref().map(|m| cholesky_solve(&chol, m));
        let offsets = [0, 1].map(|c| -0.5 * dot(&means[c], &weights[c]) + priors[c].ln());
        Ok(Self { means, priors, weights, offsets, ridge: lambda })
    }

    pub fn discriminants(&self, x: &[f64]) -> Result<[f64; 2]> {
        check_width(self.weights[0].len(), x)?;
        Ok([0, 1].map(|c| dot(x, &self.weights[c]) + self.offsets[c]))
    }
}

impl Classifier for LdaModel {
    fn n_features(&self) -> usize {
        self.weights[0].len()
    }

    fn predict_one(&self, x: &[f64]) -> Result<Label> {
        let d = self.discriminants(x)?;
        Ok(if d[1] > d[0] { Label::Toxic } else { Label::NonToxic })
    }
}
