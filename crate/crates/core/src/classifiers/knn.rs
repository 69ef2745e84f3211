use serde::{Deserialize, Serialize};

use super::{check_width, class_rows, Classifier};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::numerics::{dot, norm, squared_distance, Matrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    Euclidean,
    /// `1 − cos(a, b)`; a zero vector is at distance 1 from everything.
    Cosine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub distance: Distance,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 7, distance: Distance::Euclidean }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub params: KnnParams,
    pub train: Matrix,
    pub labels: Vec<Label>,
}

impl KnnModel {
    pub fn fit(x: &Matrix, y: &[Label], params: &KnnParams) -> Result<Self> {
        class_rows(x, y, 1)?;
        if params.k == 0 || params.k.is_multiple_of(2) {
            return Err(Error::arg(format!("k must be a positive odd number, got {}", params.k)));
        }
        if params.k > x.rows() {
            return Err(Error::arg(format!("k = {} exceeds the {} training rows", params.k, x.rows())));
        }
        Ok(Self { params: params.clone(), train: x.clone(), labels: y.to_vec() })
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.params.distance {
            Distance::Euclidean => squared_distance(a, b),
            Distance::Cosine => {
                let d = norm(a) * norm(b);
                if d == 0.0 {
                    1.0
                } else {
                    1.0 - dot(a, b) / d
                }
            }
        }
    }

    /// Training indices of the `k` nearest rows, nearest first; equal
    /// distances go to the lower index.
    pub fn neighbors(&self, x: &[f64]) -> Result<Vec<usize>> {
        check_width(self.train.cols(), x)?;
        let mut d: Vec<(f64, usize)> =
            self.train.iter_rows().enumerate().map(|(i, r)| (self.distance(r, x), i)).collect();
        let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        let k = self.params.k;
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, by);
            d.truncate(k);
        }
        d.sort_by(by);
        Ok(d.into_iter().map(|(_, i)| i).collect())
    }
}

impl Classifier for KnnModel {
    fn n_features(&self) -> usize {
        self.train.cols()
    }

    fn predict_one(&self, x: &[f64]) -> Result<Label> {
        let toxic = self.neighbors(x)?.iter().filter(|&&i| self.labels[i] == Label::Toxic).count();
        Ok(if 2 * toxic > self.params.k { Label::Toxic } else { Label::NonToxic })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    fn random_set(n: usize, p: usize, rng: &mut SeededRng) -> (Matrix, Vec<Label>) {
        let x = Matrix::from_vec(n, p, (0..n * p).map(|_| rng.uniform_in(-1.0, 1.0)).collect()).unwrap();
        let y = (0..n).map(|_| Label::from_index(rng.below(2))).collect();
        (x, y)
    }

    #[test]
    fn unanimous_neighbors_decide() {
        let mut rows = vec![[10.0, 10.0]; 7];
        rows.extend([[0.0, 0.0]; 8]);
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<Label> = (0..15).map(|i| if i < 7 { Label::Toxic } else { Label::NonToxic }).collect();
        let m = KnnModel::fit(&x, &y, &KnnParams::default()).unwrap();
        assert_eq!(m.predict_one(&[9.0, 9.0]).unwrap(), Label::Toxic);
        assert_eq!(m.predict_one(&[1.0, 0.0]).unwrap(), Label::NonToxic);
    }

    #[test]
    fn distance_ties_go_to_lower_index() {
        let x = Matrix::from_rows(&[[1.0], [-1.0], [1.0], [2.0]]).unwrap();
        let y = [Label::NonToxic, Label::Toxic, Label::Toxic, Label::NonToxic];
        let m = KnnModel::fit(&x, &y, &KnnParams { k: 3, distance: Distance::Euclidean }).unwrap();
        assert_eq!(m.neighbors(&[0.0]).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn invalid_k() {
        let (x, y) = random_set(5, 2, &mut SeededRng::new(0));
        for k in [0, 2, 7] {
            let r = KnnModel::fit(&x, &y, &KnnParams { k, ..KnnParams::default() });
            assert!(matches!(r, Err(Error::Argument(_))), "k={k}");
        }
    }

    #[test]
    fn cosine_ignores_scale() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]).unwrap();
        let y = [Label::Toxic, Label::NonToxic, Label::NonToxic];
        let m = KnnModel::fit(&x, &y, &KnnParams { k: 1, distance: Distance::Cosine }).unwrap();
        assert_eq!(m.predict_one(&[100.0, 1.0]).unwrap(), Label::Toxic);
        assert_eq!(m.neighbors(&[0.0, 0.0]).unwrap(), vec![0]);
    }

    #[test]
    fn matches_sort_oracle_on_random_points() {
        let mut rng = SeededRng::new(77);
        let (x, y) = random_set(100, 5, &mut rng);
        let (q, _) = random_set(100, 5, &mut rng);
        let m = KnnModel::fit(&x, &y, &KnnParams::default()).unwrap();
        for query in q.iter_rows() {
            let mut all: Vec<(f64, usize)> = (0..100)
                .map(|i| (x.row(i).iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let votes = all[..7].iter().filter(|(_, i)| y[*i] == Label::Toxic).count();
            let expected = if votes >= 4 { Label::Toxic } else { Label::NonToxic };
            assert_eq!(m.predict_one(query).unwrap(), expected);
        }
    }
}
