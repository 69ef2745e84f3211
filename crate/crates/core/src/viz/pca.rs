use std::collections::BTreeMap;

use super::{Projection2D, ProjectionMethod};
use crate::error::{Error, Result};
use crate::numerics::{dot, norm, Matrix, SeededRng};

pub const PCA_TOL: f64 = 1e-10;
pub const PCA_MAX_ITER: usize = 10_000;

/// Leading eigenpairs of the sample covariance, largest first.
#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    pub means: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl Pca {
    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        let centred: Vec<f64> = row.iter().zip(&self.means).map(|(x, m)| x - m).collect();
        self.components.iter().map(|c| dot(&centred, c)).collect()
    }
}

fn covariance(x: &Matrix, means: &[f64]) -> Matrix {
    let p = x.cols();
    let mut cov = Matrix::zeros(p, p);
    let mut d = vec![0.0; p];
    for r in x.iter_rows() {
        for ((dj, xj), mj) in d.iter_mut().zip(r).zip(means) {
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
    let denom = (x.rows() - 1) as f64;
    cov.as_mut_slice().iter_mut().for_each(|v| *v /= denom);
    cov
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
}

/// Power iteration with deflation for the top `k` components. Each
/// component's largest-magnitude loading is made positive.
pub fn principal_components(x: &Matrix, k: usize) -> Result<Pca> {
    let (n, p) = x.shape();
    if n < 2 || p < k {
        return Err(Error::dim(format!("need at least 2 rows and {k} columns, got {n}×{p}")));
    }
    let means = x.column_means();
    let mut cov = covariance(x, &means);
    let scale = cov.trace().max(f64::MIN_POSITIVE);
    let mut start_rng = SeededRng::new(0x0005_eed0_f9ca);
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);

    for _ in 0..k {
        let mut v: Vec<f64> = (0..p).map(|_| start_rng.uniform_in(-1.0, 1.0)).collect();
        orthogonalize(&mut v, &components);
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let mut lambda = 0.0;
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..PCA_MAX_ITER {
            let mut w = cov.mat_vec(&v)?;
            orthogonalize(&mut w, &components);
            let wn = norm(&w);
            if wn <= 1e-14 * scale {
                // nothing left in the remaining subspace
                lambda = 0.0;
                converged = true;
                break;
            }
            w.iter_mut().for_each(|x| *x /= wn);
            let next = dot(&w, &cov.mat_vec(&w)?);
            residual = (next - lambda).abs();
            v = w;
            let done = residual <= PCA_TOL * next.abs();
            lambda = next;
            if done {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence { what: "PCA power iteration".into(), residual });
        }
        let pivot = v.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        // deflate
        for a in 0..p {
            for b in 0..p {
                cov.set(a, b, cov.get(a, b) - lambda * v[a] * v[b]);
            }
        }
        eigenvalues.push(lambda.max(0.0));
        components.push(v);
    }
    Ok(Pca { means, components, eigenvalues })
}

pub fn pca_2d(x: &Matrix, labels: Vec<String>) -> Result<Projection2D> {
    if x.rows() < 3 || x.cols() < 2 {
        return Err(Error::dim(format!("PCA needs at least 3 rows and 2 columns, got {}×{}", x.rows(), x.cols())));
    }
    let pca = principal_components(x, 2)?;
    let coords = x.iter_rows().map(|r| {
        let c = pca.project(r);
        [c[0], c[1]]
    });
    let params =
        BTreeMap::from([("eigenvalue_1".into(), pca.eigenvalues[0]), ("eigenvalue_2".into(), pca.eigenvalues[1])]);
    Projection2D::new(coords.collect(), labels, ProjectionMethod::Pca, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{}", i % 2)).collect()
    }

    fn variance(v: impl Iterator<Item = f64> + Clone) -> f64 {
        let n = v.clone().count() as f64;
        let m = v.clone().sum::<f64>() / n;
        v.map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn rank_one_data_has_no_second_component() {
        let x = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [-3.0, -3.0], [0.5, 0.5], [4.0, 4.0]]).unwrap();
        let p = pca_2d(&x, labels(5)).unwrap();
        assert!(variance(p.coords.iter().map(|c| c[1])) < 1e-10);
        assert!(p.params["eigenvalue_2"] < 1e-10);
    }

    #[test]
    fn sign_convention_is_stable() {
        let x = Matrix::from_rows(&[[1.0, 0.1], [-2.0, 0.0], [3.0, -0.2], [0.0, 0.3]]).unwrap();
        let pca = principal_components(&x, 2).unwrap();
        for c in &pca.components {
            let pivot = c.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(pivot > 0.0);
            assert!((norm(c) - 1.0).abs() < 1e-12);
        }
    }

    fn eig3_closed_form(a: &Matrix) -> [f64; 3] {
        // trigonometric solution for the eigenvalues of a symmetric 3×3
        let p1 = a.get(0, 1).powi(2) + a.get(0, 2).powi(2) + a.get(1, 2).powi(2);
        let q = a.trace() / 3.0;
        let p2 = (0..3).map(|i| (a.get(i, i) - q).powi(2)).sum::<f64>() + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let mut b = a.clone();
        for i in 0..3 {
            b.set(i, i, b.get(i, i) - q);
        }
        let b: Vec<f64> = b.as_slice().iter().map(|v| v / p).collect();
        let det = b[0] * (b[4] * b[8] - b[5] * b[7]) - b[1] * (b[3] * b[8] - b[5] * b[6])
            + b[2] * (b[3] * b[7] - b[4] * b[6]);
        let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        [e1, 3.0 * q - e1 - e3, e3]
    }

    #[test]
    fn eigenvalues_match_closed_form() {
        for seed in 0..20 {
            let mut rng = SeededRng::new(seed);
            let mix = [rng.normal(), rng.normal(), rng.normal(), rng.normal()];
            let x = Matrix::from_vec(
                30,
                3,
                (0..30)
                    .flat_map(|_| {
                        let (a, b, c) = (rng.normal() * 3.0, rng.normal(), rng.normal() * 0.3);
                        [a, mix[0] * a + b, mix[1] * b + mix[2] * a + c + mix[3]]
                    })
                    .collect(),
            )
            .unwrap();
            let cov = covariance(&x, &x.column_means());
            let expected = eig3_closed_form(&cov);
            let pca = principal_components(&x, 2).unwrap();
            for i in 0..2 {
                assert!((pca.eigenvalues[i] - expected[i]).abs() < 1e-8 * expected[0].max(1.0), "seed {seed}");
            }
        }
    }

    #[test]
    fn too_small_input_is_rejected() {
        assert!(pca_2d(&Matrix::zeros(2, 3), labels(2)).is_err());
        assert!(pca_2d(&Matrix::zeros(5, 1), labels(5)).is_err());
    }

    proptest! {
        #[test]
        fn translation_invariant_and_ordered(seed in any::<u64>(), shift in prop::collection::vec(-100.0f64..100.0, 4)) {
            let mut rng = SeededRng::new(seed);
            let data: Vec<f64> = (0..40).map(|i| rng.normal() * (1 + i % 4) as f64).collect();
            let x = Matrix::from_vec(10, 4, data.clone()).unwrap();
            let moved = Matrix::from_vec(10, 4, data.iter().enumerate().map(|(i, v)| v + shift[i % 4]).collect()).unwrap();
            let a = pca_2d(&x, labels(10)).unwrap();
            let b = pca_2d(&moved, labels(10)).unwrap();
            for (p, q) in a.coords.iter().zip(&b.coords) {
                prop_assert!((p[0] - q[0]).abs() < 1e-8 && (p[1] - q[1]).abs() < 1e-8);
            }
            let v1 = variance(a.coords.iter().map(|c| c[0]));
            let v2 = variance(a.coords.iter().map(|c| c[1]));
            prop_assert!(v1 + 1e-12 >= v2);
        }
    }
}
