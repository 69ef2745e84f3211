//! Deterministic numerical substrate shared by every model: dense kernels,
//! the seeded generator, softmax and a central-difference gradient checker.

mod matrix;
mod rng;

pub use matrix::{axpy, cholesky, cholesky_solve, dot, dot4, norm, squared_distance, Matrix};
pub use rng::{derive_seed, streams, SeededRng};

use crate::error::{Error, Result};

/// Numerically stable softmax (max-subtracted).
/// 64-bit FNV-1a.
pub fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes.into_iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn softmax(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "softmax of empty vector");
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Central-difference gradient of `f` at `x`.
pub fn finite_diff_gradient<F>(mut f: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(eps > 0.0) {
        return Err(Error::arg(format!("eps must be positive, got {eps}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let hi = f(&probe);
        probe[i] = x[i] - eps;
        let lo = f(&probe);
        probe[i] = x[i];
        if !hi.is_finite() || !lo.is_finite() {
            return Err(Error::Numeric(format!("non-finite objective around coordinate {i}")));
        }
        grad.push((hi - lo) / (2.0 * eps));
    }
    Ok(grad)
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Sample standard deviation (divisor n − 1); `None` below two values.
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_basics() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let p = softmax(&[1000.0, 0.0]);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] >= 0.0 && p[1] < 1e-300);
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(v in prop::collection::vec(-50.0f64..50.0, 1..8), c in -100.0f64..100.0) {
            let a = softmax(&v);
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let b = softmax(&shifted);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(a.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn finite_difference_of_square() {
        let g = finite_diff_gradient(|x| x[0] * x[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-9);
        let z = finite_diff_gradient(|_| 4.2, &[1.0, 2.0, 3.0], 1e-5).unwrap();
        assert_eq!(z, vec![0.0; 3]);
    }

    #[test]
    fn finite_difference_of_random_quadratic() {
        let mut rng = SeededRng::new(17);
        let n = 6;
        let b = Matrix::from_vec(n, n, (0..n * n).map(|_| rng.uniform_in(-1.0, 1.0)).collect()).unwrap();
        // symmetric A so that grad(x'Ax/2) = Ax
        let a = {
            let mut s = b.clone();
            s.axpy(1.0, &b.transpose()).unwrap();
            s
        };
        let x: Vec<f64> = (0..n).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
        let f = |v: &[f64]| 0.5 * dot(v, &a.mat_vec(v).unwrap());
        let numeric = finite_diff_gradient(f, &x, 1e-5).unwrap();
        let analytic = a.mat_vec(&x).unwrap();
        for (n, a) in numeric.iter().zip(&analytic) {
            assert!((n - a).abs() / a.abs().max(1e-12) < 1e-7, "{n} vs {a}");
        }
    }

    #[test]
    fn finite_difference_rejects_non_finite() {
        assert!(matches!(
            finite_diff_gradient(|x| if x[0] > 1.0 { f64::INFINITY } else { x[0] }, &[1.0], 1e-5),
            Err(Error::Numeric(_))
        ));
        assert!(finite_diff_gradient(|x| x[0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn sample_std_hand_values() {
        let xs = [0.9, 0.91, 0.92];
        assert!((mean(&xs).unwrap() - 0.91).abs() < 1e-15);
        assert!((sample_std(&xs).unwrap() - 0.01).abs() < 1e-12);
        assert_eq!(sample_std(&[1.0]), None);
    }
}
