//! Soft-margin SVM trained with sequential minimal optimization.

use serde::{Deserialize, Serialize};

use super::{check_width, class_rows, Classifier};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::numerics::{dot, squared_distance, Matrix};

/// Kernel as requested; `gamma: None` resolves to `1 / n_features` at fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: Option<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => (-gamma * squared_distance(a, b)).exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: KernelSpec,
    /// KKT tolerance.
    pub tol: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, kernel: KernelSpec::Rbf { gamma: None }, tol: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub bias: f64,
    /// Training indices with `α_i > 0`.
    pub support_indices: Vec<usize>,
    pub support_vectors: Matrix,
    /// `α_i · y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub passes: usize,
    pub kkt_residual: f64,
    pub dual_objective: f64,
}

/// KKT violation of one point given `m = y·f(x)`.
pub fn kkt_violation(alpha: f64, c: f64, margin: f64) -> f64 {
    let at_bound = 1e-12 * c.max(1.0);
    if alpha <= at_bound {
        (1.0 - margin).max(0.0)
    } else if alpha >= c - at_bound {
        (margin - 1.0).max(0.0)
    } else {
        (margin - 1.0).abs()
    }
}

/// Dual solver state. `grad[i]` is `(Qα)_i − 1` with `Q_ij = y_i y_j K_ij`.
struct Smo<'a> {
    k: &'a Matrix,
    y: Vec<f64>,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    c: f64,
}

/// Curvature floor for non-positive-definite pairs.
const TAU: f64 = 1e-12;

impl Smo<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    /// α_i may move in the direction that raises `y_i α_i`.
    fn in_up(&self, i: usize) -> bool {
        if self.y[i] > 0.0 {
            self.alpha[i] < self.c
        } else {
            self.alpha[i] > 0.0
        }
    }

    fn in_low(&self, i: usize) -> bool {
        if self.y[i] > 0.0 {
            self.alpha[i] > 0.0
        } else {
            self.alpha[i] < self.c
        }
    }

    /// Maximal violating pair with second-order choice of the second index.
    /// Returns `None` once the gap `m − M` is at most `tol`, together with the
    /// final gap.
    fn select(&self, tol: f64) -> (Option<(usize, usize)>, f64) {
        let n = self.n();
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if self.in_up(t) {
                let v = -self.y[t] * self.grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !self.in_low(t) {
                continue;
            }
            let v = -self.y[t] * self.grad[t];
            gmin = gmin.min(v);
            if i == usize::MAX {
                continue;
            }
            let b = gmax - v;
            if b > 0.0 {
                let a = self.k.get(i, i) + self.k.get(t, t) - 2.0 * self.k.get(i, t);
                let score = -(b * b) / a.max(TAU);
                if score < best {
                    best = score;
                    j = t;
                }
            }
        }
        let gap = (gmax - gmin).max(0.0);
        if i == usize::MAX || j == usize::MAX || gap <= tol {
            (None, gap)
        } else {
            (Some((i, j)), gap)
        }
    }

    /// Optimizes the pair analytically and keeps the gradient current.
    fn update(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (yi, yj) = (self.y[i], self.y[j]);
        let (ai, aj) = (self.alpha[i], self.alpha[j]);
        let quad = (self.k.get(i, i) + self.k.get(j, j) - 2.0 * self.k.get(i, j)).max(TAU);
        let (mut ni, mut nj);
        if yi != yj {
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ni = ai + delta;
            nj = aj + delta;
            if diff > 0.0 {
                if nj < 0.0 {
                    nj = 0.0;
                    ni = diff;
                }
            } else if ni < 0.0 {
                ni = 0.0;
                nj = -diff;
            }
            if diff > 0.0 {
                if ni > c {
                    ni = c;
                    nj = c - diff;
                }
            } else if nj > c {
                nj = c;
                ni = c + diff;
            }
        } else {
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ni = ai - delta;
            nj = aj + delta;
            if sum > c {
                if ni > c {
                    ni = c;
                    nj = sum - c;
                }
            } else if nj < 0.0 {
                nj = 0.0;
                ni = sum;
            }
            if sum > c {
                if nj > c {
                    nj = c;
                    ni = sum - c;
                }
            } else if ni < 0.0 {
                ni = 0.0;
                nj = sum;
            }
        }
        let (di, dj) = (ni - ai, nj - aj);
        let (ri, rj) = (self.k.row(i), self.k.row(j));
        for t in 0..self.n() {
            self.grad[t] += self.y[t] * (yi * ri[t] * di + yj * rj[t] * dj);
        }
        self.alpha[i] = ni;
        self.alpha[j] = nj;
    }

    /// Mean of `−y_i G_i` over free points, else the middle of the feasible
    /// interval.
    fn bias(&self) -> f64 {
        let (mut sum, mut count) = (0.0, 0usize);
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..self.n() {
            let v = -self.y[i] * self.grad[i];
            if self.alpha[i] > 0.0 && self.alpha[i] < self.c {
                sum += v;
                count += 1;
            }
            if self.in_up(i) {
                lb = lb.max(v);
            }
            if self.in_low(i) {
                ub = ub.min(v);
            }
        }
        if count > 0 {
            sum / count as f64
        } else if lb.is_finite() && ub.is_finite() {
            0.5 * (lb + ub)
        } else if lb.is_finite() {
            lb
        } else {
            ub
        }
    }

    fn max_violation(&self, b: f64) -> f64 {
        (0..self.n())
            .map(|i| kkt_violation(self.alpha[i], self.c, self.grad[i] + 1.0 + self.y[i] * b))
            .fold(0.0, f64::max)
    }

    fn dual_objective(&self) -> f64 {
        // W = Σα − ½ αᵀQα = −½ Σ α_i (G_i − 1)
        -0.5 * self.alpha.iter().zip(&self.grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
    }
}

impl SvmModel {
    pub fn fit(x: &Matrix, y: &[Label], params: &SvmParams) -> Result<Self> {
        class_rows(x, y, 1)?;
        if !(params.c > 0.0 && params.c.is_finite()) {
            return Err(Error::arg(format!("C must be positive, got {}", params.c)));
        }
        if !(params.tol > 0.0) {
            return Err(Error::arg(format!("KKT tolerance must be positive, got {}", params.tol)));
        }
        let kernel = match params.kernel {
            KernelSpec::Linear => Kernel::Linear,
            KernelSpec::Rbf { gamma } => {
                let gamma = gamma.unwrap_or(1.0 / x.cols() as f64);
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::arg(format!("rbf gamma must be positive, got {gamma}")));
                }
                Kernel::Rbf { gamma }
            }
        };
        let n = x.rows();
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = kernel.eval(x.row(i), x.row(j));
                k.set(i, j, v);
                k.set(j, i, v);
            }
        }
        let ys: Vec<f64> = y.iter().map(|l| l.sign()).collect();
        let mut smo = Smo { k: &k, y: ys, alpha: vec![0.0; n], grad: vec![-1.0; n], c: params.c };

        // one pass is n pair updates
        let max_updates = 10 * n * n;
        let mut updates = 0;
        loop {
            let (pair, gap) = smo.select(params.tol);
            let Some((i, j)) = pair else { break };
            if updates >= max_updates {
                return Err(Error::Convergence { what: "SMO".into(), residual: gap });
            }
            smo.update(i, j);
            updates += 1;
        }
        let passes = updates.div_ceil(n);
        let bias = smo.bias();

        let support_indices: Vec<usize> = (0..n).filter(|&i| smo.alpha[i] > 0.0).collect();
        let model = Self {
            kernel,
            c: params.c,
            bias,
            support_vectors: x.select_rows(&support_indices),
            dual_coef: support_indices.iter().map(|&i| smo.alpha[i] * smo.y[i]).collect(),
            support_indices,
            passes,
            kkt_residual: smo.max_violation(bias),
            dual_objective: smo.dual_objective(),
        };
        log::debug!(
            "SMO finished after {passes} passes: {} support vectors, KKT residual {:e}",
            model.support_indices.len(),
            model.kkt_residual
        );
        Ok(model)
    }

    /// `f(x) = Σ α_i y_i K(x_i, x) + b`.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        check_width(self.support_vectors.cols(), x)?;
        Ok(self
            .support_vectors
            .iter_rows()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias)
    }
}

impl Classifier for SvmModel {
    fn n_features(&self) -> usize {
        self.support_vectors.cols()
    }

    fn predict_one(&self, x: &[f64]) -> Result<Label> {
        Ok(if self.decision_value(x)? > 0.0 { Label::Toxic } else { Label::NonToxic })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    fn two_point() -> (Matrix, Vec<Label>) {
        (Matrix::from_rows(&[[-1.0], [1.0]]).unwrap(), vec![Label::NonToxic, Label::Toxic])
    }

    #[test]
    fn two_point_problem_is_symmetric() {
        let (x, y) = two_point();
        let p = SvmParams { c: 1e3, kernel: KernelSpec::Linear, ..SvmParams::default() };
        let m = SvmModel::fit(&x, &y, &p).unwrap();
        assert!(m.decision_value(&[0.0]).unwrap().abs() < 1e-6);
        assert_eq!(m.support_indices, vec![0, 1]);
        assert!((m.dual_coef[0] + m.dual_coef[1]).abs() < 1e-12);
        assert!((m.dual_coef[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn dual_objective_matches_grid_search() {
        let (x, y) = two_point();
        let p = SvmParams { c: 1e3, kernel: KernelSpec::Linear, ..SvmParams::default() };
        let m = SvmModel::fit(&x, &y, &p).unwrap();
        // W(a1, a2) = a1 + a2 − ½(a1² + a2² + 2 a1 a2), restricted to a1 = a2
        let mut best = f64::NEG_INFINITY;
        for i in 0..=20000 {
            let a = i as f64 * 1e-4;
            let w = 2.0 * a - 0.5 * (a * a + a * a + 2.0 * a * a);
            best = best.max(w);
        }
        assert!((m.dual_objective - best).abs() < 1e-4);
    }

    #[test]
    fn rbf_separates_xor() {
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        let y = [Label::NonToxic, Label::NonToxic, Label::Toxic, Label::Toxic];
        let rbf =
            SvmModel::fit(&x, &y, &SvmParams { kernel: KernelSpec::Rbf { gamma: Some(1.0) }, ..SvmParams::default() })
                .unwrap();
        for (r, l) in x.iter_rows().zip(&y) {
            assert_eq!(rbf.predict_one(r).unwrap(), *l);
        }
        let lin = SvmModel::fit(&x, &y, &SvmParams { kernel: KernelSpec::Linear, ..SvmParams::default() }).unwrap();
        let right = x.iter_rows().zip(&y).filter(|(r, l)| lin.predict_one(r).unwrap() == **l).count();
        assert!(right < 4);
    }

    #[test]
    fn kkt_and_box_constraints_hold_on_random_sets() {
        for seed in 0..10 {
            let mut rng = SeededRng::new(seed);
            let x = Matrix::from_vec(40, 2, (0..80).map(|_| rng.normal()).collect()).unwrap();
            let y: Vec<Label> = x
                .iter_rows()
                .map(|r| Label::from_index((r[0] + 0.5 * r[1] + 0.7 * rng.normal() > 0.0) as usize))
                .collect();
            for kernel in [KernelSpec::Linear, KernelSpec::Rbf { gamma: None }] {
                let p = SvmParams { kernel, ..SvmParams::default() };
                let m = SvmModel::fit(&x, &y, &p).unwrap();
                let mut alpha = vec![0.0; 40];
                for (&i, &c) in m.support_indices.iter().zip(&m.dual_coef) {
                    alpha[i] = c * y[i].sign();
                }
                assert!(alpha.iter().all(|&a| (0.0..=1.0).contains(&a)));
                assert!(m.dual_coef.iter().sum::<f64>().abs() < 1e-8);
                let worst = (0..40)
                    .map(|i| kkt_violation(alpha[i], 1.0, y[i].sign() * m.decision_value(x.row(i)).unwrap()))
                    .fold(0.0, f64::max);
                assert!(worst <= 1e-3, "seed {seed} {kernel:?}: {worst:e}");
            }
        }
    }

    #[test]
    fn converges_across_c_and_overlap() {
        for seed in 0..60 {
            let mut rng = SeededRng::new(1000 + seed);
            let shift = 0.2 * (seed % 6) as f64;
            let rows: Vec<[f64; 3]> = (0..40)
                .map(|i| {
                    let s = if i % 2 == 0 { shift } else { -shift };
                    [rng.normal() + s, rng.normal() + s, rng.normal()]
                })
                .collect();
            let x = Matrix::from_rows(&rows).unwrap();
            let y: Vec<Label> = (0..40).map(|i| Label::from_index((i % 2 == 0) as usize)).collect();
            for c in [0.1, 1.0, 10.0] {
                for kernel in [KernelSpec::Linear, KernelSpec::Rbf { gamma: Some(0.5) }] {
                    let m = SvmModel::fit(&x, &y, &SvmParams { c, kernel, ..SvmParams::default() }).unwrap();
                    assert!(m.kkt_residual <= 1e-3, "seed {seed} C {c} {kernel:?}: {:e}", m.kkt_residual);
                }
            }
        }
    }

    #[test]
    fn pass_cap_reports_residual() {
        // heavily overlapping classes, near-hard margin: needs ~2300 passes
        let mut rng = SeededRng::new(1012);
        let rows: Vec<[f64; 3]> = (0..40).map(|_| [rng.normal(), rng.normal(), rng.normal()]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<Label> = (0..40).map(|i| Label::from_index((i % 2 == 0) as usize)).collect();
        let p = SvmParams { c: 100.0, kernel: KernelSpec::Linear, ..SvmParams::default() };
        match SvmModel::fit(&x, &y, &p) {
            Err(Error::Convergence { residual, .. }) => assert!(residual > p.tol),
            other => panic!("expected a convergence error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let (x, y) = two_point();
        assert!(SvmModel::fit(&x, &y, &SvmParams { c: 0.0, ..SvmParams::default() }).is_err());
        let bad = SvmParams { kernel: KernelSpec::Rbf { gamma: Some(-1.0) }, ..SvmParams::default() };
        assert!(SvmModel::fit(&x, &y, &bad).is_err());
    }
}
