//! Exact t-SNE.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Projection2D, ProjectionMethod};
use crate::error::{Error, Result};
use crate::exec::{map_range, try_map_range, Exec};
use crate::numerics::{squared_distance, streams, Matrix, SeededRng};

const BISECTION_STEPS: usize = 50;
const ENTROPY_TOL: f64 = 1e-5;
const PERPLEXITY_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub init_std: f64,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            seed: 0,
            learning_rate: 200.0,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            init_std: 1e-4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TsneOutput {
    pub projection: Projection2D,
    /// `(iteration, KL(P‖Q))` every 50 iterations and at the end.
    pub kl_trace: Vec<(usize, f64)>,
    pub perplexity: f64,
}

pub fn pairwise_sq_distances(x: &Matrix, exec: Exec) -> Matrix {
    let n = x.rows();
    let rows = map_range(exec, n, |i| (0..n).map(|j| squared_distance(x.row(i), x.row(j))).collect::<Vec<_>>());
    Matrix::from_vec(n, n, rows.concat()).expect("finite distances")
}

/// Perplexity `exp(H)` (H in nats) of a probability row, skipping the diagonal entry `skip`.
pub fn row_perplexity(row: &[f64], skip: usize) -> f64 {
    let h: f64 = row.iter().enumerate().filter(|&(j, &p)| j != skip && p > 0.0).map(|(_, &p)| -p * p.ln()).sum();
    h.exp()
}

/// `p_{j|i} ∝ exp(−β_i (d_ij − min_j d_ij))` for one point, with the entropy
/// in nats.
fn gaussian_row(d: &[f64], i: usize, beta: f64, dmin: f64, out: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    for (j, (o, &dj)) in out.iter_mut().zip(d).enumerate() {
        *o = if j == i { 0.0 } else { (-beta * (dj - dmin)).exp() };
        sum += *o;
    }
    let mut h = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        *o /= sum;
        if j != i && *o > 0.0 {
            h -= *o * o.ln();
        }
    }
    h
}

fn calibrate_row(d: &[f64], i: usize, target: f64) -> Result<Vec<f64>> {
    let n = d.len();
    let mut out = vec![0.0; n];
    if n == 1 {
        return Ok(out);
    }
    let others = || d.iter().enumerate().filter(move |&(j, _)| j != i).map(|(_, &v)| v);
    let dmin = others().fold(f64::INFINITY, f64::min);
    let spread: f64 = others().map(|v| v - dmin).sum::<f64>() / (n - 1) as f64;
    let log_target = target.ln();
    let mut beta = if spread > 0.0 { 1.0 / spread } else { 1.0 };
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut h = gaussian_row(d, i, beta, dmin, &mut out);
    for _ in 0..BISECTION_STEPS {
        let diff = h - log_target;
        if diff.abs() <= ENTROPY_TOL {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta * hi).sqrt() } else { beta * 4.0 };
        } else {
            hi = beta;
            beta = if lo > 0.0 { (beta * lo).sqrt() } else { beta / 4.0 };
        }
        h = gaussian_row(d, i, beta, dmin, &mut out);
    }
    if (h.exp() - target).abs() > PERPLEXITY_TOL {
        return Err(Error::Calibration { point: i });
    }
    Ok(out)
}

/// Row-stochastic `P_{j|i}` whose rows each have the target perplexity.
pub fn conditional_probabilities(dist: &Matrix, perplexity: f64, exec: Exec) -> Result<Matrix> {
    let n = dist.rows();
    if !(perplexity >= 1.0) {
        return Err(Error::arg(format!("perplexity must be at least 1, got {perplexity}")));
    }
    let rows = try_map_range(exec, n, |i| calibrate_row(dist.row(i), i, perplexity))?;
    Matrix::from_vec(n, n, rows.concat())
}

/// `P_ij = (P_{j|i} + P_{i|j}) / 2N`.
pub fn joint_probabilities(cond: &Matrix) -> Matrix {
    let n = cond.rows();
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p.set(i, j, (cond.get(i, j) + cond.get(j, i)) / (2.0 * n as f64));
        }
    }
    p
}

fn kl_divergence(p: &Matrix, num: &Matrix, z: f64) -> f64 {
    let mut kl = 0.0;
    for (pv, nv) in p.as_slice().iter().zip(num.as_slice()) {
        if *pv > 0.0 {
            kl += pv * (pv / (nv / z).max(1e-12)).ln();
        }
    }
    kl
}

pub fn tsne_2d(x: &Matrix, labels: Vec<String>, params: &TsneParams, exec: Exec) -> Result<TsneOutput> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::dim(format!("t-SNE needs at least 2 rows, got {n}")));
    }
    if !(params.learning_rate > 0.0) || params.iterations == 0 {
        return Err(Error::arg("t-SNE needs a positive learning rate and at least one iteration"));
    }
    let mut perplexity = params.perplexity;
    if (n as f64) < 3.0 * perplexity {
        let lowered = (((n - 1) / 3) as f64).max(1.0);
        log::warn!("perplexity {perplexity} too large for {n} points; using {lowered}");
        perplexity = lowered;
    }
    let dist = pairwise_sq_distances(x, exec);
    let p = joint_probabilities(&conditional_probabilities(&dist, perplexity, exec)?);

    let mut rng = SeededRng::substream(params.seed, streams::TSNE);
    let mut y: Vec<[f64; 2]> =
        (0..n).map(|_| [rng.normal() * params.init_std, rng.normal() * params.init_std]).collect();
    let mut update = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl_trace = Vec::new();

    for it in 0..params.iterations {
        let exaggeration = if it < params.exaggeration_iters { params.exaggeration } else { 1.0 };
        let momentum = if it < params.momentum_switch { params.momentum } else { params.final_momentum };
        let num_rows = map_range(exec, n, |i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        let dx = y[i][0] - y[j][0];
                        let dy = y[i][1] - y[j][1];
                        1.0 / (1.0 + dx * dx + dy * dy)
                    }
                })
                .collect::<Vec<_>>()
        });
        let z: f64 = num_rows.iter().map(|r| r.iter().sum::<f64>()).sum();
        let grads = map_range(exec, n, |i| {
            let mut g = [0.0; 2];
            for j in 0..n {
                let w = (exaggeration * p.get(i, j) - num_rows[i][j] / z) * num_rows[i][j];
                g[0] += w * (y[i][0] - y[j][0]);
                g[1] += w * (y[i][1] - y[j][1]);
            }
            [4.0 * g[0], 4.0 * g[1]]
        });
        for i in 0..n {
            for d in 0..2 {
                let g = grads[i][d];
                gains[i][d] = if (g > 0.0) != (update[i][d] > 0.0) { gains[i][d] + 0.2 } else { gains[i][d] * 0.8 };
                gains[i][d] = gains[i][d].max(0.01);
                update[i][d] = momentum * update[i][d] - params.learning_rate * gains[i][d] * g;
                y[i][d] += update[i][d];
            }
        }
        let centre = [0, 1].map(|d| y.iter().map(|v| v[d]).sum::<f64>() / n as f64);
        for v in &mut y {
            v[0] -= centre[0];
            v[1] -= centre[1];
        }
        let done = it + 1 == params.iterations;
        if (it + 1) % 50 == 0 || done {
            let num = Matrix::from_vec(n, n, num_rows.concat())?;
            let kl = kl_divergence(&p, &num, z);
            if !kl.is_finite() {
                return Err(Error::Numeric(format!("t-SNE objective became non-finite at iteration {}", it + 1)));
            }
            log::debug!("t-SNE iteration {}: KL {kl:.6}", it + 1);
            kl_trace.push((it + 1, kl));
        }
    }
    let mut record = BTreeMap::new();
    record.insert("perplexity".to_owned(), perplexity);
    record.insert("iterations".to_owned(), params.iterations as f64);
    record.insert("learning_rate".to_owned(), params.learning_rate);
    record.insert("seed".to_owned(), params.seed as f64);
    if let Some(&(_, kl)) = kl_trace.last() {
        record.insert("final_kl".to_owned(), kl);
    }
    let projection = Projection2D::new(y, labels, ProjectionMethod::Tsne, record)?;
    Ok(TsneOutput { projection, kl_trace, perplexity })
}
