//! Logistic regression (L-BFGS), linear SVM (Pegasos) and Platt calibration.

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Linear {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b
    }
}

pub const LR_C: f64 = 1.0;
pub const LR_GRAD_TOL: f64 = 1e-6;
pub const LR_MAX_ITER: usize = 10_000_000;
const LBFGS_MEMORY: usize = 10;

/// Objective `C·Σ logloss + ½‖w‖²` (intercept unpenalized) and its gradient.
/// `theta = [w..., b]`.
fn lr_objective(x: &Array2<f64>, y: &[u8], theta: &[f64], grad: &mut [f64]) -> f64 {
    let d = x.ncols();
    let mut loss = 0.0;
    grad.iter_mut().for_each(|g| *g = 0.0);
    for (row, &label) in x.rows().into_iter().zip(y) {
        let z: f64 = row.iter().zip(theta).map(|(a, w)| a * w).sum::<f64>() + theta[d];
        let t = f64::from(label);
        // logloss = softplus(z) - t z
        loss += softplus(z) - t * z;
        let r = LR_C * (sigmoid(z) - t);
        for (g, a) in grad.iter_mut().zip(row.iter()) {
            *g += r * a;
        }
        grad[d] += r;
    }
    loss *= LR_C;
    for j in 0..d {
        loss += 0.5 * theta[j] * theta[j];
        grad[j] += theta[j];
    }
    loss
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// L2-regularized logistic regression minimized by L-BFGS with Armijo
/// backtracking until the gradient norm drops to `LR_GRAD_TOL`.
pub fn fit_logistic(x: &Array2<f64>, y: &[u8]) -> Linear {
    let n_par = x.ncols() + 1;
    let mut theta = vec![0.0; n_par];
    let mut grad = vec![0.0; n_par];
    let mut f = lr_objective(x, y, &theta, &mut grad);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut trial = vec![0.0; n_par];
    let mut trial_grad = vec![0.0; n_par];

    for _ in 0..LR_MAX_ITER {
        if norm(&grad) <= LR_GRAD_TOL {
            break;
        }
        // two-loop recursion
        let mut q = grad.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, yv) in s_hist.iter().zip(&y_hist).rev() {
            let rho = 1.0 / dot(yv, s);
            let a = rho * dot(s, &q);
            q.iter_mut().zip(yv).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push((a, rho));
        }
        if let (Some(s), Some(yv)) = (s_hist.last(), y_hist.last()) {
            let gamma = dot(s, yv) / dot(yv, yv);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, yv), (a, rho)) in s_hist.iter().zip(&y_hist).zip(alphas.into_iter().rev()) {
            let beta = rho * dot(yv, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - beta) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&grad, &dir);
        if slope >= 0.0 {
            dir = grad.iter().map(|v| -v).collect();
            slope = -dot(&grad, &grad);
            s_hist.clear();
            y_hist.clear();
        }

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n_par {
                trial[i] = theta[i] + step * dir[i];
            }
            let ft = lr_objective(x, y, &trial, &mut trial_grad);
            if ft <= f + 1e-4 * step * slope {
                let s: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
                let yv: Vec<f64> = trial_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
                if dot(&s, &yv) > 1e-12 {
                    s_hist.push(s);
                    y_hist.push(yv);
                    if s_hist.len() > LBFGS_MEMORY {
                        s_hist.remove(0);
                        y_hist.remove(0);
                    }
                }
                theta.copy_from_slice(&trial);
                grad.copy_from_slice(&trial_grad);
                f = ft;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            log::debug!("logistic regression: line search stalled at |g| = {:e}", norm(&grad));
            break;
        }
    }
    let b = theta.pop().unwrap_or(0.0);
    Linear { w: theta, b }
}

pub const SVM_C: f64 = 1.0;
const PEGASOS_EPOCHS: usize = 200;

/// Linear soft-margin SVM by Pegasos sub-gradient descent on
/// `λ/2‖(w, b)‖² + mean hinge`, with `λ = 1/(C·n)`. Returns the average of
/// the iterates over the second half of the run.
pub fn fit_linear_svm(x: &Array2<f64>, y: &[u8], seed: u64) -> Linear {
    let (n, d) = x.dim();
    let lambda = 1.0 / (SVM_C * n as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![0.0; d + 1];
    let mut avg = vec![0.0; d + 1];
    let total = PEGASOS_EPOCHS * n;
    let mut n_avg = 0usize;
    for t in 1..=total {
        let i = rng.random_range(0..n);
        let row = x.row(i);
        let yi = if y[i] == 1 { 1.0 } else { -1.0 };
        let margin = yi * (row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[d]);
        let eta = 1.0 / (lambda * t as f64);
        let shrink = 1.0 - eta * lambda;
        w.iter_mut().for_each(|v| *v *= shrink);
        if margin < 1.0 {
            for (wj, a) in w.iter_mut().zip(row.iter()) {
                *wj += eta * yi * a;
            }
            w[d] += eta * yi;
        }
        if t > total / 2 {
            n_avg += 1;
            let k = 1.0 / n_avg as f64;
            for (a, v) in avg.iter_mut().zip(&w) {
                *a += (v - *a) * k;
            }
        }
    }
    let b = avg.pop().unwrap_or(0.0);
    Linear { w: avg, b }
}

/// Platt sigmoid `P(y=1|f) = 1 / (1 + exp(A·f + B))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    /// Newton fit with Platt's smoothed targets (Lin, Lin and Weng's variant).
    pub fn fit(f: &[f64], y: &[u8]) -> Platt {
        let n_pos = y.iter().filter(|&&l| l == 1).count() as f64;
        let n_neg = y.len() as f64 - n_pos;
        let hi = (n_pos + 1.0) / (n_pos + 2.0);
        let lo = 1.0 / (n_neg + 2.0);
        let t: Vec<f64> = y.iter().map(|&l| if l == 1 { hi } else { lo }).collect();
        let mut a = 0.0;
        let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
        let sigma = 1e-12;
        let objective = |a: f64, b: f64| -> f64 {
            f.iter()
                .zip(&t)
                .map(|(&fi, &ti)| {
                    let z = fi * a + b;
                    // -[t log p + (1-t) log(1-p)] with p = sigmoid(-z)
                    ti * softplus(z) + (1.0 - ti) * softplus(-z)
                })
                .sum()
        };
        let mut fval = objective(a, b);
        for _ in 0..100 {
            let (mut h11, mut h22, mut h21, mut g1, mut g2) = (sigma, sigma, 0.0, 0.0, 0.0);
            for (&fi, &ti) in f.iter().zip(&t) {
                let p = sigmoid(-(fi * a + b));
                let q = 1.0 - p;
                let d2 = p * q;
                h11 += fi * fi * d2;
                h22 += d2;
                h21 += fi * d2;
                let d1 = ti - p;
                g1 += fi * d1;
                g2 += d1;
            }
            if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
                break;
            }
            let det = h11 * h22 - h21 * h21;
            let da = -(h22 * g1 - h21 * g2) / det;
            let db = -(-h21 * g1 + h11 * g2) / det;
            let gd = g1 * da + g2 * db;
            let mut step = 1.0;
            while step >= 1e-10 {
                let (na, nb) = (a + step * da, b + step * db);
                let nf = objective(na, nb);
                if nf < fval + 1e-4 * step * gd {
                    a = na;
                    b = nb;
                    fval = nf;
                    break;
                }
                step *= 0.5;
            }
            if step < 1e-10 {
                break;
            }
        }
        Platt { a, b }
    }

    pub fn apply(&self, f: f64) -> f64 {
        sigmoid(-(self.a * f + self.b))
    }
}

pub(crate) fn row_margins(model: &Linear, x: &Array2<f64>) -> Vec<f64> {
    let w = Array1::from(model.w.clone());
    x.rows().into_iter().map(|r: ArrayView1<f64>| r.dot(&w) + model.b).collect()
}
