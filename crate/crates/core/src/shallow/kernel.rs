//! RBF-kernel SVM trained by dual coordinate descent.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::SVM_C;

/// Rows above which kernel columns are computed on demand instead of cached.
const CACHE_LIMIT: usize = 4000;
const DUAL_TOL: f64 = 1e-3;
const MAX_EPOCHS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfSvm {
    pub gamma: f64,
    pub n_features: usize,
    /// Support vectors, row-major.
    pub support: Vec<f64>,
    /// `α_i·y_i` per support vector.
    pub coef: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `gamma = 1 / (n_features · Var(X))` over all entries.
pub fn gamma_scale(x: &Array2<f64>) -> f64 {
    let var = x.var(0.0);
    if var > 0.0 {
        1.0 / (x.ncols() as f64 * var)
    } else {
        1.0
    }
}

impl RbfSvm {
    /// The bias is absorbed into the kernel as `K + 1`, which leaves only box
    /// constraints in the dual.
    pub fn fit(x: &Array2<f64>, y: &[u8], seed: u64) -> RbfSvm {
        let n = x.nrows();
        let gamma = gamma_scale(x);
        let rows: Vec<&[f64]> = (0..n)
            .map(|i| x.row(i).to_slice().expect("standard layout"))
            .collect();
        let sign: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let kernel = |i: usize, j: usize| (-gamma * sq_dist(rows[i], rows[j])).exp() + 1.0;
        let cache: Option<Vec<f64>> = (n <= CACHE_LIMIT).then(|| {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v = kernel(i, j);
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            k
        });
        let k_at = |i: usize, j: usize| match &cache {
            Some(k) => k[i * n + j],
            None => kernel(i, j),
        };

        let mut alpha = vec![0.0; n];
        // grad_i = y_i Σ_j α_j y_j K_ij - 1
        let mut grad = vec![-1.0f64; n];
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_EPOCHS {
            order.shuffle(&mut rng);
            let mut max_violation: f64 = 0.0;
            for &i in &order {
                let g = grad[i];
                let pg = if alpha[i] <= 0.0 {
                    g.min(0.0)
                } else if alpha[i] >= SVM_C {
                    g.max(0.0)
                } else {
                    g
                };
                max_violation = max_violation.max(pg.abs());
                if pg.abs() < 1e-12 {
                    continue;
                }
                let qii = k_at(i, i);
                let new = (alpha[i] - g / qii).clamp(0.0, SVM_C);
                let delta = new - alpha[i];
                if delta == 0.0 {
                    continue;
                }
                alpha[i] = new;
                let scale = delta * sign[i];
                for j in 0..n {
                    grad[j] += sign[j] * scale * k_at(i, j);
                }
            }
            if max_violation < DUAL_TOL {
                break;
            }
        }

        let mut support = Vec::new();
        let mut coef = Vec::new();
        for i in 0..n {
            if alpha[i] > 0.0 {
                support.extend_from_slice(rows[i]);
                coef.push(alpha[i] * sign[i]);
            }
        }
        RbfSvm { gamma, n_features: x.ncols(), support, coef }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .chunks_exact(self.n_features)
            .zip(&self.coef)
            .map(|(s, c)| c * ((-self.gamma * sq_dist(s, x)).exp() + 1.0))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gamma_scale_matches_definition() {
        let x = array![[0.0, 2.0], [2.0, 0.0]];
        // all-entry variance is 1
        assert!((gamma_scale(&x) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn separates_xor() {
        let x = array![[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]];
        let y = [1, 1, 0, 0];
        let m = RbfSvm::fit(&x, &y, 0);
        for (row, &l) in x.rows().into_iter().zip(&y) {
            let f = m.decision(row.as_slice().unwrap());
            assert_eq!(f > 0.0, l == 1);
        }
    }
}
