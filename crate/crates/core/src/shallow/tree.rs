//! CART trees (Gini or squared error, sample weights, random feature
//! subsets) and the ensembles built on them: random forest, gradient
//! boosting and SAMME AdaBoost.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::{sigmoid, Platt};

const LEAF: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Targets in {0, 1}; leaf value = weighted fraction of ones.
    Gini,
    /// Real targets; leaf value = weighted mean.
    SquaredError,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Candidate features per split; `None` = all.
    pub max_features: Option<usize>,
    pub criterion: Criterion,
}

#[derive(Clone, Copy, Default)]
struct Stats {
    w: f64,
    wy: f64,
    wy2: f64,
}

impl Stats {
    fn add(&mut self, w: f64, y: f64) {
        self.w += w;
        self.wy += w * y;
        self.wy2 += w * y * y;
    }

    fn sub(self, o: Stats) -> Stats {
        Stats { w: self.w - o.w, wy: self.wy - o.wy, wy2: self.wy2 - o.wy2 }
    }

    /// Weighted impurity times node weight.
    fn cost(&self, c: Criterion) -> f64 {
        if self.w <= 0.0 {
            return 0.0;
        }
        match c {
            Criterion::Gini => 2.0 * self.wy * (self.w - self.wy) / self.w,
            Criterion::SquaredError => (self.wy2 - self.wy * self.wy / self.w).max(0.0),
        }
    }

    fn mean(&self) -> f64 {
        if self.w > 0.0 {
            self.wy / self.w
        } else {
            0.0
        }
    }
}

struct Builder<'a> {
    x: &'a Array2<f64>,
    y: &'a [f64],
    w: &'a [f64],
    params: TreeParams,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn stats(&self, idx: &[usize]) -> Stats {
        let mut s = Stats::default();
        for &i in idx {
            s.add(self.w[i], self.y[i]);
        }
        s
    }

    /// Best split on one feature: (cost, threshold, n_left after sorting).
    fn best_on(&self, idx: &mut [usize], f: usize, total: Stats) -> Option<(f64, f64)> {
        idx.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]));
        let first = self.x[[idx[0], f]];
        let last = self.x[[idx[idx.len() - 1], f]];
        if first == last {
            return None;
        }
        let c = self.params.criterion;
        let mut left = Stats::default();
        let mut best: Option<(f64, f64)> = None;
        for k in 0..idx.len() - 1 {
            let i = idx[k];
            left.add(self.w[i], self.y[i]);
            let (v, next) = (self.x[[i, f]], self.x[[idx[k + 1], f]]);
            if v == next {
                continue;
            }
            let cost = left.cost(c) + total.sub(left).cost(c);
            if best.is_none_or(|(b, _)| cost < b) {
                let mut thr = 0.5 * (v + next);
                if thr >= next {
                    thr = v;
                }
                best = Some((cost, thr));
            }
        }
        best
    }

    fn build(&mut self, idx: &mut Vec<usize>, depth: usize) -> usize {
        let total = self.stats(idx);
        let id = self.nodes.len();
        self.nodes.push(Node { feature: LEAF, threshold: 0.0, left: 0, right: 0, value: total.mean() });
        if depth >= self.params.max_depth || idx.len() < 2 || total.cost(self.params.criterion) <= 1e-14 {
            return id;
        }
        let d = self.x.ncols();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(&mut self.rng);
        let limit = self.params.max_features.unwrap_or(d).max(1);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut visited = 0;
        for &f in &features {
            if visited >= limit {
                break;
            }
            // constant features do not count towards the limit
            if let Some((cost, thr)) = self.best_on(idx, f, total) {
                visited += 1;
                if best.is_none_or(|(b, _, _)| cost < b) {
                    best = Some((cost, f, thr));
                }
            }
        }
        let Some((_, f, thr)) = best else { return id };
        let (mut l, mut r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[[i, f]] <= thr);
        let left = self.build(&mut l, depth + 1);
        let right = self.build(&mut r, depth + 1);
        let node = &mut self.nodes[id];
        node.feature = f;
        node.threshold = thr;
        node.left = left;
        node.right = right;
        id
    }
}

impl Tree {
    /// Grows a tree on the rows with positive weight.
    pub fn fit(x: &Array2<f64>, y: &[f64], w: &[f64], params: TreeParams, seed: u64) -> Tree {
        let mut idx: Vec<usize> = (0..x.nrows()).filter(|&i| w[i] > 0.0).collect();
        let mut b = Builder { x, y, w, params, rng: ChaCha8Rng::seed_from_u64(seed), nodes: Vec::new() };
        b.build(&mut idx, 0);
        Tree { nodes: b.nodes }
    }

    pub fn leaf(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            let n = &self.nodes[i];
            if n.feature == LEAF {
                return i;
            }
            i = if x[n.feature] <= n.threshold { n.left } else { n.right };
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.nodes[self.leaf(x)].value
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            let n = &t.nodes[i];
            if n.feature == LEAF {
                0
            } else {
                1 + walk(t, n.left).max(walk(t, n.right))
            }
        }
        walk(self, 0)
    }
}

fn row(x: &Array2<f64>, i: usize) -> &[f64] {
    x.row(i).to_slice().expect("standard layout")
}

pub const N_ESTIMATORS: usize = 100;
pub const RF_MAX_DEPTH: usize = 4;
pub const GB_MAX_DEPTH: usize = 3;
pub const GB_LEARNING_RATE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
}

impl RandomForest {
    pub fn fit(x: &Array2<f64>, y: &[u8], seed: u64) -> RandomForest {
        let n = x.nrows();
        let yf: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
        let params = TreeParams { max_depth: RF_MAX_DEPTH, max_features: Some(1), criterion: Criterion::Gini };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..N_ESTIMATORS)
            .map(|_| {
                let mut w = vec![0.0; n];
                for _ in 0..n {
                    w[rng.random_range(0..n)] += 1.0;
                }
                Tree::fit(x, &yf, &w, params, rng.next_u64())
            })
            .collect();
        RandomForest { trees }
    }

    /// Fraction of trees voting for class 1.
    pub fn score(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.predict(x) > 0.5).count();
        votes as f64 / self.trees.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl GradientBoosting {
    /// Logistic-loss boosting with Newton-step leaf values.
    pub fn fit(x: &Array2<f64>, y: &[u8], seed: u64) -> GradientBoosting {
        let n = x.nrows();
        let t: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
        let p0 = t.iter().sum::<f64>() / n as f64;
        let init = (p0 / (1.0 - p0)).ln();
        let mut f = vec![init; n];
        let ones = vec![1.0; n];
        let params = TreeParams { max_depth: GB_MAX_DEPTH, max_features: Some(1), criterion: Criterion::SquaredError };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trees = Vec::with_capacity(N_ESTIMATORS);
        for _ in 0..N_ESTIMATORS {
            let p: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
            let r: Vec<f64> = t.iter().zip(&p).map(|(a, b)| a - b).collect();
            let mut tree = Tree::fit(x, &r, &ones, params, rng.next_u64());
            let mut num = vec![0.0; tree.nodes.len()];
            let mut den = vec![0.0; tree.nodes.len()];
            let leaves: Vec<usize> = (0..n).map(|i| tree.leaf(row(x, i))).collect();
            for (i, &leaf) in leaves.iter().enumerate() {
                num[leaf] += r[i];
                den[leaf] += p[i] * (1.0 - p[i]);
            }
            for (k, node) in tree.nodes.iter_mut().enumerate() {
                if node.feature == LEAF {
                    node.value = if den[k].abs() < 1e-150 { 0.0 } else { num[k] / den[k] };
                }
            }
            for (i, &leaf) in leaves.iter().enumerate() {
                f[i] += GB_LEARNING_RATE * tree.nodes[leaf].value;
            }
            trees.push(tree);
        }
        GradientBoosting { init, learning_rate: GB_LEARNING_RATE, trees }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub stumps: Vec<Tree>,
    pub alphas: Vec<f64>,
    pub platt: Platt,
}

impl AdaBoost {
    /// SAMME with depth-1 trees over all features. A perfect stump ends
    /// boosting early with weight 1.
    pub fn fit(x: &Array2<f64>, y: &[u8], seed: u64) -> AdaBoost {
        let n = x.nrows();
        let t: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
        let mut w = vec![1.0 / n as f64; n];
        let params = TreeParams { max_depth: 1, max_features: None, criterion: Criterion::Gini };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stumps = Vec::new();
        let mut alphas = Vec::new();
        for _ in 0..N_ESTIMATORS {
            let stump = Tree::fit(x, &t, &w, params, rng.next_u64());
            let miss: Vec<bool> = (0..n).map(|i| (stump.predict(row(x, i)) > 0.5) != (y[i] == 1)).collect();
            let total: f64 = w.iter().sum();
            let err = miss.iter().zip(&w).filter(|(m, _)| **m).map(|(_, w)| w).sum::<f64>() / total;
            if err <= 0.0 {
                stumps.push(stump);
                alphas.push(1.0);
                break;
            }
            if err >= 0.5 {
                if stumps.is_empty() {
                    stumps.push(stump);
                    alphas.push(1.0);
                }
                break;
            }
            let alpha = ((1.0 - err) / err).ln();
            for (wi, &m) in w.iter_mut().zip(&miss) {
                if m {
                    *wi *= alpha.exp();
                }
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            stumps.push(stump);
            alphas.push(alpha);
        }
        let mut model = AdaBoost { stumps, alphas, platt: Platt { a: -1.0, b: 0.0 } };
        let votes: Vec<f64> = (0..n).map(|i| model.vote(row(x, i))).collect();
        model.platt = Platt::fit(&votes, y);
        model
    }

    /// Weighted vote normalized to [-1, 1].
    pub fn vote(&self, x: &[f64]) -> f64 {
        let total: f64 = self.alphas.iter().sum();
        let v: f64 = self
            .stumps
            .iter()
            .zip(&self.alphas)
            .map(|(s, a)| if s.predict(x) > 0.5 { *a } else { -*a })
            .sum();
        v / total
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.platt.apply(self.vote(x))
    }
}
