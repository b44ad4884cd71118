//! Mini-batch training with Adam, class-balanced batches and validation
//! early stopping.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CnnArch, CnnModel, Gradients};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub max_iters: usize,
    /// Fixed batch size; `None` uses half the number of slow training rows.
    pub batch_size: Option<usize>,
    pub val_fraction: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Iterations per epoch; with the default batch size, four iterations
    /// draw as many slow rows as the training split holds.
    pub iters_per_epoch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_iters: 10_000,
            batch_size: None,
            val_fraction: 0.2,
            patience: 20,
            iters_per_epoch: 4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::invalid(format!("val_fraction {} outside (0, 1)", self.val_fraction)));
        }
        if !(self.lr > 0.0) || self.max_iters == 0 || self.iters_per_epoch == 0 {
            return Err(Error::invalid("lr, max_iters and iters_per_epoch must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub iteration: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub batch_size: usize,
}

pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(model: &CnnModel, cfg: &TrainConfig) -> Adam {
        let zeros: Gradients = model.params().iter().map(|p| vec![0.0; p.len()]).collect();
        Adam { lr: cfg.lr, beta1: cfg.beta1, beta2: cfg.beta2, eps: cfg.eps, t: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step(&mut self, model: &mut CnnModel, grads: &Gradients) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in model.params_mut().into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Stratified split: per class, `round(val_fraction · n)` rows (at least one
/// when the class has two or more) go to validation.
fn stratified_split(y: &[u8], val_fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(rng);
        let mut n_val = (val_fraction * idx.len() as f64).round() as usize;
        if idx.len() >= 2 {
            n_val = n_val.clamp(1, idx.len() - 1);
        }
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    (train, val)
}

/// Mean of the per-class mean cross-entropies.
fn balanced_loss(model: &CnnModel, rows: &[&[f64]], y: &[u8], idx: &[usize]) -> Result<f64> {
    let sel: Vec<&[f64]> = idx.iter().map(|&i| rows[i]).collect();
    let probs = model.probabilities(&sel)?;
    let mut sum = [0.0; 2];
    let mut count = [0usize; 2];
    for (p, &i) in probs.iter().zip(idx) {
        let c = usize::from(y[i]);
        sum[c] -= p[c].max(f64::MIN_POSITIVE).ln();
        count[c] += 1;
    }
    Ok(0.5 * (sum[0] / count[0] as f64 + sum[1] / count[1] as f64))
}

fn draw(pool: &[usize], k: usize, rng: &mut ChaCha8Rng, out: &mut Vec<usize>) {
    if k <= pool.len() {
        out.extend(pool.choose_multiple(rng, k));
    } else {
        out.extend((0..k).map(|_| pool[rng.random_range(0..pool.len())]));
    }
}

/// Trains a fresh model on the labeled spectra. Returns the weights with
/// the lowest validation loss seen.
pub fn train(rows: &[&[f64]], y: &[u8], arch: CnnArch, cfg: &TrainConfig) -> Result<CnnModel> {
    cfg.validate()?;
    if rows.len() != y.len() {
        return Err(Error::invalid(format!("{} spectra but {} labels", rows.len(), y.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (train_idx, val_idx) = stratified_split(y, cfg.val_fraction, &mut rng);
    for class in [0u8, 1] {
        if !train_idx.iter().any(|&i| y[i] == class) || !val_idx.iter().any(|&i| y[i] == class) {
            return Err(Error::SingleClass(class));
        }
    }
    let slow: Vec<usize> = train_idx.iter().copied().filter(|&i| y[i] == 1).collect();
    let background: Vec<usize> = train_idx.iter().copied().filter(|&i| y[i] == 0).collect();
    let batch = cfg.batch_size.unwrap_or(slow.len() / 2).max(2) / 2 * 2;
    let half = batch / 2;

    let mut model = CnnModel::new(arch, rng.random())?;
    let mut adam = Adam::new(&model, cfg);
    let mut best = model.clone();
    let mut log = TrainLog { best_val_loss: f64::INFINITY, batch_size: batch, ..TrainLog::default() };
    let mut since_best = 0;
    let mut iteration = 0;
    let mut picks = Vec::with_capacity(batch);
    let mut labels = Vec::with_capacity(batch);
    while iteration < cfg.max_iters {
        let mut epoch_loss = 0.0;
        let mut steps = 0;
        for _ in 0..cfg.iters_per_epoch {
            if iteration >= cfg.max_iters {
                break;
            }
            picks.clear();
            draw(&slow, half, &mut rng, &mut picks);
            draw(&background, half, &mut rng, &mut picks);
            labels.clear();
            labels.extend(picks.iter().map(|&i| y[i]));
            debug_assert_eq!(labels.iter().filter(|&&l| l == 1).count(), half);
            let batch_rows: Vec<&[f64]> = picks.iter().map(|&i| rows[i]).collect();
            let (loss, grads) = model.loss_and_grad(&batch_rows, &labels, Some(&mut rng))?;
            adam.step(&mut model, &grads);
            epoch_loss += loss;
            steps += 1;
            iteration += 1;
        }
        let val_loss = balanced_loss(&model, rows, y, &val_idx)?;
        log.epochs.push(EpochLog { iteration, train_loss: epoch_loss / steps as f64, val_loss });
        if val_loss < log.best_val_loss {
            log.best_val_loss = val_loss;
            log.best_epoch = log.epochs.len() - 1;
            best = model.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    log::debug!(
        "cnn: {} epochs, best val loss {:.4} at epoch {}",
        log.epochs.len(),
        log.best_val_loss,
        log.best_epoch
    );
    best.log = log;
    Ok(best)
}

/// Validation losses closer than this are treated as tied; ties go to the
/// smaller network.
pub const GRID_TIE_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct GridResult {
    pub best: CnnArch,
    /// `(arch, best validation loss)` for every trained grid point.
    pub scores: Vec<(CnnArch, f64)>,
    pub skipped: Vec<CnnArch>,
}

pub fn grid_search(rows: &[&[f64]], y: &[u8], grid: &[CnnArch], cfg: &TrainConfig) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::invalid("empty architecture grid"));
    }
    let mut scores = Vec::new();
    let mut skipped = Vec::new();
    let mut sizes = Vec::new();
    for &arch in grid {
        if let Err(e) = arch.validate() {
            log::warn!("skipping grid point: {e}");
            skipped.push(arch);
            continue;
        }
        let model = train(rows, y, arch, cfg)?;
        sizes.push(model.n_params());
        scores.push((arch, model.log.best_val_loss));
    }
    let min = scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let best = scores
        .iter()
        .zip(&sizes)
        .filter(|((_, l), _)| *l <= min + GRID_TIE_TOLERANCE)
        .min_by(|((_, la), na), ((_, lb), nb)| na.cmp(nb).then(la.total_cmp(lb)))
        .map(|((a, _), _)| *a)
        .ok_or_else(|| Error::invalid("no valid architecture in grid"))?;
    Ok(GridResult { best, scores, skipped })
}
