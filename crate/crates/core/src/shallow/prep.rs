//! Training-time feature processing: variance filter, standardization, SMOTE.

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VARIANCE_THRESHOLD: f64 = 1e-7;
pub const SMOTE_NEIGHBORS: usize = 5;

fn column_mean_std(x: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let mean = x.mean_axis(Axis(0)).map(|m| m.to_vec()).unwrap_or_default();
    // population std
    let std = x.std_axis(Axis(0), 0.0).to_vec();
    (mean, std)
}

/// Keeps features whose (population) std exceeds `threshold`.
pub fn variance_filter(x: &Array2<f64>, threshold: f64) -> Result<Vec<bool>> {
    if x.nrows() == 0 {
        return Err(Error::invalid("variance filter needs at least one row"));
    }
    let (_, std) = column_mean_std(x);
    let mask: Vec<bool> = std.iter().map(|&s| s > threshold).collect();
    if !mask.iter().any(|&k| k) {
        return Err(Error::Degenerate("every feature is constant".into()));
    }
    Ok(mask)
}

/// Per-feature mean/std learned on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        let (mean, std) = column_mean_std(x);
        if let Some(j) = std.iter().position(|&s| s == 0.0) {
            return Err(Error::Degenerate(format!("feature {j} has zero std")));
        }
        Ok(Standardizer { mean, std })
    }

    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        out
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, v)| (v - self.mean[j]) / self.std[j]).collect()
    }
}

/// Frozen preprocessing state: kept-feature mask and standardizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePrep {
    pub keep: Vec<bool>,
    pub scaler: Standardizer,
}

impl FeaturePrep {
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        let keep = variance_filter(x, VARIANCE_THRESHOLD)?;
        let scaler = Standardizer::fit(&select_columns(x, &keep))?;
        Ok(FeaturePrep { keep, scaler })
    }

    pub fn n_inputs(&self) -> usize {
        self.keep.len()
    }

    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        self.scaler.transform(&select_columns(x, &self.keep))
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        let kept: Vec<f64> =
            row.iter().zip(&self.keep).filter(|(_, &k)| k).map(|(&v, _)| v).collect();
        self.scaler.transform_row(&kept)
    }
}

pub fn select_columns(x: &Array2<f64>, keep: &[bool]) -> Array2<f64> {
    let idx: Vec<usize> = keep.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i).collect();
    x.select(Axis(1), &idx).as_standard_layout().into_owned()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Oversamples the minority class with SMOTE until both classes have the
/// majority count. Synthetic rows are appended after the originals.
pub fn smote(x: &Array2<f64>, y: &[u8], k: usize, seed: u64) -> Result<(Array2<f64>, Vec<u8>)> {
    if x.nrows() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.nrows(), y.len())));
    }
    let positives = y.iter().filter(|&&l| l == 1).count();
    let negatives = y.len() - positives;
    if positives == negatives {
        return Ok((x.clone(), y.to_vec()));
    }
    let (minority_label, n_major) =
        if positives < negatives { (1u8, negatives) } else { (0u8, positives) };
    let minority: Vec<Vec<f64>> = y
        .iter()
        .zip(x.rows())
        .filter(|(&l, _)| l == minority_label)
        .map(|(_, r)| r.to_vec())
        .collect();
    if minority.len() < 2 {
        return Err(Error::Degenerate(format!(
            "SMOTE needs at least 2 minority samples, found {}",
            minority.len()
        )));
    }
    let k = if k >= minority.len() {
        log::info!("SMOTE: reducing k from {k} to {}", minority.len() - 1);
        minority.len() - 1
    } else {
        k.max(1)
    };

    let neighbors: Vec<Vec<usize>> = minority
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut d: Vec<(f64, usize)> = minority
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, b)| (squared_distance(a, b), j))
                .collect();
            d.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_new = n_major - minority.len();
    let mut out = Array2::zeros((x.nrows() + n_new, x.ncols()));
    out.slice_mut(ndarray::s![..x.nrows(), ..]).assign(x);
    let mut labels = y.to_vec();
    for s in 0..n_new {
        let base = rng.random_range(0..minority.len());
        let nn = neighbors[base][rng.random_range(0..neighbors[base].len())];
        let u: f64 = rng.random();
        let mut row = out.row_mut(x.nrows() + s);
        for (j, v) in row.iter_mut().enumerate() {
            *v = minority[base][j] + u * (minority[nn][j] - minority[base][j]);
        }
        labels.push(minority_label);
    }
    Ok((out, labels))
}
