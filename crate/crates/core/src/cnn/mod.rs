//! One-dimensional CNN over the smoothed 0–30 Hz spectrum of a channel
//! window, emitting the softmax probability of slowing.
//!
//! Each conv layer is a valid, stride-1 convolution followed by ReLU and a
//! width-2 max-pool. Hidden dense layers have ReLU and dropout; a final
//! two-unit dense layer feeds the softmax. Inputs are rescaled to unit mean
//! before the first layer, so the score does not depend on signal gain.

mod ops;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{CnnSpectrum, CNN_BINS};

pub use train::{grid_search, train, Adam, EpochLog, GridResult, TrainConfig, TrainLog, GRID_TIE_TOLERANCE};

use ops::{col2im, flatten, gemm, im2col, max_pool2, unflatten};

pub const HIDDEN_UNITS: usize = 100;
pub const DROPOUT: f64 = 0.5;
pub const FILTER_CHOICES: [usize; 5] = [8, 16, 32, 64, 128];
pub const KERNEL_CHOICES: [usize; 6] = [3, 5, 7, 9, 11, 13];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnnArch {
    pub n_conv_layers: usize,
    pub n_fc_layers: usize,
    pub n_filters: usize,
    pub kernel_len: usize,
    #[serde(default = "default_hidden")]
    pub hidden_units: usize,
    #[serde(default = "default_input_len")]
    pub input_len: usize,
}

fn default_hidden() -> usize {
    HIDDEN_UNITS
}

fn default_input_len() -> usize {
    CNN_BINS
}

impl Default for CnnArch {
    fn default() -> Self {
        CnnArch::new(1, 1, 8, 5)
    }
}

impl CnnArch {
    pub fn new(n_conv_layers: usize, n_fc_layers: usize, n_filters: usize, kernel_len: usize) -> Self {
        CnnArch { n_conv_layers, n_fc_layers, n_filters, kernel_len, hidden_units: HIDDEN_UNITS, input_len: CNN_BINS }
    }

    /// Sequence lengths after each conv+pool stage, starting with the input.
    pub fn lengths(&self) -> Vec<usize> {
        let mut out = vec![self.input_len];
        let mut l = self.input_len;
        for _ in 0..self.n_conv_layers {
            l = if l >= self.kernel_len { (l - self.kernel_len + 1) / 2 } else { 0 };
            out.push(l);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n_conv_layers) || !(1..=3).contains(&self.n_fc_layers) {
            return Err(Error::invalid(format!(
                "layer counts conv={} fc={} outside 1..=3",
                self.n_conv_layers, self.n_fc_layers
            )));
        }
        if self.n_filters == 0 || self.kernel_len == 0 || self.hidden_units == 0 {
            return Err(Error::invalid("filters, kernel length and hidden units must be positive"));
        }
        let last = *self.lengths().last().expect("nonempty");
        if last < 1 {
            return Err(Error::invalid(format!(
                "{} conv layers with kernel {} reduce length {} below 1",
                self.n_conv_layers, self.kernel_len, self.input_len
            )));
        }
        Ok(())
    }

    /// Filters × kernels over the full layer-count range.
    pub fn full_grid() -> Vec<CnnArch> {
        let mut grid = Vec::new();
        for conv in 1..=3 {
            for fc in 1..=3 {
                for f in FILTER_CHOICES {
                    for k in KERNEL_CHOICES {
                        grid.push(CnnArch::new(conv, fc, f, k));
                    }
                }
            }
        }
        grid
    }

    /// Reduced grid sized for a single CPU: filters {8, 32, 64}, kernels
    /// {5, 9, 13}, one or two conv layers, one dense layer.
    pub fn desk_grid() -> Vec<CnnArch> {
        let mut grid = Vec::new();
        for conv in 1..=2 {
            for f in [8, 32, 64] {
                for k in [5, 9, 13] {
                    grid.push(CnnArch::new(conv, 1, f, k));
                }
            }
        }
        grid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `[out_channels × in_channels × kernel]`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    /// `[n_out × n_in]`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-limit..=limit)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub arch: CnnArch,
    pub conv: Vec<Conv>,
    pub fc: Vec<Dense>,
    pub out: Dense,
    #[serde(default)]
    pub log: TrainLog,
}

/// Intermediate values kept for the backward pass.
struct Tape {
    batch: usize,
    conv_cols: Vec<Vec<f64>>,
    conv_z: Vec<Vec<f64>>,
    pool_arg: Vec<Vec<usize>>,
    /// Inputs to each dense layer (hidden layers then output).
    dense_in: Vec<Vec<f64>>,
    /// Post-ReLU, post-dropout hidden activations.
    hidden_out: Vec<Vec<f64>>,
    dropout: Vec<Option<Vec<f64>>>,
    probs: Vec<f64>,
}

/// Gradients in the order of [`CnnModel::params`].
pub type Gradients = Vec<Vec<f64>>;

/// Scales a spectrum to unit mean; an all-zero spectrum stays zero.
pub fn normalize_input(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    if mean != 0.0 && mean.is_finite() {
        x.iter_mut().for_each(|v| *v /= mean);
    }
}

fn dense_forward(layer: &Dense, x: &[f64], batch: usize) -> Vec<f64> {
    let mut y = vec![0.0; batch * layer.n_out];
    for row in y.chunks_exact_mut(layer.n_out) {
        row.copy_from_slice(&layer.bias);
    }
    // Y[B×out] += X[B×in] · Wᵀ
    gemm(batch, layer.n_in, layer.n_out, x, (layer.n_in, 1), &layer.weight, (1, layer.n_in), 1.0, &mut y);
    y
}

fn softmax_rows(logits: &mut [f64]) {
    for row in logits.chunks_exact_mut(2) {
        let m = row[0].max(row[1]);
        let e0 = (row[0] - m).exp();
        let e1 = (row[1] - m).exp();
        let s = e0 + e1;
        row[0] = e0 / s;
        row[1] = e1 / s;
    }
}

impl CnnModel {
    pub fn new(arch: CnnArch, seed: u64) -> Result<CnnModel> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = arch.kernel_len;
        let conv: Vec<Conv> = (0..arch.n_conv_layers)
            .map(|i| {
                let c_in = if i == 0 { 1 } else { arch.n_filters };
                let f = arch.n_filters;
                Conv {
                    in_channels: c_in,
                    out_channels: f,
                    kernel: k,
                    weight: glorot(&mut rng, c_in * k, f * k, f * c_in * k),
                    bias: vec![0.0; f],
                }
            })
            .collect();
        let flat = arch.n_filters * arch.lengths().last().copied().unwrap_or(0);
        let mut n_in = flat;
        let mut fc = Vec::new();
        for _ in 0..arch.n_fc_layers {
            let h = arch.hidden_units;
            fc.push(Dense { n_in, n_out: h, weight: glorot(&mut rng, n_in, h, n_in * h), bias: vec![0.0; h] });
            n_in = h;
        }
        let out = Dense { n_in, n_out: 2, weight: glorot(&mut rng, n_in, 2, n_in * 2), bias: vec![0.0; 2] };
        Ok(CnnModel { arch, conv, fc, out, log: TrainLog::default() })
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Parameter tensors: per conv (weight, bias), per dense (weight, bias),
    /// then the output layer.
    pub fn params(&self) -> Vec<&Vec<f64>> {
        let mut p = Vec::new();
        for c in &self.conv {
            p.push(&c.weight);
            p.push(&c.bias);
        }
        for d in self.fc.iter().chain(std::iter::once(&self.out)) {
            p.push(&d.weight);
            p.push(&d.bias);
        }
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut p = Vec::new();
        for c in &mut self.conv {
            p.push(&mut c.weight);
            p.push(&mut c.bias);
        }
        for d in self.fc.iter_mut().chain(std::iter::once(&mut self.out)) {
            p.push(&mut d.weight);
            p.push(&mut d.bias);
        }
        p
    }

    /// Forward pass over `batch` already-normalized inputs laid out
    /// `[B × input_len]`. With `dropout` set, hidden activations are masked.
    fn forward_tape(&self, x: &[f64], batch: usize, mut dropout: Option<&mut ChaCha8Rng>) -> Tape {
        let lens = self.arch.lengths();
        let mut tape = Tape {
            batch,
            conv_cols: Vec::new(),
            conv_z: Vec::new(),
            pool_arg: Vec::new(),
            dense_in: Vec::new(),
            hidden_out: Vec::new(),
            dropout: Vec::new(),
            probs: Vec::new(),
        };
        // a single input channel: [1 × (B·L)] equals the sample-major layout
        let mut a = x.to_vec();
        for (i, layer) in self.conv.iter().enumerate() {
            let (l_in, k) = (lens[i], layer.kernel);
            let l_out = l_in - k + 1;
            let n = batch * l_out;
            let cols = im2col(&a, layer.in_channels, batch, l_in, k);
            let mut z = vec![0.0; layer.out_channels * n];
            for (f, row) in z.chunks_exact_mut(n).enumerate() {
                row.fill(layer.bias[f]);
            }
            let ck = layer.in_channels * k;
            gemm(layer.out_channels, ck, n, &layer.weight, (ck, 1), &cols, (n, 1), 1.0, &mut z);
            z.iter_mut().for_each(|v| *v = v.max(0.0));
            let (pooled, arg) = max_pool2(&z, layer.out_channels, batch, l_out);
            tape.conv_cols.push(cols);
            tape.conv_z.push(z);
            tape.pool_arg.push(arg);
            a = pooled;
        }
        let mut h = flatten(&a, self.arch.n_filters, batch, lens[self.conv.len()]);
        for layer in &self.fc {
            let mut y = dense_forward(layer, &h, batch);
            y.iter_mut().for_each(|v| *v = v.max(0.0));
            let mask = dropout.as_deref_mut().map(|rng| {
                let keep = 1.0 - DROPOUT;
                let m: Vec<f64> =
                    (0..y.len()).map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
                y.iter_mut().zip(&m).for_each(|(v, s)| *v *= s);
                m
            });
            tape.dense_in.push(std::mem::replace(&mut h, y.clone()));
            tape.hidden_out.push(y);
            tape.dropout.push(mask);
        }
        let mut logits = dense_forward(&self.out, &h, batch);
        tape.dense_in.push(h);
        softmax_rows(&mut logits);
        tape.probs = logits;
        tape
    }

    fn backward(&self, tape: &Tape, y: &[u8]) -> Gradients {
        let batch = tape.batch;
        let lens = self.arch.lengths();
        let mut d: Vec<f64> = tape.probs.clone();
        for (row, &label) in d.chunks_exact_mut(2).zip(y) {
            row[usize::from(label)] -= 1.0;
            row.iter_mut().for_each(|v| *v /= batch as f64);
        }
        let mut dense_grads: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        let layers: Vec<&Dense> = self.fc.iter().chain(std::iter::once(&self.out)).collect();
        for li in (0..layers.len()).rev() {
            let layer = layers[li];
            if li < self.fc.len() {
                // back through dropout and ReLU of hidden layer li
                let out = &tape.hidden_out[li];
                let mask = tape.dropout[li].as_ref();
                for (j, g) in d.iter_mut().enumerate() {
                    if out[j] <= 0.0 {
                        *g = 0.0;
                    } else if let Some(m) = mask {
                        *g *= m[j];
                    }
                }
            }
            let x = &tape.dense_in[li];
            let mut dw = vec![0.0; layer.n_out * layer.n_in];
            gemm(layer.n_out, batch, layer.n_in, &d, (1, layer.n_out), x, (layer.n_in, 1), 0.0, &mut dw);
            let mut db = vec![0.0; layer.n_out];
            for row in d.chunks_exact(layer.n_out) {
                db.iter_mut().zip(row).for_each(|(a, b)| *a += b);
            }
            let mut dx = vec![0.0; batch * layer.n_in];
            gemm(batch, layer.n_out, layer.n_in, &d, (layer.n_out, 1), &layer.weight, (layer.n_in, 1), 0.0, &mut dx);
            dense_grads.push((dw, db));
            d = dx;
        }
        dense_grads.reverse();

        let mut conv_grads: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        let mut da = unflatten(&d, self.arch.n_filters, batch, lens[self.conv.len()]);
        for (i, layer) in self.conv.iter().enumerate().rev() {
            let (l_in, k) = (lens[i], layer.kernel);
            let n = batch * (l_in - k + 1);
            let z = &tape.conv_z[i];
            let mut dz = vec![0.0; z.len()];
            for (g, &src) in da.iter().zip(&tape.pool_arg[i]) {
                if z[src] > 0.0 {
                    dz[src] += g;
                }
            }
            let ck = layer.in_channels * k;
            let mut dw = vec![0.0; layer.out_channels * ck];
            gemm(layer.out_channels, n, ck, &dz, (n, 1), &tape.conv_cols[i], (1, n), 0.0, &mut dw);
            let db: Vec<f64> = dz.chunks_exact(n).map(|r| r.iter().sum()).collect();
            if i > 0 {
                let mut dcols = vec![0.0; ck * n];
                gemm(ck, layer.out_channels, n, &layer.weight, (1, ck), &dz, (n, 1), 0.0, &mut dcols);
                da = col2im(&dcols, layer.in_channels, batch, l_in, k);
            }
            conv_grads.push((dw, db));
        }
        conv_grads.reverse();

        conv_grads.into_iter().chain(dense_grads).flat_map(|(w, b)| [w, b]).collect()
    }

    fn prepare_batch(&self, rows: &[&[f64]]) -> Result<Vec<f64>> {
        let l = self.arch.input_len;
        let mut x = Vec::with_capacity(rows.len() * l);
        for r in rows {
            if r.len() != l {
                return Err(Error::ModelInputMismatch {
                    expected: format!("spectrum of {l} bins"),
                    found: format!("{} bins", r.len()),
                });
            }
            if !r.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid("non-finite spectrum value"));
            }
            let start = x.len();
            x.extend_from_slice(r);
            normalize_input(&mut x[start..]);
        }
        Ok(x)
    }

    /// Mean cross-entropy and its exact gradient. Dropout masks are drawn
    /// from `dropout` when given, and held fixed for the step.
    pub fn loss_and_grad(&self, rows: &[&[f64]], y: &[u8], dropout: Option<&mut ChaCha8Rng>) -> Result<(f64, Gradients)> {
        if rows.is_empty() || rows.len() != y.len() {
            return Err(Error::invalid("batch must be nonempty with one label per row"));
        }
        let x = self.prepare_batch(rows)?;
        let tape = self.forward_tape(&x, rows.len(), dropout);
        let loss = cross_entropy(&tape.probs, y);
        Ok((loss, self.backward(&tape, y)))
    }

    /// Mean cross-entropy without dropout.
    pub fn loss(&self, rows: &[&[f64]], y: &[u8]) -> Result<f64> {
        let x = self.prepare_batch(rows)?;
        let tape = self.forward_tape(&x, rows.len(), None);
        Ok(cross_entropy(&tape.probs, y))
    }

    /// Class probabilities `[p0, p1]` per row.
    pub fn probabilities(&self, rows: &[&[f64]]) -> Result<Vec<[f64; 2]>> {
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(512) {
            let x = self.prepare_batch(chunk)?;
            let tape = self.forward_tape(&x, chunk.len(), None);
            out.extend(tape.probs.chunks_exact(2).map(|p| [p[0], p[1]]));
        }
        Ok(out)
    }

    /// Softmax probability of slowing.
    pub fn score(&self, spec: &CnnSpectrum) -> Result<f64> {
        Ok(self.probabilities(&[spec.0.as_slice()])?[0][1])
    }

    pub fn scores(&self, rows: &[&[f64]]) -> Result<Vec<f64>> {
        Ok(self.probabilities(rows)?.into_iter().map(|p| p[1]).collect())
    }

    /// Scores rows stored as `f32`, `input_len` values each.
    pub fn scores_f32(&self, flat: &[f32]) -> Result<Vec<f64>> {
        let l = self.arch.input_len;
        let mut out = Vec::with_capacity(flat.len() / l);
        for chunk in flat.chunks(512 * l) {
            let owned: Vec<Vec<f64>> = chunk.chunks(l).map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
            let rows: Vec<&[f64]> = owned.iter().map(Vec::as_slice).collect();
            out.extend(self.scores(&rows)?);
        }
        Ok(out)
    }

    /// Activations of the second hidden dense layer (or the first when there
    /// is only one), without dropout: `[n × hidden_units]`.
    pub fn embeddings(&self, rows: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let layer = if self.fc.len() >= 2 {
            1
        } else {
            log::info!("model has one hidden dense layer; exporting its activations");
            0
        };
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(512) {
            let x = self.prepare_batch(chunk)?;
            let tape = self.forward_tape(&x, chunk.len(), None);
            let h = &tape.hidden_out[layer];
            out.extend(h.chunks_exact(self.arch.hidden_units).map(<[f64]>::to_vec));
        }
        Ok(out)
    }
}

fn cross_entropy(probs: &[f64], y: &[u8]) -> f64 {
    let total: f64 = probs
        .chunks_exact(2)
        .zip(y)
        .map(|(p, &l)| -p[usize::from(l)].max(f64::MIN_POSITIVE).ln())
        .sum();
    total / y.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows(n: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..len).map(|_| rng.random_range(0.1..2.0)).collect()).collect()
    }

    fn refs(rows: &[Vec<f64>]) -> Vec<&[f64]> {
        rows.iter().map(Vec::as_slice).collect()
    }

    fn max_rel_error(arch: CnnArch) -> f64 {
        let mut model = CnnModel::new(arch, 3).unwrap();
        // nonzero biases so ReLU kinks are not hit exactly
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for p in model.params_mut() {
            p.iter_mut().for_each(|v| *v += rng.random_range(-0.05..0.05));
        }
        let rows = sample_rows(4, arch.input_len, 9);
        let y = [0, 1, 1, 0];
        let (_, grads) = model.loss_and_grad(&refs(&rows), &y, None).unwrap();
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        let n_tensors = model.params().len();
        for t in 0..n_tensors {
            for i in 0..model.params()[t].len() {
                let orig = model.params()[t][i];
                model.params_mut()[t][i] = orig + h;
                let up = model.loss(&refs(&rows), &y).unwrap();
                model.params_mut()[t][i] = orig - h;
                let down = model.loss(&refs(&rows), &y).unwrap();
                model.params_mut()[t][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let analytic = grads[t][i];
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        let arch = CnnArch { input_len: 40, ..CnnArch::new(2, 2, 3, 5) };
        let err = max_rel_error(arch);
        assert!(err <= 1e-4, "max relative error {err}");
    }

    #[test]
    fn softmax_sums_to_one() {
        let model = CnnModel::new(CnnArch::default(), 1).unwrap();
        let rows = sample_rows(50, CNN_BINS, 2);
        for p in model.probabilities(&refs(&rows)).unwrap() {
            assert!((p[0] + p[1] - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_output_layer_gives_half() {
        let mut model = CnnModel::new(CnnArch::default(), 1).unwrap();
        model.out.weight.fill(0.0);
        let rows = sample_rows(5, CNN_BINS, 2);
        for s in model.scores(&refs(&rows)).unwrap() {
            assert!((s - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        let model = CnnModel::new(CnnArch::default(), 1).unwrap();
        assert!(matches!(model.score(&CnnSpectrum(vec![1.0; 149])), Err(Error::ModelInputMismatch { .. })));
        let mut v = vec![1.0; CNN_BINS];
        v[3] = f64::NAN;
        assert!(model.score(&CnnSpectrum(v)).is_err());
    }

    #[test]
    fn duplicated_batch_keeps_mean_gradient() {
        let model = CnnModel::new(CnnArch::new(1, 1, 8, 5), 7).unwrap();
        let rows = sample_rows(3, CNN_BINS, 5);
        let y = [1, 0, 1];
        let (_, g1) = model.loss_and_grad(&refs(&rows), &y, None).unwrap();
        let doubled: Vec<Vec<f64>> = rows.iter().chain(&rows).cloned().collect();
        let (_, g2) = model.loss_and_grad(&refs(&doubled), &[1, 0, 1, 1, 0, 1], None).unwrap();
        for (a, b) in g1.iter().flatten().zip(g2.iter().flatten()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn embeddings_shape_and_zero_case() {
        let mut model = CnnModel::new(CnnArch::new(1, 2, 8, 5), 7).unwrap();
        let rows = sample_rows(6, CNN_BINS, 5);
        let e = model.embeddings(&refs(&rows)).unwrap();
        assert_eq!((e.len(), e[0].len()), (6, HIDDEN_UNITS));
        for p in model.params_mut() {
            p.fill(0.0);
        }
        let zero = vec![vec![0.0; CNN_BINS]];
        assert!(model.embeddings(&refs(&zero)).unwrap()[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn arch_length_validation() {
        assert_eq!(CnnArch::new(1, 1, 8, 5).lengths(), vec![150, 73]);
        assert!(CnnArch { input_len: 10, ..CnnArch::new(3, 1, 8, 5) }.validate().is_err());
        assert!(CnnArch::new(4, 1, 8, 5).validate().is_err());
    }
}
