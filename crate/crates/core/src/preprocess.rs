//! Preprocessing chain: notch, high-pass, common average reference,
//! resampling to 128 Hz, rms-based artifact rejection, and 5 s windowing.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{self, NOTCH_HALF_WIDTH_HZ};
use crate::recording::Recording;

pub const FILTER_ORDER: usize = 4;
pub const TARGET_FS: f64 = 128.0;
pub const WINDOW_S: f64 = 5.0;
pub const WINDOW_OVERLAP: f64 = 0.75;

/// Anti-alias cutoff as a fraction of the output rate.
const ANTI_ALIAS_FRACTION: f64 = 0.45;
/// Width of the anti-alias transition band as a fraction of the output rate.
const ANTI_ALIAS_TRANSITION: f64 = 0.03;

/// When rejected epochs are removed relative to windowing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RejectionOrder {
    /// Window the recording, then drop windows touching a rejected epoch.
    #[default]
    DropWindows,
    /// Splice rejected epochs out of the recording, then window what remains.
    SpliceEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Mains frequency to notch out; `None` skips the notch.
    pub notch_hz: Option<f64>,
    pub hp_cutoff_hz: f64,
    pub target_fs: f64,
    pub artifact_sigma: f64,
    pub epoch_s: f64,
    pub window_s: f64,
    pub overlap: f64,
    pub rejection_order: RejectionOrder,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            notch_hz: Some(50.0),
            hp_cutoff_hz: 1.0,
            target_fs: TARGET_FS,
            artifact_sigma: 3.0,
            epoch_s: 1.0,
            window_s: WINDOW_S,
            overlap: WINDOW_OVERLAP,
            rejection_order: RejectionOrder::default(),
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self, input_fs: f64) -> Result<()> {
        if !(self.hp_cutoff_hz > 0.0 && self.hp_cutoff_hz < self.target_fs / 2.0) {
            return Err(Error::Config(format!(
                "hp_cutoff_hz {} outside (0, target_fs/2)",
                self.hp_cutoff_hz
            )));
        }
        if let Some(notch) = self.notch_hz {
            if !(notch > 0.0 && notch < input_fs / 2.0) {
                return Err(Error::Config(format!("notch_hz {notch} not below input Nyquist")));
            }
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::Config(format!("overlap {} outside [0, 1)", self.overlap)));
        }
        if !(self.epoch_s > 0.0 && self.window_s > 0.0 && self.artifact_sigma >= 0.0) {
            return Err(Error::Config("epoch_s, window_s must be positive".into()));
        }
        Ok(())
    }
}

pub fn butterworth_highpass(x: &[f64], fs: f64, cutoff: f64, order: usize) -> Result<Vec<f64>> {
    Ok(filter::butterworth_highpass(order, cutoff, fs)?.filter(x))
}

/// Band-stop over `f0 ± 2 Hz`.
pub fn butterworth_notch(x: &[f64], fs: f64, f0: f64, order: usize) -> Result<Vec<f64>> {
    Ok(filter::butterworth_bandstop(order, f0, NOTCH_HALF_WIDTH_HZ, fs)?.filter(x))
}

fn filter_rows(rec: &Recording, sos: &filter::Sos) -> Recording {
    let mut data = rec.data.clone();
    for mut row in data.rows_mut() {
        let mut buf = row.to_vec();
        sos.filter_in_place(&mut buf);
        row.assign(&ndarray::ArrayView1::from(&buf));
    }
    rec.with_data(data, rec.fs)
}

/// Common average reference.
pub fn car_montage(rec: &Recording) -> Result<Recording> {
    if rec.n_channels() < 2 {
        return Err(Error::Recording("common average reference needs at least 2 channels".into()));
    }
    let mean = rec.data.mean_axis(Axis(0)).expect("non-empty channel axis");
    let data = &rec.data - &mean.insert_axis(Axis(0));
    Ok(rec.with_data(data, rec.fs))
}

fn rational_ratio(from: f64, to: f64) -> Result<(usize, usize)> {
    let is_whole = |v: f64| (v - v.round()).abs() < 1e-9 && v.round() >= 1.0;
    if !(is_whole(from) && is_whole(to)) {
        return Err(Error::invalid(format!(
            "resampling needs integral rates, got {from} Hz -> {to} Hz"
        )));
    }
    let (a, b) = (from.round() as usize, to.round() as usize);
    let g = gcd(a, b);
    Ok((b / g, a / g))
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Polyphase rational resampler: upsample by `up`, low-pass, keep every
/// `down`-th sample. The FIR delay is compensated so output sample `m` sits at
/// time `m / fs_out`.
fn resample_poly(x: &[f64], up: usize, down: usize, h: &[f64]) -> Vec<f64> {
    let n_out = (x.len() * up).div_ceil(down);
    let delay = (h.len() - 1) / 2;
    let mut y = Vec::with_capacity(n_out);
    for m in 0..n_out {
        // position on the upsampled grid, shifted by the filter delay
        let pos = m * down + delay;
        // taps k with (pos - k) divisible by up
        let mut k = pos % up;
        let mut acc = 0.0;
        while k < h.len() && k <= pos {
            let i = (pos - k) / up;
            if i < x.len() {
                acc += h[k] * x[i];
            }
            k += up;
        }
        y.push(acc);
    }
    y
}

pub fn resample_to(rec: &Recording, target_fs: f64) -> Result<Recording> {
    if rec.fs < target_fs {
        return Err(Error::invalid(format!(
            "upsampling from {} Hz to {target_fs} Hz is not supported",
            rec.fs
        )));
    }
    if rec.fs == target_fs {
        return Ok(rec.clone());
    }
    let (up, down) = rational_ratio(rec.fs, target_fs)?;
    let upsampled_fs = rec.fs * up as f64;
    let transition = ANTI_ALIAS_TRANSITION * target_fs;
    let mut n_taps = (3.3 * upsampled_fs / transition).ceil() as usize;
    n_taps += 1 - n_taps % 2;
    let h = filter::fir_lowpass(n_taps, ANTI_ALIAS_FRACTION * target_fs, upsampled_fs, up as f64);

    let rows: Vec<Vec<f64>> =
        rec.data.rows().into_iter().map(|row| resample_poly(&row.to_vec(), up, down, &h)).collect();
    let n_out = rows[0].len();
    let data = Array2::from_shape_fn((rows.len(), n_out), |(c, t)| rows[c][t]);
    Ok(rec.with_data(data, target_fs))
}

/// Notch, high-pass, CAR, then resample to `cfg.target_fs`.
pub fn preprocess(rec: &Recording, cfg: &PreprocessConfig) -> Result<Recording> {
    cfg.validate(rec.fs)?;
    let mut out = rec.clone();
    if let Some(f0) = cfg.notch_hz {
        let sos = filter::butterworth_bandstop(FILTER_ORDER, f0, NOTCH_HALF_WIDTH_HZ, rec.fs)?;
        out = filter_rows(&out, &sos);
    }
    let hp = filter::butterworth_highpass(FILTER_ORDER, cfg.hp_cutoff_hz, rec.fs)?;
    out = filter_rows(&out, &hp);
    out = car_montage(&out)?;
    resample_to(&out, cfg.target_fs)
}

/// Per-channel, per-epoch artifact flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactMask {
    pub epoch_len: usize,
    /// `[n_channels][n_epochs]`
    pub per_channel: Vec<Vec<bool>>,
}

impl ArtifactMask {
    pub fn n_epochs(&self) -> usize {
        self.per_channel.first().map_or(0, Vec::len)
    }

    /// Epochs rejected on any channel.
    pub fn any(&self) -> Vec<bool> {
        (0..self.n_epochs()).map(|e| self.per_channel.iter().any(|ch| ch[e])).collect()
    }

    pub fn n_rejected(&self) -> usize {
        self.any().iter().filter(|&&r| r).count()
    }
}

/// Flags 1 s epochs whose rms exceeds mean + sigma * std of that channel's epoch rms values.
pub fn reject_artifacts(rec: &Recording, cfg: &PreprocessConfig) -> ArtifactMask {
    let epoch_len = ((cfg.epoch_s * rec.fs).round() as usize).max(1);
    let n_epochs = rec.n_samples() / epoch_len;
    let per_channel = rec
        .data
        .rows()
        .into_iter()
        .map(|row| {
            let row = row.as_slice().map(<[f64]>::to_vec).unwrap_or_else(|| row.to_vec());
            let rms: Vec<f64> = row
                .chunks_exact(epoch_len)
                .take(n_epochs)
                .map(|c| (c.iter().map(|v| v * v).sum::<f64>() / epoch_len as f64).sqrt())
                .collect();
            if rms.is_empty() {
                return Vec::new();
            }
            let (mean, std) = mean_std(&rms);
            let limit = mean + cfg.artifact_sigma * std;
            // relative slack keeps identical epochs from tripping on rounding
            let slack = 1e-12 * mean.abs().max(1e-300);
            rms.iter().map(|&r| r > limit + slack).collect()
        })
        .collect();
    ArtifactMask { epoch_len, per_channel }
}

pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// A window's position in the preprocessed recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpan {
    /// First sample in the (possibly spliced) preprocessed signal.
    pub start: usize,
    pub len: usize,
    /// Start time in the original, unspliced timeline.
    pub start_s: f64,
}

/// 5 s multi-channel window.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub data: Array2<f64>,
    pub start_s: f64,
    /// Rejection flags of the 1 s epochs the window covers.
    pub rejected_mask: Vec<bool>,
}

pub fn window_count(n_samples: usize, win: usize, hop: usize) -> usize {
    if n_samples < win {
        0
    } else {
        (n_samples - win) / hop + 1
    }
}

fn window_geometry(fs: f64, win_s: f64, overlap: f64) -> Result<(usize, usize)> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::invalid(format!("overlap {overlap} outside [0, 1)")));
    }
    let win = (win_s * fs).round() as usize;
    let hop = ((win as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    if win == 0 {
        return Err(Error::invalid("window shorter than one sample"));
    }
    Ok((win, hop))
}

/// Window positions after artifact handling. Errors when the recording is
/// shorter than one window.
pub fn window_spans(
    n_samples: usize,
    fs: f64,
    win_s: f64,
    overlap: f64,
    mask: Option<&ArtifactMask>,
    order: RejectionOrder,
) -> Result<Vec<WindowSpan>> {
    let (win, hop) = window_geometry(fs, win_s, overlap)?;
    if n_samples < win {
        return Err(Error::Recording(format!(
            "recording of {:.3} s is shorter than one {win_s} s window",
            n_samples as f64 / fs
        )));
    }
    let rejected = mask.map(ArtifactMask::any).unwrap_or_default();
    let epoch_len = mask.map_or(1, |m| m.epoch_len);
    match order {
        RejectionOrder::DropWindows => {
            let spans = (0..window_count(n_samples, win, hop))
                .map(|i| WindowSpan { start: i * hop, len: win, start_s: (i * hop) as f64 / fs })
                .filter(|span| {
                    let first = span.start / epoch_len;
                    let last = (span.start + span.len - 1) / epoch_len;
                    !(first..=last).any(|e| rejected.get(e).copied().unwrap_or(false))
                })
                .collect();
            Ok(spans)
        }
        RejectionOrder::SpliceEpochs => {
            // original sample index of each kept sample
            let kept: Vec<usize> = (0..n_samples)
                .filter(|&t| !rejected.get(t / epoch_len).copied().unwrap_or(false))
                .collect();
            let spans = (0..window_count(kept.len(), win, hop))
                .map(|i| WindowSpan {
                    start: i * hop,
                    len: win,
                    start_s: kept[i * hop] as f64 / fs,
                })
                .collect();
            Ok(spans)
        }
    }
}

/// Removes rejected epochs from every channel.
pub fn splice_out(rec: &Recording, mask: &ArtifactMask) -> Recording {
    let rejected = mask.any();
    let kept: Vec<usize> = (0..rec.n_samples())
        .filter(|&t| !rejected.get(t / mask.epoch_len).copied().unwrap_or(false))
        .collect();
    let data = rec.data.select(Axis(1), &kept);
    rec.with_data(data, rec.fs)
}

/// Splits a preprocessed recording into `win_s` windows with the given overlap,
/// dropping windows that touch a rejected epoch.
pub fn segment(
    rec: &Recording,
    win_s: f64,
    overlap: f64,
    mask: Option<&ArtifactMask>,
) -> Result<Vec<Segment>> {
    let spans = window_spans(rec.n_samples(), rec.fs, win_s, overlap, mask, RejectionOrder::DropWindows)?;
    let epoch_len = mask.map_or(1, |m| m.epoch_len);
    let rejected = mask.map(ArtifactMask::any).unwrap_or_default();
    Ok(spans
        .iter()
        .map(|span| {
            let first = span.start / epoch_len;
            let last = (span.start + span.len - 1) / epoch_len;
            Segment {
                data: rec.data.slice(ndarray::s![.., span.start..span.start + span.len]).to_owned(),
                start_s: span.start_s,
                rejected_mask: if mask.is_some() {
                    (first..=last).map(|e| rejected.get(e).copied().unwrap_or(false)).collect()
                } else {
                    Vec::new()
                },
            }
        })
        .collect())
}

/// A recording after the full chain, ready for windowed analysis.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub rec: Recording,
    pub mask: ArtifactMask,
    pub spans: Vec<WindowSpan>,
}

impl Prepared {
    pub fn window(&self, channel: usize, span: &WindowSpan) -> &[f64] {
        let n = self.rec.n_samples();
        let all = self.rec.data.as_slice().expect("standard-layout recording");
        let offset = channel * n + span.start;
        &all[offset..offset + span.len]
    }
}

/// Runs the whole chain: filters, CAR, resampling, artifact rejection, windowing.
pub fn prepare(rec: &Recording, cfg: &PreprocessConfig) -> Result<Prepared> {
    let clean = preprocess(rec, cfg)?;
    let mask = reject_artifacts(&clean, cfg);
    let spans = window_spans(
        clean.n_samples(),
        clean.fs,
        cfg.window_s,
        cfg.overlap,
        Some(&mask),
        cfg.rejection_order,
    )?;
    let clean = match cfg.rejection_order {
        RejectionOrder::DropWindows => clean,
        RejectionOrder::SpliceEpochs => splice_out(&clean, &mask),
    };
    Ok(Prepared { rec: clean, mask, spans })
}
