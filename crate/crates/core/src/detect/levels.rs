//! Segment- and recording-level histogram features, the percentage
//! threshold rule, and degrees of slowing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bank::WindowBank;
use super::detector::ChannelDetector;
use super::histogram::{build_histogram, features_of, HistogramDomain, HistogramFeatures, SlowHistogram};
use crate::error::{Error, Result};
use crate::preprocess::Segment;
use crate::spectral::{cnn_spectrum_from_periodogram, periodogram, SpectralFeatures};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    /// Spectral-feature threshold, no channel-level training.
    Uls,
    /// Shallow learner on spectral features at channel level.
    Ssls,
    /// CNN on the smoothed spectrum at channel level.
    Sdls,
}

impl SystemKind {
    pub const ALL: [SystemKind; 3] = [SystemKind::Uls, SystemKind::Ssls, SystemKind::Sdls];

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Uls => "ULS",
            SystemKind::Ssls => "SSLS",
            SystemKind::Sdls => "SDLS",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uls" => Ok(SystemKind::Uls),
            "ssls" => Ok(SystemKind::Ssls),
            "sdls" => Ok(SystemKind::Sdls),
            _ => Err(Error::invalid(format!("unknown system {s:?}"))),
        }
    }
}

/// Scores a single multi-channel 640-sample window.
pub fn segment_bank(seg: &Segment, channels: &[String]) -> Result<WindowBank> {
    if seg.data.nrows() != channels.len() {
        return Err(Error::invalid(format!("{} rows but {} channel names", seg.data.nrows(), channels.len())));
    }
    let mut features = Vec::with_capacity(channels.len());
    let mut spectra = Vec::new();
    for row in seg.data.rows() {
        let spec = periodogram(&row.to_vec())?;
        features.push(SpectralFeatures::from_spectrum_lenient(&spec).to_array());
        spectra.extend(cnn_spectrum_from_periodogram(&spec).0.iter().map(|&v| v as f32));
    }
    Ok(WindowBank { channels: channels.to_vec(), starts_s: vec![seg.start_s], features, spectra })
}

/// Histogram features over the channels of one segment.
pub fn segment_level_features(
    seg: &Segment,
    channels: &[String],
    det: &ChannelDetector,
    bins: usize,
) -> Result<HistogramFeatures> {
    let stats = det.statistics(&segment_bank(seg, channels)?)?;
    features_of(&stats, bins, det.domain())
}

/// Histogram features per window, from statistics laid out like the bank.
pub fn window_features(
    stats: &[f64],
    n_channels: usize,
    bins: usize,
    domain: HistogramDomain,
) -> Result<Vec<HistogramFeatures>> {
    stats.chunks(n_channels).map(|w| features_of(w, bins, domain)).collect()
}

/// Histogram features over every window and channel of a recording.
pub fn eeg_level_features(bank: &WindowBank, det: &ChannelDetector, bins: usize) -> Result<HistogramFeatures> {
    if bank.is_empty() {
        return Err(Error::Recording("recording has no complete window".into()));
    }
    features_of(&det.statistics(bank)?, bins, det.domain())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    /// Slowing when the share of bins 1–5 falls below the threshold.
    Normal,
    /// Slowing when the share of bins 15–20 exceeds the threshold.
    Slow,
}

pub const THRESHOLD_BINS: usize = 20;

/// Default percentage thresholds per system and mode.
pub fn default_threshold_pct(system: SystemKind, mode: ThresholdMode) -> f64 {
    match (system, mode) {
        (SystemKind::Uls, ThresholdMode::Normal) => 55.0,
        (SystemKind::Ssls, ThresholdMode::Normal) => 80.0,
        (SystemKind::Sdls, ThresholdMode::Normal) => 90.0,
        (SystemKind::Uls, ThresholdMode::Slow) => 10.0,
        (_, ThresholdMode::Slow) => 5.0,
    }
}

/// `(normal %, slow %, middle %)` of a 20-bin histogram. Outlier bins count
/// towards the total and the middle share.
pub fn mass_split(hist: &SlowHistogram) -> Result<(f64, f64, f64)> {
    if hist.bins != THRESHOLD_BINS {
        return Err(Error::invalid(format!("threshold rule needs {THRESHOLD_BINS} bins, got {}", hist.bins)));
    }
    let total = hist.total();
    if total == 0 {
        return Err(Error::invalid("empty histogram"));
    }
    let core = hist.core_counts();
    let normal: usize = core[..5].iter().sum();
    let slow: usize = core[14..].iter().sum();
    let pct = |c: usize| 100.0 * c as f64 / total as f64;
    Ok((pct(normal), pct(slow), pct(total - normal - slow)))
}

pub fn threshold_classify_eeg(hist: &SlowHistogram, mode: ThresholdMode, theta_pct: f64) -> Result<u8> {
    let (normal, slow, _) = mass_split(hist)?;
    Ok(u8::from(match mode {
        ThresholdMode::Normal => normal < theta_pct,
        ThresholdMode::Slow => slow > theta_pct,
    }))
}

/// Builds the 20-bin histogram the threshold rule reads.
pub fn threshold_histogram(values: &[f64], domain: HistogramDomain) -> Result<SlowHistogram> {
    build_histogram(values, THRESHOLD_BINS, domain)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlowingCategory {
    #[serde(rename = "GPS")]
    Gps,
    #[serde(rename = "GIS")]
    Gis,
    #[serde(rename = "FPS")]
    Fps,
    #[serde(rename = "FIS")]
    Fis,
    #[serde(rename = "slow-free")]
    SlowFree,
}

impl SlowingCategory {
    pub const ALL: [SlowingCategory; 5] =
        [SlowingCategory::Gps, SlowingCategory::Gis, SlowingCategory::Fps, SlowingCategory::Fis, SlowingCategory::SlowFree];

    pub fn name(self) -> &'static str {
        match self {
            SlowingCategory::Gps => "GPS",
            SlowingCategory::Gis => "GIS",
            SlowingCategory::Fps => "FPS",
            SlowingCategory::Fis => "FIS",
            SlowingCategory::SlowFree => "slow-free",
        }
    }
}

impl fmt::Display for SlowingCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A channel counts as slowing when more than this share of its windows is slow.
pub const CHANNEL_FLAG_FRACTION: f64 = 0.2;
/// Slowing is generalized when more than this share of channels is flagged.
pub const GENERALIZED_FRACTION: f64 = 0.5;
/// Slowing is persistent when flagged channels are slow for more than this share on average.
pub const PERSISTENT_FRACTION: f64 = 0.5;
/// Detector score above which a window counts as slow.
pub const SLOW_SCORE_CUTOFF: f64 = 0.5;

/// Category from per-channel slow fractions (strict inequalities throughout).
pub fn categorize(fractions: &[f64]) -> SlowingCategory {
    let flagged: Vec<f64> = fractions.iter().copied().filter(|&f| f > CHANNEL_FLAG_FRACTION).collect();
    if flagged.is_empty() {
        return SlowingCategory::SlowFree;
    }
    let generalized = flagged.len() as f64 > GENERALIZED_FRACTION * fractions.len() as f64;
    let persistent = flagged.iter().sum::<f64>() / flagged.len() as f64 > PERSISTENT_FRACTION;
    match (generalized, persistent) {
        (true, true) => SlowingCategory::Gps,
        (true, false) => SlowingCategory::Gis,
        (false, true) => SlowingCategory::Fps,
        (false, false) => SlowingCategory::Fis,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowingDegreeReport {
    pub channels: Vec<String>,
    pub slow_fraction: Vec<f64>,
    pub flagged: Vec<bool>,
    pub category: SlowingCategory,
    pub n_windows: usize,
}

impl SlowingDegreeReport {
    pub fn from_fractions(channels: Vec<String>, fractions: Vec<f64>, n_windows: usize) -> Result<Self> {
        if channels.len() != fractions.len() || channels.is_empty() {
            return Err(Error::invalid("need one slow fraction per channel"));
        }
        if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::invalid(format!("slow fraction {f} outside [0, 1]")));
        }
        let flagged = fractions.iter().map(|&f| f > CHANNEL_FLAG_FRACTION).collect();
        let category = categorize(&fractions);
        Ok(SlowingDegreeReport { channels, slow_fraction: fractions, flagged, category, n_windows })
    }

    /// `channel,slow_fraction,flagged` rows for scalp plots.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("channel,slow_fraction,flagged\n");
        for ((c, f), g) in self.channels.iter().zip(&self.slow_fraction).zip(&self.flagged) {
            out.push_str(&format!("{c},{f},{}\n", u8::from(*g)));
        }
        out
    }
}

/// Per-channel share of windows whose score exceeds `cutoff`.
pub fn slow_fractions(scores: &[f64], n_channels: usize, cutoff: f64) -> Vec<f64> {
    let n_windows = scores.len() / n_channels.max(1);
    (0..n_channels)
        .map(|c| {
            let slow = (0..n_windows).filter(|&w| scores[w * n_channels + c] > cutoff).count();
            slow as f64 / n_windows.max(1) as f64
        })
        .collect()
}

pub fn degrees_of_slowing(bank: &WindowBank, det: &ChannelDetector, cutoff: f64) -> Result<SlowingDegreeReport> {
    if bank.is_empty() {
        return Err(Error::Recording("recording has no complete window".into()));
    }
    let scores = det.scores(bank)?;
    let fractions = slow_fractions(&scores, bank.n_channels(), cutoff);
    SlowingDegreeReport::from_fractions(bank.channels.clone(), fractions, bank.n_windows())
}
