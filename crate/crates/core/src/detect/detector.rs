//! Channel-level detectors and the spectral-feature normalizer.

use serde::{Deserialize, Serialize};

use super::bank::WindowBank;
use super::histogram::HistogramDomain;
use crate::cnn::CnnModel;
use crate::error::{Error, Result};
use crate::preprocess::mean_std;
use crate::shallow::ShallowModel;
use crate::spectral::{SpectralFeature, SpectralFeatures};

/// Threshold rule: 1 iff the feature is above `theta` for features that
/// rise with slowing, or below it for alpha and beta relative power.
pub fn uls_channel_score(feat: &SpectralFeatures, feature: SpectralFeature, theta: f64) -> u8 {
    let v = feat.get(feature);
    let hit = if feature.rises_with_slowing() { v > theta } else { v < theta };
    u8::from(hit)
}

/// Divisor mapping a spectral feature onto the [0, 4] histogram range:
/// the mean + 3·std of its values over slow-free recordings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlsNormalizer {
    pub feature: SpectralFeature,
    pub c: f64,
    /// Pooled mean and std, kept for threshold defaults.
    pub mean: f64,
    pub std: f64,
}

pub const ULS_SIGMA: f64 = 3.0;
/// Number of slow-free recordings pooled for the normalizer.
pub const ULS_POOL_SIZE: usize = 50;

impl UlsNormalizer {
    pub fn from_values(feature: SpectralFeature, values: &[f64]) -> Result<UlsNormalizer> {
        if values.is_empty() {
            return Err(Error::invalid("normalizer pool is empty"));
        }
        let (mean, std) = mean_std(values);
        let c = mean + ULS_SIGMA * std;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Degenerate(format!("normalizer constant {c} is not positive")));
        }
        Ok(UlsNormalizer { feature, c, mean, std })
    }

    pub fn apply(&self, v: f64) -> f64 {
        v / self.c
    }

    /// Default decision threshold: the 3-sigma limit on the slow side of the
    /// slow-free distribution.
    pub fn default_threshold(&self) -> f64 {
        if self.feature.rises_with_slowing() {
            self.c
        } else {
            (self.mean - ULS_SIGMA * self.std).max(0.0)
        }
    }
}

/// Pools every window and channel of the given slow-free banks.
pub fn fit_uls_normalizer(slow_free: &[&WindowBank], feature: SpectralFeature) -> Result<UlsNormalizer> {
    if slow_free.is_empty() {
        return Err(Error::invalid("no slow-free recordings for the normalizer"));
    }
    if slow_free.len() < ULS_POOL_SIZE {
        log::warn!("normalizer pooled from {} slow-free recordings (fewer than {ULS_POOL_SIZE})", slow_free.len());
    }
    let values: Vec<f64> =
        slow_free.iter().flat_map(|b| b.features.iter().map(move |f| f[feature.index()])).collect();
    UlsNormalizer::from_values(feature, &values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChannelDetector {
    UlsThreshold { feature: SpectralFeature, theta: f64, normalizer: Option<UlsNormalizer> },
    Shallow { model: ShallowModel },
    Cnn { model: CnnModel },
}

impl ChannelDetector {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelDetector::UlsThreshold { .. } => "uls_threshold",
            ChannelDetector::Shallow { .. } => "shallow",
            ChannelDetector::Cnn { .. } => "cnn",
        }
    }

    pub fn domain(&self) -> HistogramDomain {
        match self {
            ChannelDetector::UlsThreshold { .. } => HistogramDomain::Uls,
            _ => HistogramDomain::Unit,
        }
    }

    /// Decision scores per bank entry: {0, 1} for the threshold rule,
    /// probabilities otherwise.
    pub fn scores(&self, bank: &WindowBank) -> Result<Vec<f64>> {
        match self {
            ChannelDetector::UlsThreshold { feature, theta, .. } => {
                let i = feature.index();
                let up = feature.rises_with_slowing();
                Ok(bank
                    .features
                    .iter()
                    .map(|f| f64::from(u8::from(if up { f[i] > *theta } else { f[i] < *theta })))
                    .collect())
            }
            _ => self.statistics(bank),
        }
    }

    /// Values entering the histograms: the normalized feature for the
    /// threshold rule, the score otherwise.
    pub fn statistics(&self, bank: &WindowBank) -> Result<Vec<f64>> {
        match self {
            ChannelDetector::UlsThreshold { feature, normalizer, .. } => {
                let norm = normalizer.ok_or_else(|| Error::invalid("threshold detector has no fitted normalizer"))?;
                let i = feature.index();
                Ok(bank.features.iter().map(|f| norm.apply(f[i])).collect())
            }
            ChannelDetector::Shallow { model } => {
                bank.features.iter().map(|f| model.predict_score(f)).collect()
            }
            ChannelDetector::Cnn { model } => model.scores_f32(&bank.spectra),
        }
    }
}
