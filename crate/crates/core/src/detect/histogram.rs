//! Histograms of per-channel statistics and the summary features drawn
//! from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BIN_CHOICES: [usize; 5] = [2, 5, 10, 15, 20];
/// Upper edge of the core range for normalized spectral features.
pub const ULS_RANGE: f64 = 4.0;
/// Outer edge of the two outlier bins.
pub const ULS_OUTLIER_LIMIT: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramDomain {
    /// Detector scores in [0, 1].
    Unit,
    /// Normalized feature values: core bins over [0, 4] plus [-100, 0) and
    /// (4, 100].
    Uls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowHistogram {
    pub bins: usize,
    pub domain: HistogramDomain,
    /// `bins` counts for the unit domain; `[below, core…, above]` for ULS.
    pub counts: Vec<usize>,
}

impl SlowHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    /// Counts of the core bins only.
    pub fn core_counts(&self) -> &[usize] {
        match self.domain {
            HistogramDomain::Unit => &self.counts,
            HistogramDomain::Uls => &self.counts[1..=self.bins],
        }
    }

    /// Centers of all bins, in `counts` order.
    pub fn centers(&self) -> Vec<f64> {
        let (lo, hi) = match self.domain {
            HistogramDomain::Unit => (0.0, 1.0),
            HistogramDomain::Uls => (0.0, ULS_RANGE),
        };
        let w = (hi - lo) / self.bins as f64;
        let core = (0..self.bins).map(|i| lo + (i as f64 + 0.5) * w);
        match self.domain {
            HistogramDomain::Unit => core.collect(),
            HistogramDomain::Uls => std::iter::once(-ULS_OUTLIER_LIMIT / 2.0)
                .chain(core)
                .chain(std::iter::once((ULS_RANGE + ULS_OUTLIER_LIMIT) / 2.0))
                .collect(),
        }
    }
}

fn core_bin(v: f64, hi: f64, bins: usize) -> usize {
    ((v / hi * bins as f64).floor() as usize).min(bins - 1)
}

/// Bins are left-closed and right-open, except the last core bin which is
/// closed on the right.
pub fn build_histogram(values: &[f64], bins: usize, domain: HistogramDomain) -> Result<SlowHistogram> {
    if !BIN_CHOICES.contains(&bins) {
        return Err(Error::invalid(format!("bin count {bins} not in {BIN_CHOICES:?}")));
    }
    let mut clamped = 0usize;
    let counts = match domain {
        HistogramDomain::Unit => {
            let mut counts = vec![0; bins];
            for &v in values {
                if !(0.0..=1.0).contains(&v) {
                    clamped += 1;
                }
                counts[core_bin(v.clamp(0.0, 1.0), 1.0, bins)] += 1;
            }
            counts
        }
        HistogramDomain::Uls => {
            let mut counts = vec![0; bins + 2];
            for &v in values {
                if v.abs() > ULS_OUTLIER_LIMIT || v.is_nan() {
                    clamped += 1;
                }
                let slot = if v < 0.0 {
                    0
                } else if v > ULS_RANGE {
                    bins + 1
                } else if v.is_nan() {
                    bins + 1
                } else {
                    1 + core_bin(v, ULS_RANGE, bins)
                };
                counts[slot] += 1;
            }
            counts
        }
    };
    if clamped > 0 {
        log::warn!("{clamped} histogram values fell outside the domain and were clamped");
    }
    Ok(SlowHistogram { bins, domain, counts })
}

/// Bin frequencies followed by nine statistics of the raw values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramFeatures {
    pub frequencies: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub mode: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub range: f64,
    /// Excess kurtosis.
    pub kurtosis: f64,
    pub skewness: f64,
}

pub const STAT_NAMES: [&str; 9] = ["mean", "median", "mode", "std", "min", "max", "range", "kurtosis", "skewness"];

impl HistogramFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.frequencies.clone();
        v.extend([
            self.mean,
            self.median,
            self.mode,
            self.std,
            self.min,
            self.max,
            self.range,
            self.kurtosis,
            self.skewness,
        ]);
        v
    }

    pub fn names(bins: usize, domain: HistogramDomain) -> Vec<String> {
        let mut names: Vec<String> = match domain {
            HistogramDomain::Unit => (0..bins).map(|i| format!("bin_{}", i + 1)).collect(),
            HistogramDomain::Uls => std::iter::once("bin_below".to_string())
                .chain((0..bins).map(|i| format!("bin_{}", i + 1)))
                .chain(std::iter::once("bin_above".to_string()))
                .collect(),
        };
        names.extend(STAT_NAMES.iter().map(|s| s.to_string()));
        names
    }

    pub fn len(bins: usize, domain: HistogramDomain) -> usize {
        Self::names(bins, domain).len()
    }
}

/// Summary statistics over the raw values (not bin centers). The mode is
/// the center of the fullest bin, ties going to the lower bin; skewness and
/// kurtosis are 0 when the values have no spread.
pub fn histogram_features(values: &[f64], hist: &SlowHistogram) -> Result<HistogramFeatures> {
    if values.is_empty() {
        return Err(Error::invalid("histogram features need at least one value"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let std = m2.sqrt();
    let spread = std > 1e-12 * mean.abs().max(1.0);
    let (skewness, kurtosis) = if spread { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) } else { (0.0, 0.0) };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 { sorted[mid] } else { 0.5 * (sorted[mid - 1] + sorted[mid]) };
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let fullest = hist
        .counts
        .iter()
        .enumerate()
        .fold(0, |best, (i, &c)| if c > hist.counts[best] { i } else { best });
    Ok(HistogramFeatures {
        frequencies: hist.frequencies(),
        mean,
        median,
        mode: hist.centers()[fullest],
        std: if spread { std } else { 0.0 },
        min,
        max,
        range: max - min,
        kurtosis,
        skewness,
    })
}

/// Histogram plus features in one step.
pub fn features_of(values: &[f64], bins: usize, domain: HistogramDomain) -> Result<HistogramFeatures> {
    let hist = build_histogram(values, bins, domain)?;
    histogram_features(values, &hist)
}
