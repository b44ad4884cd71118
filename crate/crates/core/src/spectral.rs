//! Power spectra, relative band powers, power ratios, and the smoothed
//! spectrum fed to the CNN detector.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples in one 5 s window at 128 Hz.
pub const WINDOW_LEN: usize = 640;
/// One-sided periodogram bins of a window, covering [0, 64] Hz.
pub const SPECTRUM_BINS: usize = WINDOW_LEN / 2 + 1;
/// Bins kept for the CNN, covering [0, 30) Hz.
pub const CNN_BINS: usize = 150;
pub const CNN_SMOOTHING: usize = 5;
pub const BIN_HZ: f64 = 0.2;

/// Ratios whose denominator vanishes are capped here by the lenient path.
pub const RATIO_CAP: f64 = 1e3;

pub const DELTA: (f64, f64) = (1.0, 4.0);
pub const THETA: (f64, f64) = (4.0, 8.0);
pub const ALPHA: (f64, f64) = (8.0, 13.0);
pub const BETA: (f64, f64) = (13.0, 30.0);

thread_local! {
    static PLANS: RefCell<HashMap<usize, Arc<dyn Fft<f64>>>> = RefCell::new(HashMap::new());
}

fn fft_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry(n)
            .or_insert_with(|| FftPlanner::new().plan_fft_forward(n))
            .clone()
    })
}

/// One-sided power spectrum of an arbitrary-length signal, scaled so the bins
/// sum to the time-domain energy `sum(x^2)`. Bin `k` sits at `k * fs / n`.
pub fn power_spectrum(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_plan(n).process(&mut buf);
    let half = n / 2;
    (0..=half)
        .map(|k| {
            let p = buf[k].norm_sqr() / n as f64;
            let mirrored = k != 0 && !(n % 2 == 0 && k == half);
            if mirrored {
                2.0 * p
            } else {
                p
            }
        })
        .collect()
}

/// Rectangular-window periodogram of a 640-sample window: 321 bins over [0, 64] Hz.
pub fn periodogram(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != WINDOW_LEN {
        return Err(Error::invalid(format!("periodogram expects {WINDOW_LEN} samples, got {}", x.len())));
    }
    Ok(power_spectrum(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPowers {
    pub p_delta: f64,
    pub p_theta: f64,
    pub p_alpha: f64,
    pub p_beta: f64,
    pub p_total: f64,
}

fn band_sum(spec: &[f64], bin_hz: f64, (lo, hi): (f64, f64)) -> f64 {
    // half-open [lo, hi); the shared boundary bin belongs to the upper band
    let first = (lo / bin_hz - 1e-9).ceil() as usize;
    let end = (hi / bin_hz - 1e-9).ceil() as usize;
    spec[first.min(spec.len())..end.min(spec.len())].iter().sum()
}

/// Band powers of a spectrum with `BIN_HZ` resolution.
pub fn band_powers(spec: &[f64]) -> BandPowers {
    band_powers_at(spec, BIN_HZ)
}

pub fn band_powers_at(spec: &[f64], bin_hz: f64) -> BandPowers {
    let p_delta = band_sum(spec, bin_hz, DELTA);
    let p_theta = band_sum(spec, bin_hz, THETA);
    let p_alpha = band_sum(spec, bin_hz, ALPHA);
    let p_beta = band_sum(spec, bin_hz, BETA);
    BandPowers { p_delta, p_theta, p_alpha, p_beta, p_total: p_delta + p_theta + p_alpha + p_beta }
}

/// Relative band powers, summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativePowers {
    pub delta: f64,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
}

pub fn relative_powers(bp: &BandPowers) -> Result<RelativePowers> {
    if !(bp.p_total > 0.0) {
        return Err(Error::Degenerate("total band power is zero".into()));
    }
    Ok(RelativePowers {
        delta: bp.p_delta / bp.p_total,
        theta: bp.p_theta / bp.p_total,
        alpha: bp.p_alpha / bp.p_total,
        beta: bp.p_beta / bp.p_total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRatios {
    pub pri: f64,
    pub dar: f64,
    pub tar: f64,
    pub tbar: f64,
}

fn ratio(num: f64, den: f64, name: &'static str) -> Result<f64> {
    if den == 0.0 {
        Err(Error::ZeroDenominator(name))
    } else {
        Ok(num / den)
    }
}

pub fn power_ratios(rp: &RelativePowers) -> Result<PowerRatios> {
    Ok(PowerRatios {
        pri: ratio(rp.delta + rp.theta, rp.alpha + rp.beta, "PRI")?,
        dar: ratio(rp.delta, rp.alpha, "DAR")?,
        tar: ratio(rp.theta, rp.alpha, "TAR")?,
        tbar: ratio(rp.theta, rp.beta + rp.alpha, "TBAR")?,
    })
}

/// The eight scalar spectral features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum SpectralFeature {
    RpDelta,
    RpTheta,
    RpAlpha,
    RpBeta,
    Pri,
    Dar,
    Tar,
    Tbar,
}

impl SpectralFeature {
    pub const ALL: [SpectralFeature; 8] = [
        SpectralFeature::RpDelta,
        SpectralFeature::RpTheta,
        SpectralFeature::RpAlpha,
        SpectralFeature::RpBeta,
        SpectralFeature::Pri,
        SpectralFeature::Dar,
        SpectralFeature::Tar,
        SpectralFeature::Tbar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpectralFeature::RpDelta => "rp_delta",
            SpectralFeature::RpTheta => "rp_theta",
            SpectralFeature::RpAlpha => "rp_alpha",
            SpectralFeature::RpBeta => "rp_beta",
            SpectralFeature::Pri => "pri",
            SpectralFeature::Dar => "dar",
            SpectralFeature::Tar => "tar",
            SpectralFeature::Tbar => "tbar",
        }
    }

    /// Slowing lowers alpha and beta relative power; every other feature rises.
    pub fn rises_with_slowing(self) -> bool {
        !matches!(self, SpectralFeature::RpAlpha | SpectralFeature::RpBeta)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SpectralFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpectralFeature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' ', '_'], "");
        SpectralFeature::ALL
            .into_iter()
            .find(|f| f.name().replace('_', "") == key)
            .ok_or_else(|| Error::invalid(format!("unknown spectral feature {s:?}")))
    }
}

/// Relative powers and power ratios of one single-channel window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralFeatures {
    pub rp: RelativePowers,
    pub ratios: PowerRatios,
}

impl SpectralFeatures {
    pub fn from_band_powers(bp: &BandPowers) -> Result<Self> {
        let rp = relative_powers(bp)?;
        let ratios = power_ratios(&rp)?;
        Ok(SpectralFeatures { rp, ratios })
    }

    /// Features of a 640-sample window.
    pub fn from_window(x: &[f64]) -> Result<Self> {
        Self::from_band_powers(&band_powers(&periodogram(x)?))
    }

    /// Like [`Self::from_spectrum`] but never fails: a window without power
    /// maps to all zeros and vanishing denominators cap the ratio at
    /// [`RATIO_CAP`].
    pub fn from_spectrum_lenient(spec: &[f64]) -> Self {
        let bp = band_powers(spec);
        let Ok(rp) = relative_powers(&bp) else {
            let zero = RelativePowers { delta: 0.0, theta: 0.0, alpha: 0.0, beta: 0.0 };
            let ratios = PowerRatios { pri: 0.0, dar: 0.0, tar: 0.0, tbar: 0.0 };
            return SpectralFeatures { rp: zero, ratios };
        };
        let capped = |num: f64, den: f64| {
            if den > 0.0 {
                (num / den).min(RATIO_CAP)
            } else if num > 0.0 {
                RATIO_CAP
            } else {
                0.0
            }
        };
        let ratios = PowerRatios {
            pri: capped(rp.delta + rp.theta, rp.alpha + rp.beta),
            dar: capped(rp.delta, rp.alpha),
            tar: capped(rp.theta, rp.alpha),
            tbar: capped(rp.theta, rp.beta + rp.alpha),
        };
        SpectralFeatures { rp, ratios }
    }

    pub fn from_spectrum(spec: &[f64]) -> Result<Self> {
        Self::from_band_powers(&band_powers(spec))
    }

    pub fn get(&self, feature: SpectralFeature) -> f64 {
        match feature {
            SpectralFeature::RpDelta => self.rp.delta,
            SpectralFeature::RpTheta => self.rp.theta,
            SpectralFeature::RpAlpha => self.rp.alpha,
            SpectralFeature::RpBeta => self.rp.beta,
            SpectralFeature::Pri => self.ratios.pri,
            SpectralFeature::Dar => self.ratios.dar,
            SpectralFeature::Tar => self.ratios.tar,
            SpectralFeature::Tbar => self.ratios.tbar,
        }
    }

    /// Feature vector in [`SpectralFeature::ALL`] order.
    pub fn to_array(&self) -> [f64; 8] {
        SpectralFeature::ALL.map(|f| self.get(f))
    }
}

/// Smoothed [0, 30) Hz spectrum fed to the CNN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnSpectrum(pub Vec<f64>);

impl CnnSpectrum {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Centered moving average of odd length with the window truncated at the edges.
pub fn moving_average(x: &[f64], len: usize) -> Vec<f64> {
    let half = len / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Smooths the first [`CNN_BINS`] bins of a full periodogram.
pub fn cnn_spectrum_from_periodogram(spec: &[f64]) -> CnnSpectrum {
    CnnSpectrum(moving_average(&spec[..CNN_BINS], CNN_SMOOTHING))
}

pub fn cnn_spectrum(x: &[f64]) -> Result<CnnSpectrum> {
    Ok(cnn_spectrum_from_periodogram(&periodogram(x)?))
}
