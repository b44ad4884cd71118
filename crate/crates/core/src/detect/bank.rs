//! Per-window spectral quantities of a whole recording, computed once and
//! shared by every detector.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::preprocess::{prepare, PreprocessConfig, Prepared};
use crate::recording::Recording;
use crate::spectral::{cnn_spectrum_from_periodogram, periodogram, SpectralFeatures, CNN_BINS};

/// Spectral features and CNN input spectra for every (window, channel)
/// pair, stored window-major: entry `w * n_channels + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBank {
    pub channels: Vec<String>,
    pub starts_s: Vec<f64>,
    pub features: Vec<[f64; 8]>,
    /// `CNN_BINS` values per entry.
    pub spectra: Vec<f32>,
}

impl WindowBank {
    pub fn from_prepared(p: &Prepared) -> Result<WindowBank> {
        let n_ch = p.rec.n_channels();
        let per_window: Vec<Vec<([f64; 8], Vec<f32>)>> = p
            .spans
            .par_iter()
            .map(|span| {
                (0..n_ch)
                    .map(|c| {
                        let spec = periodogram(p.window(c, span))?;
                        let feats = SpectralFeatures::from_spectrum_lenient(&spec).to_array();
                        let cnn = cnn_spectrum_from_periodogram(&spec).0.iter().map(|&v| v as f32).collect();
                        Ok((feats, cnn))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut features = Vec::with_capacity(p.spans.len() * n_ch);
        let mut spectra = Vec::with_capacity(p.spans.len() * n_ch * CNN_BINS);
        for window in per_window {
            for (f, s) in window {
                features.push(f);
                spectra.extend(s);
            }
        }
        Ok(WindowBank {
            channels: p.rec.channels.clone(),
            starts_s: p.spans.iter().map(|s| s.start_s).collect(),
            features,
            spectra,
        })
    }

    /// Preprocesses and windows a raw recording.
    pub fn from_recording(rec: &Recording, cfg: &PreprocessConfig) -> Result<WindowBank> {
        WindowBank::from_prepared(&prepare(rec, cfg)?)
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_windows(&self) -> usize {
        self.starts_s.len()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index(&self, window: usize, channel: usize) -> usize {
        window * self.n_channels() + channel
    }

    pub fn spectrum(&self, entry: usize) -> &[f32] {
        &self.spectra[entry * CNN_BINS..(entry + 1) * CNN_BINS]
    }

    /// Keeps only the listed windows.
    pub fn select_windows(&self, windows: &[usize]) -> Result<WindowBank> {
        let n_ch = self.n_channels();
        if let Some(&w) = windows.iter().find(|&&w| w >= self.n_windows()) {
            return Err(Error::invalid(format!("window {w} out of range")));
        }
        let mut out = WindowBank {
            channels: self.channels.clone(),
            starts_s: windows.iter().map(|&w| self.starts_s[w]).collect(),
            features: Vec::with_capacity(windows.len() * n_ch),
            spectra: Vec::with_capacity(windows.len() * n_ch * CNN_BINS),
        };
        for &w in windows {
            let range = self.index(w, 0)..self.index(w, 0) + n_ch;
            out.features.extend_from_slice(&self.features[range.clone()]);
            out.spectra.extend_from_slice(&self.spectra[range.start * CNN_BINS..range.end * CNN_BINS]);
        }
        Ok(out)
    }
}
