//! The in-memory multi-channel recording model shared by every stage.

use std::collections::{BTreeMap, HashSet};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Labels of the 19-electrode International 10-20 montage.
pub const TEN_TWENTY: [&str; 19] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T3", "C3", "Cz", "C4", "T4", "T5", "P3", "Pz",
    "P4", "T6", "O1", "O2",
];

/// Alternative names for the temporal electrodes in the modified nomenclature.
const TEN_TWENTY_ALIASES: [(&str, &str); 4] = [("T7", "T3"), ("T8", "T4"), ("P7", "T5"), ("P8", "T6")];

/// Normalizes an EDF-style label ("EEG Fp1-REF", "FP1") to its 10-20 name, if it is one.
pub fn ten_twenty_name(label: &str) -> Option<&'static str> {
    let mut core = label.trim();
    for prefix in ["EEG ", "EEG-", "EEG"] {
        if let Some(rest) = core.strip_prefix(prefix) {
            core = rest.trim();
            break;
        }
    }
    let core = core.split(['-', ' ']).next().unwrap_or("");
    let canon = TEN_TWENTY_ALIASES
        .iter()
        .find(|(alias, _)| alias.eq_ignore_ascii_case(core))
        .map(|(_, name)| *name)
        .unwrap_or(core);
    TEN_TWENTY.iter().copied().find(|name| name.eq_ignore_ascii_case(canon))
}

/// Multi-channel EEG in microvolts, `data` is `[n_channels, n_samples]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub channels: Vec<String>,
    pub fs: f64,
    pub data: Array2<f64>,
    pub meta: BTreeMap<String, String>,
}

impl Recording {
    pub fn new(channels: Vec<String>, fs: f64, data: Array2<f64>) -> Result<Self> {
        let rec = Recording { channels, fs, data, meta: BTreeMap::new() };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::Recording("no channels".into()));
        }
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::Recording(format!("sampling rate must be positive, got {}", self.fs)));
        }
        if self.data.nrows() != self.channels.len() {
            return Err(Error::Recording(format!(
                "{} channel labels for {} data rows",
                self.channels.len(),
                self.data.nrows()
            )));
        }
        let mut seen = HashSet::new();
        for label in &self.channels {
            if !seen.insert(label.as_str()) {
                return Err(Error::Recording(format!("duplicate channel label {label:?}")));
            }
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs
    }

    /// Indices of channels whose labels are not in the 10-20 set. They are kept
    /// and take part in the montage; this only flags them.
    pub fn nonstandard_channels(&self) -> Vec<usize> {
        self.channels
            .iter()
            .enumerate()
            .filter(|(_, label)| ten_twenty_name(label).is_none())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn with_data(&self, data: Array2<f64>, fs: f64) -> Recording {
        Recording { channels: self.channels.clone(), fs, data, meta: self.meta.clone() }
    }

    fn find_channel(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name).or_else(|| {
            let canon = ten_twenty_name(name)?;
            self.channels.iter().position(|c| ten_twenty_name(c) == Some(canon))
        })
    }

    /// Reorders to exactly `names`, matching labels directly or by their
    /// 10-20 name. Extra non-EEG channels are dropped; a missing channel or
    /// an extra 10-20 channel is a mismatch.
    pub fn select_channels(&self, names: &[String]) -> Result<Recording> {
        let picks: Vec<usize> = names
            .iter()
            .map(|n| self.find_channel(n))
            .collect::<Option<_>>()
            .ok_or_else(|| self.mismatch(names))?;
        let extra = (0..self.n_channels()).filter(|i| !picks.contains(i)).collect::<Vec<_>>();
        if extra.iter().any(|&i| ten_twenty_name(&self.channels[i]).is_some()) {
            return Err(self.mismatch(names));
        }
        if !extra.is_empty() {
            log::warn!("dropping {} non-EEG channel(s)", extra.len());
        }
        let data = self.data.select(ndarray::Axis(0), &picks);
        Ok(Recording { channels: names.to_vec(), fs: self.fs, data, meta: self.meta.clone() })
    }

    fn mismatch(&self, names: &[String]) -> Error {
        Error::ModelInputMismatch {
            expected: format!("{} channels [{}]", names.len(), names.join(", ")),
            found: format!("{} channels [{}]", self.n_channels(), self.channels.join(", ")),
        }
    }
}
