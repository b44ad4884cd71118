//! The three slowing-detection systems end to end.
//!
//! A system is a channel-level detector (spectral threshold, shallow model
//! or CNN), histogram features built from its outputs, and a shallow
//! classifier (or the percentage-threshold rule) at segment or recording
//! level.

mod data;
mod runner;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cnn::{self, CnnArch, TrainConfig};
use crate::detect::{
    default_threshold_pct, degrees_of_slowing, features_of, fit_uls_normalizer, threshold_classify_eeg,
    threshold_histogram, window_features, ChannelDetector, HistogramFeatures, SlowingDegreeReport, SystemKind,
    ThresholdMode, WindowBank, BIN_CHOICES, SLOW_SCORE_CUTOFF, ULS_POOL_SIZE,
};
use crate::error::{Error, Result};
use crate::eval::Level;
use crate::preprocess::PreprocessConfig;
use crate::recording::Recording;
use crate::shallow::{FeatureMatrix, ShallowKind, ShallowModel};
use crate::spectral::{SpectralFeature, CNN_BINS};

pub use data::{cap_samples, SubjectData};
pub use runner::CohortRunner;

/// Percentage-threshold rule used instead of a trained recording classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdRule {
    pub mode: ThresholdMode,
    /// Defaults to the system's tabulated value.
    #[serde(default)]
    pub theta_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub system: SystemKind,
    pub bins: usize,
    /// Spectral features histogrammed by the unsupervised system.
    pub uls_features: Vec<SpectralFeature>,
    /// Channel threshold for the unsupervised system; defaults to the
    /// slow-side 3-sigma limit of the slow-free pool.
    pub uls_theta: Option<f64>,
    /// Channel-level learner of the shallow system.
    pub channel_classifier: ShallowKind,
    /// Segment- or recording-level learner.
    pub classifier: ShallowKind,
    pub cnn_arch: CnnArch,
    /// Pick the architecture by validation loss over the desk grid.
    pub cnn_grid: bool,
    pub train: TrainConfig,
    /// Channel-level training samples drawn per subject.
    pub channel_cap: Option<usize>,
    /// Segment-level training samples drawn per subject.
    pub segment_cap: Option<usize>,
    pub threshold_rule: Option<ThresholdRule>,
    pub slow_score_cutoff: f64,
    pub preprocess: PreprocessConfig,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            system: SystemKind::Sdls,
            bins: 10,
            uls_features: vec![SpectralFeature::Pri],
            uls_theta: None,
            channel_classifier: ShallowKind::Rf,
            classifier: ShallowKind::Lr,
            cnn_arch: CnnArch::default(),
            cnn_grid: false,
            train: TrainConfig::default(),
            channel_cap: None,
            segment_cap: None,
            threshold_rule: None,
            slow_score_cutoff: SLOW_SCORE_CUTOFF,
            preprocess: PreprocessConfig::default(),
            seed: 0,
        }
    }
}

impl SystemConfig {
    pub fn for_system(system: SystemKind) -> SystemConfig {
        let base = SystemConfig { system, ..SystemConfig::default() };
        match system {
            SystemKind::Uls => SystemConfig { bins: 20, classifier: ShallowKind::Gb, ..base },
            SystemKind::Ssls => SystemConfig { bins: 5, ..base },
            SystemKind::Sdls => base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !BIN_CHOICES.contains(&self.bins) {
            return Err(Error::Config(format!("bins must be one of {BIN_CHOICES:?}, got {}", self.bins)));
        }
        if self.system == SystemKind::Uls && self.uls_features.is_empty() {
            return Err(Error::Config("uls_features is empty".into()));
        }
        if self.channel_cap == Some(0) || self.segment_cap == Some(0) {
            return Err(Error::Config("sample caps must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.slow_score_cutoff) {
            return Err(Error::Config("slow_score_cutoff must lie in [0, 1]".into()));
        }
        self.train.validate()?;
        if !self.cnn_grid {
            self.cnn_arch.validate()?;
        }
        Ok(())
    }
}

/// Histogram-feature statistics of every detector over one bank.
pub fn detector_stats(detectors: &[ChannelDetector], bank: &WindowBank) -> Result<Vec<Vec<f64>>> {
    detectors.iter().map(|d| d.statistics(bank)).collect()
}

fn eeg_row(detectors: &[ChannelDetector], stats: &[Vec<f64>], bins: usize) -> Result<Vec<f64>> {
    let mut row = Vec::new();
    for (d, s) in detectors.iter().zip(stats) {
        if s.is_empty() {
            return Err(Error::Recording("recording has no complete window".into()));
        }
        row.extend(features_of(s, bins, d.domain())?.to_vec());
    }
    Ok(row)
}

fn window_rows(detectors: &[ChannelDetector], stats: &[Vec<f64>], n_ch: usize, bins: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, (d, s)) in detectors.iter().zip(stats).enumerate() {
        let per_window = window_features(s, n_ch, bins, d.domain())?;
        if k == 0 {
            rows = per_window.iter().map(HistogramFeatures::to_vec).collect();
        } else {
            rows.iter_mut().zip(&per_window).for_each(|(r, f)| r.extend(f.to_vec()));
        }
    }
    Ok(rows)
}

fn feature_names(detectors: &[ChannelDetector], bins: usize) -> Vec<String> {
    detectors
        .iter()
        .enumerate()
        .flat_map(|(k, d)| {
            let tag = match d {
                ChannelDetector::UlsThreshold { feature, .. } => feature.name().to_string(),
                other => format!("{}{k}", other.name()),
            };
            HistogramFeatures::names(bins, d.domain()).into_iter().map(move |n| format!("{tag}:{n}"))
        })
        .collect()
}

fn common_channels(pool: &[&SubjectData]) -> Result<Vec<String>> {
    let first = pool.first().ok_or_else(|| Error::invalid("empty training pool"))?;
    if let Some(s) = pool.iter().find(|s| s.bank.channels != first.bank.channels) {
        return Err(Error::ModelInputMismatch {
            expected: first.bank.channels.join(","),
            found: format!("{}: {}", s.id, s.bank.channels.join(",")),
        });
    }
    Ok(first.bank.channels.clone())
}

/// Fits the channel-level detector(s) of `cfg.system`.
///
/// `channel_pool` supplies annotated channels; the unsupervised system
/// instead draws slow-free recordings from `channel_pool` and `eeg_pool`.
pub fn fit_detectors(
    cfg: &SystemConfig,
    channel_pool: &[&SubjectData],
    eeg_pool: &[&SubjectData],
) -> Result<Vec<ChannelDetector>> {
    cfg.validate()?;
    match cfg.system {
        SystemKind::Uls => {
            let mut slow_free: Vec<&SubjectData> = Vec::new();
            for s in channel_pool.iter().chain(eeg_pool) {
                if s.eeg_label == Some(0) && !slow_free.iter().any(|o| o.id == s.id) {
                    slow_free.push(s);
                }
            }
            slow_free.sort_by(|a, b| a.id.cmp(&b.id));
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            slow_free.shuffle(&mut rng);
            slow_free.truncate(ULS_POOL_SIZE);
            let owned: Vec<WindowBank>;
            let banks: Vec<&WindowBank> = if slow_free.is_empty() {
                // no labeled slow-free recordings: use slow-free annotated windows
                owned = channel_pool
                    .iter()
                    .filter_map(|s| {
                        let w: Vec<usize> = s.segment_samples().into_iter().filter(|x| x.1 == 0).map(|x| x.0).collect();
                        (!w.is_empty()).then(|| s.bank.select_windows(&w))
                    })
                    .collect::<Result<_>>()?;
                owned.iter().collect()
            } else {
                slow_free.iter().map(|s| &s.bank).collect()
            };
            cfg.uls_features
                .iter()
                .map(|&feature| {
                    let norm = fit_uls_normalizer(&banks, feature)?;
                    Ok(ChannelDetector::UlsThreshold {
                        feature,
                        theta: cfg.uls_theta.unwrap_or_else(|| norm.default_threshold()),
                        normalizer: Some(norm),
                    })
                })
                .collect()
        }
        SystemKind::Ssls | SystemKind::Sdls => {
            let mut entries: Vec<(&SubjectData, usize)> = Vec::new();
            let mut y = Vec::new();
            let mut sorted: Vec<&SubjectData> = channel_pool.to_vec();
            sorted.sort_by(|a, b| a.id.cmp(&b.id));
            for s in sorted {
                for (e, l) in cap_samples(s.channel_samples(), cfg.channel_cap, cfg.seed, &s.id) {
                    entries.push((s, e));
                    y.push(l);
                }
            }
            if entries.is_empty() {
                return Err(Error::invalid("no annotated channels in the training pool"));
            }
            log::info!(
                "channel detector: {} samples ({} slowing)",
                y.len(),
                y.iter().filter(|&&l| l == 1).count()
            );
            if cfg.system == SystemKind::Ssls {
                let rows: Vec<Vec<f64>> = entries.iter().map(|(s, e)| s.bank.features[*e].to_vec()).collect();
                let names = SpectralFeature::ALL.iter().map(|f| f.name().to_string()).collect();
                let data = FeatureMatrix::from_rows(&rows, y, names)?;
                let model = ShallowModel::fit(cfg.channel_classifier, &data, cfg.seed)?;
                Ok(vec![ChannelDetector::Shallow { model }])
            } else {
                let rows: Vec<Vec<f64>> = entries
                    .iter()
                    .map(|(s, e)| s.bank.spectrum(*e).iter().map(|&v| f64::from(v)).collect())
                    .collect();
                debug_assert!(rows.iter().all(|r| r.len() == CNN_BINS));
                let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
                let train_cfg = TrainConfig { seed: cfg.seed ^ cfg.train.seed, ..cfg.train.clone() };
                let arch = if cfg.cnn_grid {
                    cnn::grid_search(&refs, &y, &CnnArch::desk_grid(), &train_cfg)?.best
                } else {
                    cfg.cnn_arch
                };
                let model = cnn::train(&refs, &y, arch, &train_cfg)?;
                Ok(vec![ChannelDetector::Cnn { model }])
            }
        }
    }
}

/// A fitted system, serializable as a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedSystem {
    pub system: SystemKind,
    pub level: Level,
    pub bins: usize,
    pub channels: Vec<String>,
    pub preprocess: PreprocessConfig,
    pub detectors: Vec<ChannelDetector>,
    pub classifier: Option<ShallowModel>,
    pub threshold_rule: Option<ThresholdRule>,
    pub slow_score_cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPrediction {
    pub start_s: f64,
    pub score: f64,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub system: SystemKind,
    pub level: Level,
    pub n_windows: usize,
    pub eeg_score: Option<f64>,
    pub eeg_label: Option<u8>,
    pub segments: Vec<SegmentPrediction>,
    pub degrees: SlowingDegreeReport,
}

impl TrainedSystem {
    /// Fits detectors and the level classifier from scratch.
    pub fn fit(cfg: &SystemConfig, level: Level, channel_pool: &[&SubjectData], eeg_pool: &[&SubjectData]) -> Result<Self> {
        let detectors = fit_detectors(cfg, channel_pool, eeg_pool)?;
        let pool = if level == Level::Eeg { eeg_pool } else { channel_pool };
        let stats: Vec<Vec<Vec<f64>>> =
            pool.iter().map(|s| detector_stats(&detectors, &s.bank)).collect::<Result<_>>()?;
        let channels = common_channels(if channel_pool.is_empty() { eeg_pool } else { channel_pool })?;
        TrainedSystem::fit_classifier(cfg, level, channels, detectors, pool, &stats)
    }

    /// Fits the segment- or recording-level stage on top of fitted detectors.
    /// `stats[i]` are the detector statistics of `pool[i]`.
    pub fn fit_classifier(
        cfg: &SystemConfig,
        level: Level,
        channels: Vec<String>,
        detectors: Vec<ChannelDetector>,
        pool: &[&SubjectData],
        stats: &[Vec<Vec<f64>>],
    ) -> Result<Self> {
        let mut out = TrainedSystem {
            system: cfg.system,
            level,
            bins: cfg.bins,
            channels,
            preprocess: cfg.preprocess.clone(),
            detectors,
            classifier: None,
            threshold_rule: None,
            slow_score_cutoff: cfg.slow_score_cutoff,
        };
        let names = feature_names(&out.detectors, cfg.bins);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        match level {
            Level::Channel => return Ok(out),
            Level::Eeg if cfg.threshold_rule.is_some() => {
                out.threshold_rule = cfg.threshold_rule;
                return Ok(out);
            }
            Level::Eeg => {
                for (s, st) in pool.iter().zip(stats) {
                    if let Some(l) = s.eeg_label {
                        rows.push(eeg_row(&out.detectors, st, cfg.bins)?);
                        y.push(l);
                    }
                }
            }
            Level::Segment => {
                for (s, st) in pool.iter().zip(stats) {
                    let samples = cap_samples(s.segment_samples(), cfg.segment_cap, cfg.seed, &s.id);
                    if samples.is_empty() {
                        continue;
                    }
                    let all = window_rows(&out.detectors, st, s.bank.n_channels(), cfg.bins)?;
                    for (w, l) in samples {
                        rows.push(all[w].clone());
                        y.push(l);
                    }
                }
            }
        }
        if rows.is_empty() {
            return Err(Error::invalid(format!("no {level} labels in the training pool")));
        }
        let data = FeatureMatrix::from_rows(&rows, y, names)?;
        out.classifier = Some(ShallowModel::fit(cfg.classifier, &data, cfg.seed)?);
        Ok(out)
    }

    fn check_bank(&self, bank: &WindowBank) -> Result<()> {
        if bank.channels != self.channels {
            return Err(Error::ModelInputMismatch {
                expected: format!("{} channels [{}]", self.channels.len(), self.channels.join(", ")),
                found: format!("{} channels [{}]", bank.channels.len(), bank.channels.join(", ")),
            });
        }
        Ok(())
    }

    /// Preprocesses a raw recording with the model's settings and channel order.
    pub fn bank(&self, rec: &Recording) -> Result<WindowBank> {
        let rec = rec.select_channels(&self.channels)?;
        WindowBank::from_recording(&rec, &self.preprocess)
    }

    /// Channel-level scores of the primary detector, one per bank entry.
    pub fn channel_scores(&self, bank: &WindowBank) -> Result<Vec<f64>> {
        self.check_bank(bank)?;
        self.detectors[0].scores(bank)
    }

    fn classifier(&self) -> Result<&ShallowModel> {
        self.classifier.as_ref().ok_or_else(|| Error::invalid(format!("model was trained at {} level", self.level)))
    }

    /// One score per window from precomputed detector statistics.
    pub fn segment_scores_from(&self, stats: &[Vec<f64>], n_channels: usize) -> Result<Vec<f64>> {
        let model = self.classifier()?;
        window_rows(&self.detectors, stats, n_channels, self.bins)?
            .iter()
            .map(|r| model.predict_score(r))
            .collect()
    }

    pub fn segment_scores(&self, bank: &WindowBank) -> Result<Vec<f64>> {
        self.check_bank(bank)?;
        if self.level != Level::Segment {
            return Err(Error::invalid(format!("model was trained at {} level", self.level)));
        }
        self.segment_scores_from(&detector_stats(&self.detectors, bank)?, bank.n_channels())
    }

    /// Recording score from precomputed detector statistics. The threshold
    /// rule yields 0 or 1.
    pub fn eeg_score_from(&self, stats: &[Vec<f64>]) -> Result<f64> {
        if let Some(rule) = self.threshold_rule {
            let theta = rule.theta_pct.unwrap_or_else(|| default_threshold_pct(self.system, rule.mode));
            let hist = threshold_histogram(&stats[0], self.detectors[0].domain())?;
            return Ok(f64::from(threshold_classify_eeg(&hist, rule.mode, theta)?));
        }
        self.classifier()?.predict_score(&eeg_row(&self.detectors, stats, self.bins)?)
    }

    pub fn eeg_score(&self, bank: &WindowBank) -> Result<f64> {
        self.check_bank(bank)?;
        if self.level != Level::Eeg {
            return Err(Error::invalid(format!("model was trained at {} level", self.level)));
        }
        self.eeg_score_from(&detector_stats(&self.detectors, bank)?)
    }

    /// Full report for one raw recording.
    pub fn predict(&self, rec: &Recording) -> Result<Prediction> {
        let bank = self.bank(rec)?;
        self.predict_bank(&bank)
    }

    pub fn predict_bank(&self, bank: &WindowBank) -> Result<Prediction> {
        self.check_bank(bank)?;
        if bank.is_empty() {
            return Err(Error::Recording("recording has no complete window".into()));
        }
        let stats = detector_stats(&self.detectors, bank)?;
        let (eeg_score, segments) = match self.level {
            Level::Eeg => (Some(self.eeg_score_from(&stats)?), Vec::new()),
            Level::Segment => {
                let scores = self.segment_scores_from(&stats, bank.n_channels())?;
                let segs = bank
                    .starts_s
                    .iter()
                    .zip(scores)
                    .map(|(&start_s, score)| SegmentPrediction { start_s, score, label: u8::from(score > 0.5) })
                    .collect();
                (None, segs)
            }
            Level::Channel => (None, Vec::new()),
        };
        Ok(Prediction {
            system: self.system,
            level: self.level,
            n_windows: bank.n_windows(),
            eeg_score,
            eeg_label: eeg_score.map(|s| u8::from(s > 0.5)),
            segments,
            degrees: degrees_of_slowing(bank, &self.detectors[0], self.slow_score_cutoff)?,
        })
    }
}
