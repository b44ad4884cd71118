//! Synthetic multi-site EEG cohorts with injected slow-wave bursts and exact
//! ground truth at channel-window, segment and recording level.
//!
//! Background activity is 1/f^α noise plus a posterior-weighted alpha rhythm.
//! Slow events are raised-cosine-tapered sinusoids with an independent
//! random phase per channel, so the average reference does not cancel them.
//! Every label is derived from the event log, never re-estimated.

mod io;

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::detect::{categorize, SlowingCategory};
use crate::error::{Error, Result};
use crate::preprocess::{WINDOW_OVERLAP, WINDOW_S};
use crate::recording::{Recording, TEN_TWENTY};

pub use io::{MANIFEST, read_cohort, read_manifest, write_cohort, Manifest, ManifestEntry};

/// A channel needs more than this share of slow time for the recording to be
/// labeled as slowing.
pub const SLOW_FREE_FLOOR: f64 = 0.11;
/// Share of a window a burst must cover to flag that channel-window.
pub const WINDOW_COVER: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiteProfile {
    pub name: String,
    /// Exponent α of the 1/f^α background spectrum.
    pub one_over_f_exponent: f64,
    /// Background rms in µV.
    pub background_uv: f64,
    /// Alpha rhythm rms relative to background, at the occipital maximum.
    pub alpha_amplitude: f64,
    pub alpha_hz: f64,
    /// Extra low-frequency power, as in [`site_shift`]; 1 leaves it unchanged.
    pub delta_boost: f64,
}

impl Default for SiteProfile {
    fn default() -> Self {
        SiteProfile {
            name: "site".into(),
            one_over_f_exponent: 1.0,
            background_uv: 20.0,
            alpha_amplitude: 1.0,
            alpha_hz: 10.0,
            delta_boost: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlowingSpec {
    /// Burst frequencies are drawn uniformly from this band (Hz).
    pub band_hz: (f64, f64),
    /// Burst rms relative to the channel's background rms. Zero disables
    /// slowing entirely.
    pub amplitude: f64,
    /// Burst durations in seconds.
    pub burst_s: (f64, f64),
    /// Share of subjects with pathological slowing.
    pub prevalence: f64,
    /// Categories drawn uniformly for slowing subjects.
    pub degrees: Vec<SlowingCategory>,
    /// Fixed set of focal channels; drawn at random when empty.
    pub focal_channels: Vec<String>,
    pub focal_count: (usize, usize),
    pub generalized_count: (usize, usize),
    /// Slow-time share per affected channel for persistent slowing.
    pub persistent_coverage: (f64, f64),
    pub intermittent_coverage: (f64, f64),
    /// Probability that a channel of a slow-free subject carries stray bursts.
    pub stray_probability: f64,
    pub stray_coverage: (f64, f64),
}

impl Default for SlowingSpec {
    fn default() -> Self {
        SlowingSpec {
            band_hz: (1.0, 3.5),
            amplitude: 1.5,
            burst_s: (2.0, 8.0),
            prevalence: 0.5,
            degrees: vec![SlowingCategory::Gps, SlowingCategory::Gis, SlowingCategory::Fps, SlowingCategory::Fis],
            focal_channels: Vec::new(),
            focal_count: (3, 6),
            generalized_count: (13, 19),
            persistent_coverage: (0.55, 0.85),
            intermittent_coverage: (0.25, 0.45),
            stray_probability: 0.15,
            stray_coverage: (0.0, 0.06),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub duration_s: f64,
    pub fs: f64,
    pub site: SiteProfile,
    pub slowing: SlowingSpec,
    /// White-noise rms relative to background.
    pub noise_level: f64,
    /// Mains interference amplitude in µV and its frequency.
    pub line_noise_uv: f64,
    pub line_hz: f64,
    /// Large transient artifacts per minute.
    pub artifacts_per_min: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 10,
            duration_s: 60.0,
            fs: 256.0,
            site: SiteProfile::default(),
            slowing: SlowingSpec::default(),
            noise_level: 0.1,
            line_noise_uv: 5.0,
            line_hz: 50.0,
            artifacts_per_min: 0.5,
            seed: 0,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), min: f64, max: f64) -> Result<()> {
    if !(lo <= hi && lo >= min && hi <= max) {
        return Err(Error::Config(format!("{name} range ({lo}, {hi}) outside [{min}, {max}]")));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::Config("n_subjects must be positive".into()));
        }
        if !(self.fs > 0.0) || self.duration_s < WINDOW_S {
            return Err(Error::Config(format!(
                "need fs > 0 and at least {WINDOW_S} s of data (got fs {}, {} s)",
                self.fs, self.duration_s
            )));
        }
        if self.line_hz >= self.fs / 2.0 && self.line_noise_uv != 0.0 {
            return Err(Error::Config("line frequency above Nyquist".into()));
        }
        if self.site.delta_boost < 1.0 {
            return Err(Error::Config("delta_boost must be at least 1".into()));
        }
        let s = &self.slowing;
        check_range("band_hz", s.band_hz, 0.1, self.fs / 2.0)?;
        check_range("persistent_coverage", s.persistent_coverage, 0.0, 1.0)?;
        check_range("intermittent_coverage", s.intermittent_coverage, 0.0, 1.0)?;
        check_range("stray_coverage", s.stray_coverage, 0.0, 1.0)?;
        check_range("prevalence", (s.prevalence, s.prevalence), 0.0, 1.0)?;
        check_range("stray_probability", (s.stray_probability, s.stray_probability), 0.0, 1.0)?;
        let wants_slowing = s.prevalence > 0.0 && s.amplitude > 0.0;
        if wants_slowing && (s.burst_s.1 <= 0.0 || s.degrees.is_empty()) {
            return Err(Error::Config("slowing requested but no burst can be scheduled".into()));
        }
        if s.burst_s.0 < 0.0 || s.burst_s.0 > s.burst_s.1 {
            return Err(Error::Config(format!("invalid burst duration range {:?}", s.burst_s)));
        }
        if s.degrees.contains(&SlowingCategory::SlowFree) {
            return Err(Error::Config("slow-free is not a slowing degree".into()));
        }
        if s.focal_count.0 == 0 || s.focal_count.0 > s.focal_count.1 || s.generalized_count.0 > s.generalized_count.1 {
            return Err(Error::Config("invalid channel count ranges".into()));
        }
        if let Some(c) = s.focal_channels.iter().find(|c| !TEN_TWENTY.contains(&c.as_str())) {
            return Err(Error::Config(format!("focal channel {c:?} is not a montage channel")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstEvent {
    pub channel: usize,
    pub start_s: f64,
    pub duration_s: f64,
    pub freq_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEvent {
    pub channel: usize,
    pub start_s: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub site: String,
    pub subject: String,
    pub channels: Vec<String>,
    pub bursts: Vec<BurstEvent>,
    pub artifacts: Vec<ArtifactEvent>,
    /// Share of the recording covered by bursts, per channel.
    pub coverage: Vec<f64>,
    pub window_starts_s: Vec<f64>,
    /// `[window][channel]`: at least half the window covered.
    pub window_flags: Vec<Vec<bool>>,
    /// 1 when any channel of the window is flagged.
    pub segment_labels: Vec<u8>,
    pub eeg_label: u8,
    pub category: SlowingCategory,
}

impl GroundTruth {
    /// Window index for a window starting at `start_s` on the original timeline.
    pub fn window_at(&self, start_s: f64) -> Option<usize> {
        let hop = WINDOW_S * (1.0 - WINDOW_OVERLAP);
        let i = (start_s / hop).round();
        (i >= 0.0 && (i * hop - start_s).abs() < 1e-6 && (i as usize) < self.window_starts_s.len())
            .then_some(i as usize)
    }

    /// Channel-window label. The event log is exact, so every window is
    /// labeled: partially covered windows below the cover rule count as 0,
    /// which teaches detectors the same boundary the truth uses.
    pub fn channel_label(&self, window: usize, channel: usize) -> Option<u8> {
        Some(u8::from(self.window_flags[window][channel]))
    }
}

/// Length of the overlap between `[a, b)` and the burst intervals.
fn covered(intervals: &[(f64, f64)], a: f64, b: f64) -> f64 {
    intervals.iter().map(|&(s, e)| (e.min(b) - s.max(a)).max(0.0)).sum()
}

fn window_starts(duration_s: f64) -> Vec<f64> {
    let hop = WINDOW_S * (1.0 - WINDOW_OVERLAP);
    let n = ((duration_s - WINDOW_S) / hop + 1e-9).floor() as usize + 1;
    (0..n).map(|i| i as f64 * hop).collect()
}

impl GroundTruth {
    fn from_events(
        site: &str,
        subject: &str,
        channels: &[String],
        duration_s: f64,
        bursts: Vec<BurstEvent>,
        artifacts: Vec<ArtifactEvent>,
    ) -> GroundTruth {
        let n_ch = channels.len();
        let intervals: Vec<Vec<(f64, f64)>> = (0..n_ch)
            .map(|c| {
                bursts
                    .iter()
                    .filter(|b| b.channel == c)
                    .map(|b| (b.start_s, b.start_s + b.duration_s))
                    .collect()
            })
            .collect();
        let coverage: Vec<f64> = intervals.iter().map(|iv| covered(iv, 0.0, duration_s) / duration_s).collect();
        let starts = window_starts(duration_s);
        let window_flags: Vec<Vec<bool>> = starts
            .iter()
            .map(|&t| intervals.iter().map(|iv| covered(iv, t, t + WINDOW_S) >= WINDOW_COVER * WINDOW_S).collect())
            .collect();
        let segment_labels = window_flags.iter().map(|w| u8::from(w.iter().any(|&f| f))).collect();
        let eeg_label = u8::from(coverage.iter().any(|&c| c > SLOW_FREE_FLOOR));
        let category = if eeg_label == 1 { categorize(&coverage) } else { SlowingCategory::SlowFree };
        GroundTruth {
            site: site.to_string(),
            subject: subject.to_string(),
            channels: channels.to_vec(),
            bursts,
            artifacts,
            coverage,
            window_starts_s: starts,
            window_flags,
            segment_labels,
            eeg_label,
            category,
        }
    }
}

/// Relative alpha weight: maximal over occipital sites, minimal frontally.
fn posterior_weight(channel: &str) -> f64 {
    match channel {
        "O1" | "O2" => 1.0,
        "P3" | "P4" | "Pz" | "T5" | "T6" => 0.7,
        "C3" | "C4" | "Cz" | "T3" | "T4" => 0.4,
        _ => 0.2,
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt()
}

/// Shapes white noise in the frequency domain with `gain(f)`.
fn shaped_noise(rng: &mut ChaCha8Rng, n: usize, fs: f64, gain: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = gaussian(rng, n).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let bin = if k <= n / 2 { k } else { n - k };
        *v *= gain(bin as f64 * fs / n as f64);
    }
    inv.process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

fn band_gain(lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    move |f| if f >= lo && f <= hi { 1.0 } else { 0.0 }
}

/// Power of `x` within `[lo, hi]` Hz, from its DFT.
fn band_power(x: &[f64], fs: f64, lo: f64, hi: f64) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let mut p = 0.0;
    for (k, v) in buf.iter().enumerate() {
        let bin = if k <= n / 2 { k } else { n - k };
        let f = bin as f64 * fs / n as f64;
        if f >= lo && f <= hi {
            p += v.norm_sqr();
        }
    }
    p / (n as f64 * n as f64)
}

/// Raised-cosine taper with ramps of a quarter of the burst, at most 0.5 s.
fn taper(i: usize, len: usize, ramp: usize) -> f64 {
    if ramp == 0 {
        return 1.0;
    }
    let edge = i.min(len - 1 - i);
    if edge >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
    }
}

/// Non-overlapping bursts on one channel until `target` of the recording is covered.
fn schedule(
    rng: &mut ChaCha8Rng,
    channel: usize,
    target: f64,
    duration_s: f64,
    spec: &SlowingSpec,
) -> Vec<BurstEvent> {
    let mut need = target * duration_s;
    let mut taken: Vec<(f64, f64)> = Vec::new();
    let mut events = Vec::new();
    let mut attempts = 0;
    while need > 1e-9 && attempts < 10_000 {
        attempts += 1;
        let len = rng.random_range(spec.burst_s.0..=spec.burst_s.1).min(need).min(duration_s);
        if len <= 0.0 {
            break;
        }
        let start = rng.random_range(0.0..=(duration_s - len));
        let end = start + len;
        if taken.iter().any(|&(s, e)| start < e && s < end) {
            continue;
        }
        taken.push((start, end));
        need -= len;
        events.push(BurstEvent {
            channel,
            start_s: start,
            duration_s: len,
            freq_hz: rng.random_range(spec.band_hz.0..=spec.band_hz.1),
        });
    }
    if need > 1e-9 {
        // fall back to filling gaps left to right
        taken.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut t = 0.0;
        let mut gaps = Vec::new();
        for &(s, e) in &taken {
            if s > t {
                gaps.push((t, s));
            }
            t = t.max(e);
        }
        if t < duration_s {
            gaps.push((t, duration_s));
        }
        for (s, e) in gaps {
            if need <= 1e-9 {
                break;
            }
            let len = (e - s).min(need);
            need -= len;
            events.push(BurstEvent {
                channel,
                start_s: s,
                duration_s: len,
                freq_hz: rng.random_range(spec.band_hz.0..=spec.band_hz.1),
            });
        }
    }
    events
}

fn subject_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn pick_channels(rng: &mut ChaCha8Rng, n_ch: usize, count: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n_ch).collect();
    for i in 0..count.min(n_ch) {
        let j = rng.random_range(i..n_ch);
        all.swap(i, j);
    }
    all.truncate(count.min(n_ch));
    all.sort_unstable();
    all
}

/// Draws the event log of one subject.
fn plan_events(rng: &mut ChaCha8Rng, cfg: &SynthConfig, channels: &[String]) -> (Vec<BurstEvent>, Vec<ArtifactEvent>) {
    let s = &cfg.slowing;
    let n_ch = channels.len();
    let dur = cfg.duration_s;
    let slowing = s.amplitude > 0.0 && rng.random::<f64>() < s.prevalence;
    let mut bursts = Vec::new();
    let mut affected = vec![false; n_ch];
    if slowing {
        let degree = s.degrees[rng.random_range(0..s.degrees.len())];
        let generalized = matches!(degree, SlowingCategory::Gps | SlowingCategory::Gis);
        let persistent = matches!(degree, SlowingCategory::Gps | SlowingCategory::Fps);
        let chosen: Vec<usize> = if !generalized && !s.focal_channels.is_empty() {
            s.focal_channels.iter().filter_map(|c| channels.iter().position(|x| x == c)).collect()
        } else {
            let (lo, hi) = if generalized { s.generalized_count } else { s.focal_count };
            let count = rng.random_range(lo..=hi.max(lo));
            pick_channels(rng, n_ch, count)
        };
        let range = if persistent { s.persistent_coverage } else { s.intermittent_coverage };
        for &c in &chosen {
            affected[c] = true;
            let target = rng.random_range(range.0..=range.1);
            bursts.extend(schedule(rng, c, target, dur, s));
        }
    }
    if s.amplitude > 0.0 {
        for c in 0..n_ch {
            if !affected[c] && rng.random::<f64>() < s.stray_probability {
                let target = rng.random_range(s.stray_coverage.0..=s.stray_coverage.1);
                let short = SlowingSpec { burst_s: (s.burst_s.0.min(2.0), s.burst_s.1.min(3.0)), ..s.clone() };
                bursts.extend(schedule(rng, c, target, dur, &short));
            }
        }
    }
    let mut artifacts = Vec::new();
    let expected = cfg.artifacts_per_min * dur / 60.0;
    let n_art = expected.floor() as usize + usize::from(rng.random::<f64>() < expected.fract());
    for _ in 0..n_art {
        let len = rng.random_range(0.3..1.0);
        artifacts.push(ArtifactEvent {
            channel: rng.random_range(0..n_ch),
            start_s: rng.random_range(0.0..(dur - len).max(0.0) + f64::EPSILON),
            duration_s: len,
        });
    }
    (bursts, artifacts)
}

/// Generates subject `index` of the cohort described by `cfg`.
pub fn generate_subject(cfg: &SynthConfig, index: usize) -> Result<(Recording, GroundTruth)> {
    cfg.validate()?;
    let mut rng = subject_rng(cfg.seed, index);
    let channels: Vec<String> = TEN_TWENTY.iter().map(|s| s.to_string()).collect();
    let n_ch = channels.len();
    let fs = cfg.fs;
    let n = (cfg.duration_s * fs).round() as usize;
    let (bursts, artifacts) = plan_events(&mut rng, cfg, &channels);
    let site = &cfg.site;
    let alpha_hz = site.alpha_hz + rng.random_range(-0.5..=0.5);
    let exponent = site.one_over_f_exponent;

    let mut data = Array2::zeros((n_ch, n));
    for (c, name) in channels.iter().enumerate() {
        let mut x = shaped_noise(&mut rng, n, fs, |f| if f < 0.5 { 0.0 } else { f.powf(-exponent / 2.0) });
        let scale = site.background_uv / rms(&x).max(1e-300);
        x.iter_mut().for_each(|v| *v *= scale);
        let alpha = shaped_noise(&mut rng, n, fs, band_gain(alpha_hz - 1.0, alpha_hz + 1.0));
        let a_scale = site.alpha_amplitude * posterior_weight(name) * site.background_uv / rms(&alpha).max(1e-300);
        let white = gaussian(&mut rng, n);
        for t in 0..n {
            x[t] += a_scale * alpha[t] + cfg.noise_level * site.background_uv * white[t];
        }
        let line_phase = rng.random_range(0.0..2.0 * PI);
        for (t, v) in x.iter_mut().enumerate() {
            *v += cfg.line_noise_uv * (2.0 * PI * cfg.line_hz * t as f64 / fs + line_phase).sin();
        }
        let amp = cfg.slowing.amplitude * site.background_uv * 2f64.sqrt();
        for b in bursts.iter().filter(|b| b.channel == c) {
            let start = (b.start_s * fs).round() as usize;
            let len = ((b.duration_s * fs).round() as usize).min(n - start.min(n));
            let ramp = (len / 4).min((0.5 * fs) as usize);
            let phase = rng.random_range(0.0..2.0 * PI);
            for i in 0..len {
                let t = (start + i) as f64 / fs;
                x[start + i] += amp * taper(i, len, ramp) * (2.0 * PI * b.freq_hz * t + phase).sin();
            }
        }
        for a in artifacts.iter().filter(|a| a.channel == c) {
            let start = (a.start_s * fs).round() as usize;
            let len = ((a.duration_s * fs).round() as usize).min(n - start.min(n));
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            for i in 0..len {
                let bump = (PI * i as f64 / len as f64).sin();
                x[start + i] += sign * 15.0 * site.background_uv * bump;
            }
        }
        data.row_mut(c).assign(&ndarray::ArrayView1::from(&x));
    }
    let subject = format!("{}-{:03}", site.name, index);
    let mut rec = Recording::new(channels.clone(), fs, data)?;
    rec.meta.insert("site_id".into(), site.name.clone());
    rec.meta.insert("subject_id".into(), subject.clone());
    if site.delta_boost > 1.0 {
        rec = site_shift(&rec, site.delta_boost, cfg.seed ^ (index as u64).wrapping_mul(0x9E37_79B9))?;
    }
    let truth = GroundTruth::from_events(&site.name, &subject, &channels, cfg.duration_s, bursts, artifacts);
    Ok((rec, truth))
}

/// All subjects of a cohort, generated in parallel with per-subject streams.
pub fn generate_cohort(cfg: &SynthConfig) -> Result<Vec<(Recording, GroundTruth)>> {
    cfg.validate()?;
    (0..cfg.n_subjects).into_par_iter().map(|i| generate_subject(cfg, i)).collect()
}

/// Band of the added low-frequency noise.
pub const SHIFT_BAND_HZ: (f64, f64) = (1.0, 4.0);

/// Adds 1–4 Hz noise to every channel with power `(factor − 1)` times the
/// channel's existing power in that band. Labels are unaffected.
pub fn site_shift(rec: &Recording, factor: f64, seed: u64) -> Result<Recording> {
    if !(factor >= 1.0) {
        return Err(Error::invalid(format!("delta boost factor {factor} below 1")));
    }
    if factor == 1.0 {
        return Ok(rec.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = rec.clone();
    let (lo, hi) = SHIFT_BAND_HZ;
    for mut row in out.data.rows_mut() {
        let x = row.to_vec();
        let p_delta = band_power(&x, rec.fs, lo, hi);
        let noise = shaped_noise(&mut rng, x.len(), rec.fs, band_gain(lo, hi));
        let p_noise = noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64;
        if p_noise <= 0.0 {
            continue;
        }
        let g = ((factor - 1.0) * p_delta / p_noise).sqrt();
        row.iter_mut().zip(&noise).for_each(|(v, e)| *v += g * e);
    }
    Ok(out)
}
