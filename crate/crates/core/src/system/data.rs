//! Labeled per-subject data: a window bank with whatever labels exist.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::detect::WindowBank;
use crate::error::{Error, Result};
use crate::eval::SubjectId;
use crate::preprocess::PreprocessConfig;
use crate::recording::Recording;
use crate::synth::GroundTruth;

#[derive(Debug, Clone)]
pub struct SubjectData {
    pub id: SubjectId,
    pub bank: WindowBank,
    /// Per bank entry: `Some(label)` or `None` for ambiguous channels.
    /// Absent when the subject has no channel annotations.
    pub channel_labels: Option<Vec<Option<u8>>>,
    /// Per bank window.
    pub segment_labels: Option<Vec<u8>>,
    pub eeg_label: Option<u8>,
}

impl SubjectData {
    pub fn unlabeled(id: SubjectId, bank: WindowBank) -> SubjectData {
        SubjectData { id, bank, channel_labels: None, segment_labels: None, eeg_label: None }
    }

    /// Preprocesses `rec` and aligns every surviving window with the
    /// ground truth by its start time.
    pub fn from_truth(rec: &Recording, truth: &GroundTruth, cfg: &PreprocessConfig) -> Result<SubjectData> {
        let bank = WindowBank::from_recording(rec, cfg)?;
        let order: Vec<usize> = bank
            .channels
            .iter()
            .map(|c| truth.channels.iter().position(|t| t == c))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::invalid("ground truth channels do not match the recording"))?;
        let mut channel_labels = Vec::with_capacity(bank.len());
        let mut segment_labels = Vec::with_capacity(bank.n_windows());
        for &start in &bank.starts_s {
            let w = truth
                .window_at(start)
                .ok_or_else(|| Error::invalid(format!("no ground-truth window at {start} s")))?;
            segment_labels.push(truth.segment_labels[w]);
            channel_labels.extend(order.iter().map(|&c| truth.channel_label(w, c)));
        }
        Ok(SubjectData {
            id: SubjectId::new(truth.site.clone(), truth.subject.clone()),
            bank,
            channel_labels: Some(channel_labels),
            segment_labels: Some(segment_labels),
            eeg_label: Some(truth.eeg_label),
        })
    }

    /// `(entry, label)` for every unambiguous channel-window.
    pub fn channel_samples(&self) -> Vec<(usize, u8)> {
        self.channel_labels
            .iter()
            .flat_map(|l| l.iter().enumerate().filter_map(|(i, l)| l.map(|l| (i, l))))
            .collect()
    }

    /// `(window, label)` for every window.
    pub fn segment_samples(&self) -> Vec<(usize, u8)> {
        self.segment_labels.iter().flat_map(|l| l.iter().copied().enumerate()).collect()
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Up to `cap` samples, half from each class where possible, in a
/// deterministic per-subject random order.
pub fn cap_samples(samples: Vec<(usize, u8)>, cap: Option<usize>, seed: u64, id: &SubjectId) -> Vec<(usize, u8)> {
    let Some(cap) = cap else { return samples };
    if samples.len() <= cap {
        return samples;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(&id.to_string()));
    let (mut pos, mut neg): (Vec<_>, Vec<_>) = samples.into_iter().partition(|s| s.1 == 1);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let take_pos = pos.len().min(cap / 2).max(cap.saturating_sub(neg.len()));
    let take_neg = cap - take_pos.min(cap);
    let mut out: Vec<(usize, u8)> = pos.into_iter().take(take_pos).chain(neg.into_iter().take(take_neg)).collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_balances_when_possible() {
        let id = SubjectId::new("a", "1");
        let samples: Vec<(usize, u8)> = (0..100).map(|i| (i, u8::from(i < 10))).collect();
        let out = cap_samples(samples.clone(), Some(30), 1, &id);
        assert_eq!(out.len(), 30);
        assert_eq!(out.iter().filter(|s| s.1 == 1).count(), 10);
        let out = cap_samples(samples, Some(10), 1, &id);
        assert_eq!(out.iter().filter(|s| s.1 == 1).count(), 5);
    }
}
