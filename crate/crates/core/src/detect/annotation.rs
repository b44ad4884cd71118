//! Stratified sampling of segments for expert annotation.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bank::WindowBank;
use crate::spectral::SpectralFeature;

pub const ANNOTATION_UNIQUE: usize = 950;
pub const ANNOTATION_DUPLICATES: usize = 50;
pub const PER_EEG_CAP: usize = 20;
pub const HIGH_PRI: f64 = 3.5;
pub const LOW_PRI: f64 = 1.0;
pub const HIGH_SHARE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationCandidate {
    pub site: String,
    pub eeg: String,
    pub window: usize,
    pub start_s: f64,
    /// PRI averaged over channels.
    pub pri: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationItem {
    pub segment: AnnotationCandidate,
    /// Position of the original in the unique selection, for copies.
    pub duplicate_of: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stratum {
    High,
    Ambiguous,
}

fn stratum(pri: f64) -> Option<Stratum> {
    if pri >= HIGH_PRI {
        Some(Stratum::High)
    } else if pri > LOW_PRI {
        Some(Stratum::Ambiguous)
    } else {
        None
    }
}

/// One candidate per window of a bank, with channel-averaged PRI.
pub fn candidates_from_bank(bank: &WindowBank, site: &str, eeg: &str) -> Vec<AnnotationCandidate> {
    let n_ch = bank.n_channels();
    let pri = SpectralFeature::Pri.index();
    bank.features
        .chunks(n_ch)
        .enumerate()
        .map(|(w, ch)| AnnotationCandidate {
            site: site.to_string(),
            eeg: eeg.to_string(),
            window: w,
            start_s: bank.starts_s[w],
            pri: ch.iter().map(|f| f[pri]).sum::<f64>() / n_ch as f64,
        })
        .collect()
}

/// Round-robin over sites so each contributes about equally.
fn take_round_robin(
    pool: &[&AnnotationCandidate],
    want: usize,
    per_eeg: &mut HashMap<String, usize>,
    taken: &mut Vec<AnnotationCandidate>,
) {
    let mut sites: Vec<&str> = pool.iter().map(|c| c.site.as_str()).collect();
    sites.sort_unstable();
    sites.dedup();
    let mut queues: Vec<std::collections::VecDeque<&AnnotationCandidate>> = sites
        .iter()
        .map(|s| pool.iter().copied().filter(|c| c.site == *s).collect())
        .collect();
    let start = taken.len();
    while taken.len() - start < want && queues.iter().any(|q| !q.is_empty()) {
        for q in queues.iter_mut() {
            if taken.len() - start >= want {
                break;
            }
            while let Some(c) = q.pop_front() {
                let n = per_eeg.entry(c.eeg.clone()).or_insert(0);
                if *n < PER_EEG_CAP {
                    *n += 1;
                    taken.push(c.clone());
                    break;
                }
            }
        }
    }
}

/// Picks `n` unique segments (90 % with PRI ≥ 3.5, 10 % with 1 < PRI < 3.5,
/// at most 20 per recording), appends `dup` copies of random picks and
/// shuffles everything. Short strata are topped up from the other one; a
/// short pool yields fewer items with a warning.
pub fn select_annotation_segments(
    pool: &[AnnotationCandidate],
    n: usize,
    dup: usize,
    seed: u64,
) -> Vec<AnnotationItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut high: Vec<&AnnotationCandidate> = pool.iter().filter(|c| stratum(c.pri) == Some(Stratum::High)).collect();
    let mut amb: Vec<&AnnotationCandidate> =
        pool.iter().filter(|c| stratum(c.pri) == Some(Stratum::Ambiguous)).collect();
    high.shuffle(&mut rng);
    amb.shuffle(&mut rng);

    let n_high = (HIGH_SHARE * n as f64).round() as usize;
    let mut per_eeg = HashMap::new();
    let mut chosen = Vec::with_capacity(n + dup);
    take_round_robin(&high, n_high, &mut per_eeg, &mut chosen);
    take_round_robin(&amb, n - n_high, &mut per_eeg, &mut chosen);
    if chosen.len() < n {
        let used: std::collections::HashSet<(String, usize)> =
            chosen.iter().map(|c| (c.eeg.clone(), c.window)).collect();
        let rest: Vec<&AnnotationCandidate> = high
            .iter()
            .chain(&amb)
            .copied()
            .filter(|c| !used.contains(&(c.eeg.clone(), c.window)))
            .collect();
        let missing = n - chosen.len();
        take_round_robin(&rest, missing, &mut per_eeg, &mut chosen);
    }
    if chosen.len() < n {
        log::warn!("only {} qualifying segments available, {n} requested", chosen.len());
    }

    let mut items: Vec<AnnotationItem> =
        chosen.iter().map(|c| AnnotationItem { segment: c.clone(), duplicate_of: None }).collect();
    let mut order: Vec<usize> = (0..chosen.len()).collect();
    order.shuffle(&mut rng);
    for &i in order.iter().take(dup) {
        items.push(AnnotationItem { segment: chosen[i].clone(), duplicate_of: Some(i) });
    }
    items.shuffle(&mut rng);
    items
}
