//! Classification metrics and rater agreement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    /// Predicts 1 when the score exceeds `threshold`.
    pub fn from_scores(scores: &[f64], labels: &[u8], threshold: f64) -> Confusion {
        let mut c = Confusion::default();
        for (&s, &l) in scores.iter().zip(labels) {
            match (s > threshold, l == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    fn ratio(num: usize, den: usize) -> f64 {
        if den == 0 {
            f64::NAN
        } else {
            num as f64 / den as f64
        }
    }

    pub fn sen(&self) -> f64 {
        Self::ratio(self.tp, self.tp + self.fn_)
    }

    pub fn spe(&self) -> f64 {
        Self::ratio(self.tn, self.tn + self.fp)
    }

    pub fn acc(&self) -> f64 {
        Self::ratio(self.tp + self.tn, self.total())
    }

    pub fn bac(&self) -> f64 {
        (self.sen() + self.spe()) / 2.0
    }
}

/// The six reported metrics. Threshold-free metrics are absent when only
/// one class is present; undefined rates are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub auc: Option<f64>,
    pub auprc: Option<f64>,
    pub acc: f64,
    pub bac: f64,
    pub sen: f64,
    pub spe: f64,
    pub confusion: Confusion,
}

/// Groups equal scores, highest first: `(score, positives, negatives)`.
fn tie_groups(scores: &[f64], labels: &[u8]) -> Vec<(usize, usize)> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut last = f64::NAN;
    for i in idx {
        if groups.is_empty() || scores[i] != last {
            groups.push((0, 0));
            last = scores[i];
        }
        let g = groups.last_mut().expect("pushed");
        if labels[i] == 1 {
            g.0 += 1;
        } else {
            g.1 += 1;
        }
    }
    groups
}

/// Area under the ROC curve as the Mann-Whitney statistic, ties counted half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut negatives_below = neg as f64;
    let mut wins = 0.0;
    for (p, n) in tie_groups(scores, labels) {
        negatives_below -= n as f64;
        wins += p as f64 * (negatives_below + 0.5 * n as f64);
    }
    Some(wins / (pos as f64 * neg as f64))
}

/// Step-wise area under the precision-recall curve (average precision),
/// one step per distinct score.
pub fn auprc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == labels.len() {
        return None;
    }
    let (mut tp, mut fp, mut area) = (0usize, 0usize, 0.0);
    for (p, n) in tie_groups(scores, labels) {
        tp += p;
        fp += n;
        area += (p as f64 / pos as f64) * (tp as f64 / (tp + fp) as f64);
    }
    Some(area)
}

pub fn metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Result<MetricSet> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    let c = Confusion::from_scores(scores, labels, threshold);
    Ok(MetricSet {
        auc: auc(scores, labels),
        auprc: auprc(scores, labels),
        acc: c.acc(),
        bac: c.bac(),
        sen: c.sen(),
        spe: c.spe(),
        confusion: c,
    })
}

/// Percentage of positions where both annotation passes agree.
pub fn intra_rater_agreement(a: &[u8], b: &[u8]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid(format!("cannot compare {} and {} labels", a.len(), b.len())));
    }
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(100.0 * same as f64 / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_arithmetic() {
        let c = Confusion { tp: 8, fn_: 2, tn: 9, fp: 1 };
        assert_eq!(c.sen(), 0.8);
        assert_eq!(c.spe(), 0.9);
        assert!((c.bac() - 0.85).abs() < 1e-15);
        assert!((c.acc() - 0.85).abs() < 1e-15);
    }

    #[test]
    fn auc_cases() {
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]), Some(1.0));
        assert_eq!(auc(&[0.5; 4], &[1, 0, 1, 0]), Some(0.5));
        assert_eq!(auc(&[0.1, 0.2], &[1, 1]), None);
        // one inversion out of four pairs
        assert_eq!(auc(&[0.9, 0.3, 0.4, 0.1], &[1, 1, 0, 0]), Some(0.75));
    }

    #[test]
    fn auprc_cases() {
        assert_eq!(auprc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]), Some(1.0));
        // ranking 1,0,1 -> AP = 0.5*1 + 0.5*(2/3)
        let ap = auprc(&[0.9, 0.5, 0.3], &[1, 0, 1]).unwrap();
        assert!((ap - (0.5 + 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn agreement() {
        assert_eq!(intra_rater_agreement(&[1, 0, 1], &[1, 0, 1]).unwrap(), 100.0);
        assert_eq!(intra_rater_agreement(&[1, 0], &[0, 1]).unwrap(), 0.0);
        let a: Vec<u8> = (0..50).map(|i| u8::from(i % 2 == 0)).collect();
        let b: Vec<u8> = a.iter().enumerate().map(|(i, &v)| if i < 14 { 1 - v } else { v }).collect();
        assert_eq!(intra_rater_agreement(&a, &b).unwrap(), 72.0);
        assert!(intra_rater_agreement(&[1], &[1, 0]).is_err());
    }
}
