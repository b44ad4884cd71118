//! Cross-validation over preprocessed subjects.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use super::{detector_stats, fit_detectors, SubjectData, SystemConfig, TrainedSystem};
use crate::detect::{ChannelDetector, SystemKind};
use crate::error::{Error, Result};
use crate::eval::{Fold, FoldOutput, FoldRunner, Level, SubjectId};

type Stats = Arc<Vec<Vec<f64>>>;

/// Detectors fitted on one channel pool, with the statistics they produced.
struct Fitted {
    detectors: Vec<ChannelDetector>,
    stats: Mutex<HashMap<SubjectId, Stats>>,
}

/// Runs folds against an in-memory cohort. Supervised detectors depend only
/// on their channel pool, so folds sharing a pool reuse one fit.
pub struct CohortRunner<'a> {
    subjects: BTreeMap<SubjectId, &'a SubjectData>,
    cfg: SystemConfig,
    cache: Mutex<HashMap<Vec<SubjectId>, Arc<Fitted>>>,
}

impl<'a> CohortRunner<'a> {
    pub fn new(subjects: &'a [SubjectData], cfg: SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let mut map = BTreeMap::new();
        for s in subjects {
            if map.insert(s.id.clone(), s).is_some() {
                return Err(Error::invalid(format!("duplicate subject {}", s.id)));
            }
        }
        Ok(CohortRunner { subjects: map, cfg, cache: Mutex::new(HashMap::new()) })
    }

    pub fn ids(&self) -> Vec<SubjectId> {
        self.subjects.keys().cloned().collect()
    }

    fn resolve(&self, ids: &[SubjectId]) -> Result<Vec<&'a SubjectData>> {
        ids.iter()
            .map(|id| self.subjects.get(id).copied().ok_or_else(|| Error::invalid(format!("unknown subject {id}"))))
            .collect()
    }

    fn fitted(&self, fold: &Fold, channel_pool: &[&SubjectData], eeg_pool: &[&SubjectData]) -> Result<Arc<Fitted>> {
        // the unsupervised normalizer also depends on the recording-level pool
        let mut key = fold.channel_train.clone();
        if self.cfg.system == SystemKind::Uls {
            key.push(SubjectId::new("\u{0}", "eeg"));
            key.extend(fold.eeg_train.iter().cloned());
        }
        if let Some(f) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(f));
        }
        let detectors = fit_detectors(&self.cfg, channel_pool, eeg_pool)?;
        let fitted = Arc::new(Fitted { detectors, stats: Mutex::new(HashMap::new()) });
        self.cache.lock().expect("cache lock").insert(key, Arc::clone(&fitted));
        Ok(fitted)
    }

    fn stats(&self, fitted: &Fitted, s: &SubjectData) -> Result<Stats> {
        if let Some(st) = fitted.stats.lock().expect("stats lock").get(&s.id) {
            return Ok(Arc::clone(st));
        }
        let st = Arc::new(detector_stats(&fitted.detectors, &s.bank)?);
        fitted.stats.lock().expect("stats lock").insert(s.id.clone(), Arc::clone(&st));
        Ok(st)
    }

    /// Fits the full system for one fold.
    pub fn fit_fold(&self, fold: &Fold, level: Level) -> Result<(TrainedSystem, Arc<FittedHandle>)> {
        let channel_pool = self.resolve(&fold.channel_train)?;
        let eeg_pool = self.resolve(&fold.eeg_train)?;
        let fitted = self.fitted(fold, &channel_pool, &eeg_pool)?;
        let pool = if level == Level::Eeg { &eeg_pool } else { &channel_pool };
        let stats: Vec<Vec<Vec<f64>>> =
            pool.iter().map(|s| Ok(self.stats(&fitted, s)?.as_ref().clone())).collect::<Result<_>>()?;
        let channels = pool
            .first()
            .or(channel_pool.first())
            .map(|s| s.bank.channels.clone())
            .ok_or_else(|| Error::invalid(format!("fold {} has no training data", fold.name)))?;
        let system =
            TrainedSystem::fit_classifier(&self.cfg, level, channels, fitted.detectors.clone(), pool, &stats)?;
        Ok((system, Arc::new(FittedHandle(fitted))))
    }
}

/// Opaque handle to cached detector statistics.
pub struct FittedHandle(Arc<Fitted>);

impl FoldRunner for CohortRunner<'_> {
    fn run_fold(&self, fold: &Fold, level: Level) -> Result<FoldOutput> {
        let (system, handle) = self.fit_fold(fold, level)?;
        let mut out = FoldOutput::default();
        for s in self.resolve(&fold.test)? {
            match level {
                Level::Channel => {
                    let scores = system.channel_scores(&s.bank)?;
                    for (e, l) in s.channel_samples() {
                        out.scores.push(scores[e]);
                        out.labels.push(l);
                    }
                }
                Level::Segment => {
                    let stats = self.stats(&handle.0, s)?;
                    let scores = system.segment_scores_from(&stats, s.bank.n_channels())?;
                    for (w, l) in s.segment_samples() {
                        out.scores.push(scores[w]);
                        out.labels.push(l);
                    }
                }
                Level::Eeg => {
                    let Some(label) = s.eeg_label else { continue };
                    let stats = self.stats(&handle.0, s)?;
                    out.scores.push(system.eeg_score_from(&stats)?);
                    out.labels.push(label);
                }
            }
        }
        Ok(out)
    }
}
