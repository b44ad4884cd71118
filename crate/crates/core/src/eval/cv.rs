//! Leave-one-subject-out and leave-one-institution-out plans, leakage
//! checks and result aggregation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics, MetricSet, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubjectId {
    pub site: String,
    pub subject: String,
}

impl SubjectId {
    pub fn new(site: impl Into<String>, subject: impl Into<String>) -> Self {
        SubjectId { site: site.into(), subject: subject.into() }
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.site, self.subject)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CvMode {
    Loso,
    Loio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Channel,
    Segment,
    Eeg,
}

impl fmt::Display for CvMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CvMode::Loso => "loso",
            CvMode::Loio => "loio",
        })
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Channel => "channel",
            Level::Segment => "segment",
            Level::Eeg => "eeg",
        })
    }
}

impl FromStr for CvMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "loso" => Ok(CvMode::Loso),
            "loio" => Ok(CvMode::Loio),
            _ => Err(Error::invalid(format!("unknown CV mode {s:?}"))),
        }
    }
}

impl FromStr for Level {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "channel" => Ok(Level::Channel),
            "segment" => Ok(Level::Segment),
            "eeg" => Ok(Level::Eeg),
            _ => Err(Error::invalid(format!("unknown level {s:?}"))),
        }
    }
}

/// How a site's data may be used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteRole {
    /// Channel annotations and recording labels.
    Full,
    /// Channel annotations only; never tested or trained on at EEG level.
    ChannelOnly,
    /// Recording labels only; excluded from every training pool except its
    /// own EEG-level LOSO classifier.
    TestOnly,
}

impl SiteRole {
    fn has_channels(self) -> bool {
        matches!(self, SiteRole::Full | SiteRole::ChannelOnly)
    }

    fn has_eeg_labels(self) -> bool {
        matches!(self, SiteRole::Full | SiteRole::TestOnly)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub name: String,
    pub test_site: String,
    pub test: Vec<SubjectId>,
    /// Pool for the channel-level detector.
    pub channel_train: Vec<SubjectId>,
    /// Pool for the segment- or recording-level classifier.
    pub eeg_train: Vec<SubjectId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub mode: CvMode,
    pub level: Level,
    pub roles: BTreeMap<String, SiteRole>,
    pub folds: Vec<Fold>,
}

fn sites_of(subjects: &[SubjectId]) -> BTreeMap<String, Vec<SubjectId>> {
    let mut by_site: BTreeMap<String, Vec<SubjectId>> = BTreeMap::new();
    for s in subjects {
        by_site.entry(s.site.clone()).or_default().push(s.clone());
    }
    for v in by_site.values_mut() {
        v.sort();
        v.dedup();
    }
    by_site
}

fn check_roles(subjects: &[SubjectId], roles: &BTreeMap<String, SiteRole>) -> Result<()> {
    match subjects.iter().find(|s| !roles.contains_key(&s.site)) {
        Some(s) => Err(Error::UnknownSite(s.site.clone())),
        None => Ok(()),
    }
}

fn pool(by_site: &BTreeMap<String, Vec<SubjectId>>, keep: impl Fn(&str) -> bool) -> Vec<SubjectId> {
    by_site.iter().filter(|(s, _)| keep(s)).flat_map(|(_, v)| v.iter().cloned()).collect()
}

impl CvPlan {
    /// One fold per subject, trained within its own site. Test-only sites
    /// borrow a channel detector trained on every site with channel data.
    pub fn loso(subjects: &[SubjectId], roles: &BTreeMap<String, SiteRole>, level: Level) -> Result<CvPlan> {
        check_roles(subjects, roles)?;
        let by_site = sites_of(subjects);
        let mut folds = Vec::new();
        for (site, members) in &by_site {
            let role = roles[site];
            let testable = match level {
                Level::Eeg => role.has_eeg_labels(),
                _ => role.has_channels(),
            };
            if !testable {
                continue;
            }
            for subject in members {
                let others: Vec<SubjectId> = members.iter().filter(|s| *s != subject).cloned().collect();
                let channel_train = if role == SiteRole::TestOnly {
                    pool(&by_site, |s| roles[s].has_channels())
                } else {
                    others.clone()
                };
                folds.push(Fold {
                    name: subject.to_string(),
                    test_site: site.clone(),
                    test: vec![subject.clone()],
                    channel_train,
                    eeg_train: others,
                });
            }
        }
        let plan = CvPlan { mode: CvMode::Loso, level, roles: roles.clone(), folds };
        plan.validate()?;
        Ok(plan)
    }

    /// One fold per testable site, trained on the other sites.
    pub fn loio(subjects: &[SubjectId], roles: &BTreeMap<String, SiteRole>, level: Level) -> Result<CvPlan> {
        check_roles(subjects, roles)?;
        let by_site = sites_of(subjects);
        let mut folds = Vec::new();
        for (site, members) in &by_site {
            let role = roles[site];
            let (testable, eeg_pool): (bool, fn(SiteRole) -> bool) = match level {
                Level::Eeg => (role.has_eeg_labels(), |r| r == SiteRole::Full),
                _ => (role.has_channels(), SiteRole::has_channels),
            };
            if !testable {
                continue;
            }
            folds.push(Fold {
                name: site.clone(),
                test_site: site.clone(),
                test: members.clone(),
                channel_train: pool(&by_site, |s| s != site && roles[s].has_channels()),
                eeg_train: pool(&by_site, |s| s != site && eeg_pool(roles[s])),
            });
        }
        if by_site.len() < 2 {
            return Err(Error::invalid("leave-one-institution-out needs at least two sites"));
        }
        let plan = CvPlan { mode: CvMode::Loio, level, roles: roles.clone(), folds };
        plan.validate()?;
        Ok(plan)
    }

    /// Rejects folds whose training pools contain a test subject (or, for
    /// site-level folds, the test site), or that train on data a site's role
    /// forbids.
    pub fn validate(&self) -> Result<()> {
        for fold in &self.folds {
            let test: BTreeSet<&SubjectId> = fold.test.iter().collect();
            for s in fold.channel_train.iter().chain(&fold.eeg_train) {
                let role = *self.roles.get(&s.site).ok_or_else(|| Error::UnknownSite(s.site.clone()))?;
                if test.contains(s) {
                    return Err(Error::Leakage(format!("fold {}: test subject {s} is in a training pool", fold.name)));
                }
                if self.mode == CvMode::Loio && s.site == fold.test_site {
                    return Err(Error::Leakage(format!("fold {}: test site {} is in a training pool", fold.name, s.site)));
                }
                let own_loso_site = self.mode == CvMode::Loso && s.site == fold.test_site;
                if role == SiteRole::TestOnly && !(own_loso_site && fold.eeg_train.contains(s)) {
                    return Err(Error::Leakage(format!("fold {}: test-only site {} used for training", fold.name, s.site)));
                }
            }
            for s in &fold.channel_train {
                if !self.roles[&s.site].has_channels() {
                    return Err(Error::Leakage(format!(
                        "fold {}: site {} has no channel annotations",
                        fold.name, s.site
                    )));
                }
            }
            if self.level == Level::Eeg {
                if let Some(s) = fold.eeg_train.iter().find(|s| !self.roles[&s.site].has_eeg_labels()) {
                    return Err(Error::Leakage(format!("fold {}: site {} has no recording labels", fold.name, s.site)));
                }
            }
            if let Some(s) = fold.test.iter().find(|s| s.site != fold.test_site) {
                return Err(Error::invalid(format!("fold {}: test subject {s} outside site {}", fold.name, fold.test_site)));
            }
        }
        Ok(())
    }
}

/// Test predictions of one fold.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FoldOutput {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

/// Trains a system on a fold's pools and scores its test subjects.
pub trait FoldRunner: Sync {
    fn run_fold(&self, fold: &Fold, level: Level) -> Result<FoldOutput>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteResult {
    pub site: String,
    pub n_folds: usize,
    pub n_samples: usize,
    pub metrics: MetricSet,
}

/// Mean of per-site metrics; absent threshold-free metrics are skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub auc: Option<f64>,
    pub auprc: Option<f64>,
    pub acc: f64,
    pub bac: f64,
    pub sen: f64,
    pub spe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub mode: CvMode,
    pub level: Level,
    pub sites: Vec<SiteResult>,
    pub mean: MeanMetrics,
    /// Metrics over every test prediction of the run.
    pub pooled: MetricSet,
}

fn mean_defined(v: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = v.filter(|x| !x.is_nan()).collect();
    if vals.is_empty() {
        f64::NAN
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

fn mean_option(v: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Vec<f64> = v.flatten().collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

impl CvReport {
    /// Per-site metrics (predictions pooled over a site's folds), their mean,
    /// and metrics over everything.
    pub fn aggregate(plan: &CvPlan, outputs: &[FoldOutput]) -> Result<CvReport> {
        let mut by_site: BTreeMap<&str, (usize, FoldOutput)> = BTreeMap::new();
        for (fold, out) in plan.folds.iter().zip(outputs) {
            let entry = by_site.entry(&fold.test_site).or_default();
            entry.0 += 1;
            entry.1.scores.extend_from_slice(&out.scores);
            entry.1.labels.extend_from_slice(&out.labels);
        }
        let sites = by_site
            .into_iter()
            .map(|(site, (n_folds, out))| {
                Ok(SiteResult {
                    site: site.to_string(),
                    n_folds,
                    n_samples: out.labels.len(),
                    metrics: metrics(&out.scores, &out.labels, DEFAULT_THRESHOLD)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let all_scores: Vec<f64> = outputs.iter().flat_map(|o| o.scores.iter().copied()).collect();
        let all_labels: Vec<u8> = outputs.iter().flat_map(|o| o.labels.iter().copied()).collect();
        let m = |f: fn(&MetricSet) -> f64| mean_defined(sites.iter().map(|s| f(&s.metrics)));
        let mean = MeanMetrics {
            auc: mean_option(sites.iter().map(|s| s.metrics.auc)),
            auprc: mean_option(sites.iter().map(|s| s.metrics.auprc)),
            acc: m(|x| x.acc),
            bac: m(|x| x.bac),
            sen: m(|x| x.sen),
            spe: m(|x| x.spe),
        };
        Ok(CvReport {
            mode: plan.mode,
            level: plan.level,
            sites,
            mean,
            pooled: metrics(&all_scores, &all_labels, DEFAULT_THRESHOLD)?,
        })
    }

    pub fn site(&self, name: &str) -> Option<&SiteResult> {
        self.sites.iter().find(|s| s.site == name)
    }

    /// Table rows: system, dataset, AUC, AUPRC, ACC, BAC, SEN, SPE.
    pub fn to_csv(&self, system: &str) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.4}"));
        let mut out = String::from("System,Dataset,AUC,AUPRC,ACC,BAC,SEN,SPE\n");
        for s in &self.sites {
            let m = &s.metrics;
            out.push_str(&format!(
                "{system},{},{},{},{:.4},{:.4},{:.4},{:.4}\n",
                s.site,
                opt(m.auc),
                opt(m.auprc),
                m.acc,
                m.bac,
                m.sen,
                m.spe
            ));
        }
        let m = &self.mean;
        out.push_str(&format!(
            "{system},Mean,{},{},{:.4},{:.4},{:.4},{:.4}\n",
            opt(m.auc),
            opt(m.auprc),
            m.acc,
            m.bac,
            m.sen,
            m.spe
        ));
        out
    }
}

/// Runs every fold (in parallel when `parallel`) and aggregates.
pub fn run_cv(plan: &CvPlan, runner: &dyn FoldRunner, parallel: bool) -> Result<CvReport> {
    plan.validate()?;
    let run = |fold: &Fold| {
        let out = runner.run_fold(fold, plan.level)?;
        if out.scores.len() != out.labels.len() {
            return Err(Error::invalid(format!("fold {} returned mismatched outputs", fold.name)));
        }
        log::info!("fold {} done ({} test samples)", fold.name, out.labels.len());
        Ok(out)
    };
    let outputs: Vec<FoldOutput> = if parallel {
        plan.folds.par_iter().map(run).collect::<Result<_>>()?
    } else {
        plan.folds.iter().map(run).collect::<Result<_>>()?
    };
    CvReport::aggregate(plan, &outputs)
}

pub fn run_loso(
    subjects: &[SubjectId],
    roles: &BTreeMap<String, SiteRole>,
    level: Level,
    runner: &dyn FoldRunner,
    parallel: bool,
) -> Result<CvReport> {
    if subjects.len() < 2 {
        return Err(Error::invalid("leave-one-subject-out needs at least two subjects"));
    }
    run_cv(&CvPlan::loso(subjects, roles, level)?, runner, parallel)
}

pub fn run_loio(
    subjects: &[SubjectId],
    roles: &BTreeMap<String, SiteRole>,
    level: Level,
    runner: &dyn FoldRunner,
    parallel: bool,
) -> Result<CvReport> {
    run_cv(&CvPlan::loio(subjects, roles, level)?, runner, parallel)
}
