//! Metrics and cross-validation harnesses.

mod cv;
mod metrics;

pub use cv::{
    run_cv, run_loio, run_loso, CvMode, CvPlan, CvReport, Fold, FoldOutput, FoldRunner, Level, MeanMetrics,
    SiteResult, SiteRole, SubjectId,
};
pub use metrics::{auc, auprc, intra_rater_agreement, metrics, Confusion, MetricSet, DEFAULT_THRESHOLD};
