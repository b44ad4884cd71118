//! Channel detectors, histogram features and recording-level rules.

mod annotation;
mod bank;
mod detector;
mod histogram;
mod levels;

pub use annotation::{
    candidates_from_bank, select_annotation_segments, AnnotationCandidate, AnnotationItem, ANNOTATION_DUPLICATES,
    ANNOTATION_UNIQUE, HIGH_PRI, LOW_PRI, PER_EEG_CAP,
};
pub use bank::WindowBank;
pub use detector::{fit_uls_normalizer, uls_channel_score, ChannelDetector, UlsNormalizer, ULS_POOL_SIZE, ULS_SIGMA};
pub use histogram::{
    build_histogram, features_of, histogram_features, HistogramDomain, HistogramFeatures, SlowHistogram,
    BIN_CHOICES, STAT_NAMES, ULS_OUTLIER_LIMIT, ULS_RANGE,
};
pub use levels::{
    categorize, default_threshold_pct, degrees_of_slowing, eeg_level_features, mass_split, segment_bank,
    segment_level_features, slow_fractions, threshold_classify_eeg, threshold_histogram, window_features,
    SlowingCategory, SlowingDegreeReport, SystemKind, ThresholdMode, CHANNEL_FLAG_FRACTION, GENERALIZED_FRACTION,
    PERSISTENT_FRACTION, SLOW_SCORE_CUTOFF, THRESHOLD_BINS,
};
