use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use slowave_core::detect::{
    build_histogram, categorize, eeg_level_features, features_of, fit_uls_normalizer, mass_split,
    select_annotation_segments, threshold_classify_eeg, threshold_histogram, AnnotationCandidate, ChannelDetector,
    HistogramDomain, SlowHistogram, SlowingCategory, SlowingDegreeReport, ThresholdMode, UlsNormalizer, WindowBank,
    HIGH_PRI,
};
use slowave_core::preprocess::PreprocessConfig;
use slowave_core::spectral::SpectralFeature;
use slowave_core::synth::{generate_subject, SynthConfig};

#[test]
fn uniform_counts_follow_binomial() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 10_000;
    let values: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let h = build_histogram(&values, 10, HistogramDomain::Unit).unwrap();
    let sd = (n as f64 * 0.1 * 0.9).sqrt();
    for &c in &h.counts {
        assert!((c as f64 - 1000.0).abs() <= 3.0 * sd, "{c}");
    }
}

#[test]
fn normal_moments_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let values: Vec<f64> =
        (0..10_000).map(|_| StandardNormal.sample(&mut rng)).map(|v: f64| v.clamp(-100.0, 100.0)).collect();
    let f = features_of(&values, 20, HistogramDomain::Uls).unwrap();
    assert!(f.skewness.abs() <= 0.1, "{}", f.skewness);
    assert!(f.kurtosis.abs() <= 0.2, "{}", f.kurtosis);
    assert!((f.frequencies.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(f.range, f.max - f.min);
}

#[test]
fn normalized_slow_free_pool_is_mostly_below_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let values: Vec<f64> = (0..20_000).map(|_| 2.0 + 0.3 * { let z: f64 = StandardNormal.sample(&mut rng); z }).collect();
    let norm = UlsNormalizer::from_values(SpectralFeature::Pri, &values).unwrap();
    let inside = values.iter().filter(|&&v| (0.0..=1.05).contains(&norm.apply(v))).count();
    assert!(inside as f64 >= 0.99 * values.len() as f64);
    assert_eq!(UlsNormalizer::from_values(SpectralFeature::Pri, &[2.0; 5]).unwrap().c, 2.0);
}

fn slow_free_bank(seed: u64, secs: f64, gain: f64) -> WindowBank {
    let mut cfg = SynthConfig { duration_s: secs, fs: 128.0, seed, artifacts_per_min: 0.0, ..SynthConfig::default() };
    cfg.slowing.amplitude = 0.0;
    let (mut rec, _) = generate_subject(&cfg, 0).unwrap();
    rec.data.mapv_inplace(|v| v * gain);
    WindowBank::from_recording(&rec, &PreprocessConfig::default()).unwrap()
}

#[test]
fn recording_level_uls_histogram() {
    let pool: Vec<WindowBank> = (0..4).map(|s| slow_free_bank(s, 60.0, 1.0)).collect();
    let refs: Vec<&WindowBank> = pool.iter().collect();
    let norm = fit_uls_normalizer(&refs, SpectralFeature::Pri).unwrap();
    let det = ChannelDetector::UlsThreshold {
        feature: SpectralFeature::Pri,
        theta: norm.default_threshold(),
        normalizer: Some(norm),
    };
    let bank = slow_free_bank(99, 30.0, 1.0);
    let stats = det.statistics(&bank).unwrap();
    let in_unit = stats.iter().filter(|v| (0.0..=1.0).contains(*v)).count();
    assert!(in_unit as f64 >= 0.9 * stats.len() as f64);

    // every ULS decision and histogram feature survives rescaling the raw signal
    let scaled = slow_free_bank(99, 30.0, 37.0);
    assert_eq!(det.scores(&bank).unwrap(), det.scores(&scaled).unwrap());
    let a = eeg_level_features(&bank, &det, 10).unwrap().to_vec();
    let b = eeg_level_features(&scaled, &det, 10).unwrap().to_vec();
    for (u, v) in a.iter().zip(&b) {
        assert!((u - v).abs() < 1e-6 * u.abs().max(1.0));
    }
}

#[test]
fn threshold_rule_examples() {
    let hist = |core: [usize; 20]| {
        let mut counts = vec![0];
        counts.extend(core);
        counts.push(0);
        SlowHistogram { bins: 20, domain: HistogramDomain::Uls, counts }
    };
    let mut c = [0; 20];
    c[0] = 40;
    c[10] = 60;
    assert_eq!(threshold_classify_eeg(&hist(c), ThresholdMode::Normal, 55.0).unwrap(), 1);
    let mut c = [0; 20];
    c[2] = 95;
    c[19] = 5;
    assert_eq!(threshold_classify_eeg(&hist(c), ThresholdMode::Normal, 90.0).unwrap(), 0);
    let mut c = [0; 20];
    c[5..14].fill(3);
    assert_eq!(threshold_classify_eeg(&hist(c), ThresholdMode::Normal, 0.1).unwrap(), 1);
    let wrong = build_histogram(&[0.1], 10, HistogramDomain::Unit).unwrap();
    assert!(threshold_classify_eeg(&wrong, ThresholdMode::Slow, 5.0).is_err());
}

#[test]
fn degree_examples() {
    assert_eq!(categorize(&[0.6; 19]), SlowingCategory::Gps);
    let mut f = vec![0.0; 19];
    f[..3].fill(0.3);
    assert_eq!(categorize(&f), SlowingCategory::Fis);
    assert_eq!(categorize(&[0.05; 19]), SlowingCategory::SlowFree);
}

fn candidates(n_eeg: usize, per_eeg: usize, pri: impl Fn(usize) -> f64) -> Vec<AnnotationCandidate> {
    (0..n_eeg)
        .flat_map(|e| {
            let pri = &pri;
            (0..per_eeg).map(move |w| AnnotationCandidate {
                site: format!("site{}", e % 3),
                eeg: format!("eeg{e}"),
                window: w,
                start_s: w as f64 * 1.25,
                pri: pri(e * per_eeg + w),
            })
        })
        .collect()
}

#[test]
fn annotation_exact_pool() {
    // 855 high and 95 ambiguous segments spread so no EEG exceeds the cap
    let pool = candidates(50, 19, |i| if i < 855 { 5.0 } else { 2.0 });
    let out = select_annotation_segments(&pool, 950, 50, 1);
    assert_eq!(out.len(), 1000);
    assert_eq!(out.iter().filter(|i| i.duplicate_of.is_none()).count(), 950);
    assert_eq!(out.iter().filter(|i| i.duplicate_of.is_some()).count(), 50);
    assert_eq!(out, select_annotation_segments(&pool, 950, 50, 1));
}

#[test]
fn annotation_cap_and_strata() {
    let one = candidates(1, 100, |_| 5.0);
    let out = select_annotation_segments(&one, 50, 0, 3);
    assert!(out.len() <= 20);

    let pool = candidates(300, 30, |i| if i % 3 == 0 { 2.0 } else { 4.0 + (i % 7) as f64 });
    let out = select_annotation_segments(&pool, 950, 50, 7);
    let unique: Vec<_> = out.iter().filter(|i| i.duplicate_of.is_none()).collect();
    let high = unique.iter().filter(|i| i.segment.pri >= HIGH_PRI).count() as f64 / unique.len() as f64;
    assert!((high - 0.9).abs() <= 0.02, "{high}");
    let mut per_eeg = std::collections::HashMap::new();
    for i in &unique {
        *per_eeg.entry(i.segment.eeg.clone()).or_insert(0) += 1;
    }
    assert!(per_eeg.values().all(|&c| c <= 20));
}

proptest! {
    #[test]
    fn threshold_mass_is_conserved(values in prop::collection::vec(-150.0f64..150.0, 1..300)) {
        let h = threshold_histogram(&values, HistogramDomain::Uls).unwrap();
        let (normal, slow, middle) = mass_split(&h).unwrap();
        prop_assert!((normal + slow + middle - 100.0).abs() < 1e-9);
        prop_assert_eq!(h.total(), values.len());
    }

    #[test]
    fn degree_rules_are_total_and_consistent(fr in prop::collection::vec(0.0f64..=1.0, 1..25)) {
        let report = SlowingDegreeReport::from_fractions(
            (0..fr.len()).map(|i| format!("c{i}")).collect(), fr.clone(), 10).unwrap();
        let flagged: Vec<f64> = fr.iter().copied().filter(|&f| f > 0.2).collect();
        let expected = if flagged.is_empty() {
            SlowingCategory::SlowFree
        } else {
            let generalized = flagged.len() as f64 > 0.5 * fr.len() as f64;
            let persistent = flagged.iter().sum::<f64>() / flagged.len() as f64 > 0.5;
            match (generalized, persistent) {
                (true, true) => SlowingCategory::Gps,
                (true, false) => SlowingCategory::Gis,
                (false, true) => SlowingCategory::Fps,
                (false, false) => SlowingCategory::Fis,
            }
        };
        prop_assert_eq!(report.category, expected);
    }

    #[test]
    fn unit_histograms_hold_scores(values in prop::collection::vec(0.0f64..=1.0, 1..200), bins in prop::sample::select(vec![2usize, 5, 10, 15, 20])) {
        let h = build_histogram(&values, bins, HistogramDomain::Unit).unwrap();
        prop_assert_eq!(h.counts.len(), bins);
        prop_assert_eq!(h.total(), values.len());
    }
}

#[test]
fn thirty_seconds_give_399_values() {
    let mut cfg = SynthConfig { duration_s: 30.0, fs: 128.0, seed: 5, ..SynthConfig::default() };
    cfg.slowing.amplitude = 0.0;
    let (rec, _) = generate_subject(&cfg, 0).unwrap();
    let keep_all = PreprocessConfig { artifact_sigma: f64::INFINITY, ..PreprocessConfig::default() };
    let bank = WindowBank::from_recording(&rec, &keep_all).unwrap();
    assert_eq!(bank.n_windows(), 21);
    assert_eq!(bank.len(), 399);
    let dropped = WindowBank::from_recording(&rec, &PreprocessConfig::default()).unwrap();
    assert!(dropped.n_windows() <= 21);
}

#[test]
fn too_short_recording_has_no_window() {
    let mut cfg = SynthConfig { duration_s: 5.0, fs: 128.0, ..SynthConfig::default() };
    cfg.duration_s = 5.0;
    let (mut rec, _) = generate_subject(&cfg, 0).unwrap();
    rec.data = rec.data.slice(ndarray::s![.., ..600]).to_owned();
    assert!(WindowBank::from_recording(&rec, &PreprocessConfig::default()).is_err());
}
