//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slowave_core::cnn::{CnnArch, CnnModel};
use slowave_core::detect::{
    build_histogram, categorize, default_threshold_pct, mass_split, threshold_classify_eeg, HistogramDomain,
    SlowHistogram, SystemKind, ThresholdMode, CHANNEL_FLAG_FRACTION, GENERALIZED_FRACTION,
    PERSISTENT_FRACTION,
};
use slowave_core::edf::{decode_edf, encode_edf, parse_header, read_edf, write_edf, EdfHeader, EdfWriteOptions};
use slowave_core::eval::{
    auc, run_loio, run_loso, Confusion, CvPlan, Level, SiteRole, SubjectId,
};
use slowave_core::filter::{bandstop_magnitude, highpass_magnitude, NOTCH_HALF_WIDTH_HZ};
use slowave_core::preprocess::{butterworth_highpass, butterworth_notch, FILTER_ORDER};
use slowave_core::shallow::smote;
use slowave_core::spectral::{
    cnn_spectrum, periodogram, power_ratios, relative_powers, BandPowers, SpectralFeatures, CNN_BINS,
    SPECTRUM_BINS, WINDOW_LEN,
};
use slowave_core::synth::{generate_cohort, generate_subject, SiteProfile, SlowingSpec, SynthConfig};
use slowave_core::system::{CohortRunner, SubjectData, SystemConfig, TrainedSystem};
use slowave_core::Recording;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()))
}

fn noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn spectral_laws() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let x = noise(&mut rng, WINDOW_LEN);
        let f = SpectralFeatures::from_window(&x).map_err(|e| e.to_string())?;
        let rp = f.rp;
        let sum = rp.delta + rp.theta + rp.alpha + rp.beta;
        ensure((sum - 1.0).abs() <= 1e-9, || format!("relative powers sum to {sum}"))?;
        let k = 10f64.powf(rng.random_range(-3.0..3.0));
        let scaled: Vec<f64> = x.iter().map(|v| v * k).collect();
        let g = SpectralFeatures::from_window(&scaled).map_err(|e| e.to_string())?;
        for (a, b) in f.to_array().iter().zip(g.to_array()) {
            ensure((a - b).abs() <= 1e-9 * a.abs().max(1.0), || format!("scale {k} moved a feature {a} -> {b}"))?;
        }
    }
    for _ in 0..1000 {
        let p: [f64; 4] = std::array::from_fn(|_| rng.random_range(1e-3..1.0));
        let s: f64 = p.iter().sum();
        let bp = BandPowers { p_delta: p[0], p_theta: p[1], p_alpha: p[2], p_beta: p[3], p_total: s };
        let r = power_ratios(&relative_powers(&bp).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let q = p.map(|v| v / s);
        let direct = [(q[0] + q[1]) / (q[2] + q[3]), q[0] / q[2], q[1] / q[2], q[1] / (q[3] + q[2])];
        ensure([r.pri, r.dar, r.tar, r.tbar] == direct, || format!("ratios {r:?} vs {direct:?}"))?;
    }
    within(t.elapsed(), 5.0)?;
    Ok(format!("1000 windows, 1000 quadruples, {:.2}s", t.elapsed().as_secs_f64()))
}

/// Steady-state gain of a filter at `f`, by projecting the settled output on the probe.
fn measured_gain(filter: impl Fn(&[f64]) -> Vec<f64>, f: f64, fs: f64) -> f64 {
    let secs = (40.0 / f).max(60.0);
    let n = (secs * fs) as usize;
    let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect();
    let y = filter(&x);
    // whole periods of the probe in the second half
    let period = fs / f;
    let periods = ((n / 2) as f64 / period).floor();
    let m = (periods * period).round() as usize;
    let tail = &y[n - m..];
    let (mut s, mut c) = (0.0, 0.0);
    for (j, v) in tail.iter().enumerate() {
        let ph = 2.0 * PI * f * (n - m + j) as f64 / fs;
        s += v * ph.sin();
        c += v * ph.cos();
    }
    2.0 * (s * s + c * c).sqrt() / m as f64
}

fn filter_oracle() -> Outcome {
    let t = Instant::now();
    let fs = 256.0;
    let probes = [0.1, 1.0, 10.0, 50.0, 60.0];
    let mut worst_pass: f64 = 0.0;
    let mut worst_stop = f64::NEG_INFINITY;
    let mut check = |name: &str, analytic: f64, measured: f64| -> Result<(), String> {
        if analytic >= 0.1 {
            let rel = (measured - analytic).abs() / analytic;
            worst_pass = worst_pass.max(rel);
            ensure(rel <= 0.02, || format!("{name}: gain {measured:.5} vs analytic {analytic:.5}"))
        } else {
            let db = 20.0 * measured.max(1e-300).log10();
            worst_stop = worst_stop.max(db);
            ensure(db < -40.0, || format!("{name}: stopband at {db:.1} dB"))
        }
    };
    for &f in &probes {
        let hp = measured_gain(|x| butterworth_highpass(x, fs, 1.0, FILTER_ORDER).unwrap(), f, fs);
        check(&format!("high-pass @{f} Hz"), highpass_magnitude(FILTER_ORDER, 1.0, f, fs), hp)?;
        for f0 in [50.0, 60.0] {
            let bs = measured_gain(|x| butterworth_notch(x, fs, f0, FILTER_ORDER).unwrap(), f, fs);
            let analytic = bandstop_magnitude(FILTER_ORDER, f0, NOTCH_HALF_WIDTH_HZ, f, fs);
            check(&format!("notch {f0} @{f} Hz"), analytic, bs)?;
        }
    }
    within(t.elapsed(), 10.0)?;
    Ok(format!("passband error {:.4}%, stopband <= {worst_stop:.1} dB", 100.0 * worst_pass))
}

fn gradient_check() -> Outcome {
    let t = Instant::now();
    let arch = CnnArch::new(1, 1, 8, 5);
    let mut model = CnnModel::new(arch, 3).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // nudge biases off zero so no ReLU sits exactly on its kink
    for p in model.params_mut() {
        p.iter_mut().for_each(|v| *v += rng.random_range(-0.05..0.05));
    }
    let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..CNN_BINS).map(|_| rng.random_range(0.1..2.0)).collect()).collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let y = [0, 1, 1, 0];
    let (_, grads) = model.loss_and_grad(&refs, &y, None).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for k in 0..model.params().len() {
        for i in 0..model.params()[k].len() {
            let orig = model.params()[k][i];
            model.params_mut()[k][i] = orig + h;
            let up = model.loss(&refs, &y).map_err(|e| e.to_string())?;
            model.params_mut()[k][i] = orig - h;
            let down = model.loss(&refs, &y).map_err(|e| e.to_string())?;
            model.params_mut()[k][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads[k][i];
            worst = worst.max((numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6));
            n += 1;
        }
    }
    ensure(worst <= 1e-4, || format!("max relative error {worst:.2e}"))?;
    within(t.elapsed(), 30.0)?;
    Ok(format!("{n} parameters, max relative error {worst:.2e}"))
}

fn shape_chain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = noise(&mut rng, WINDOW_LEN);
    let spec = periodogram(&x).map_err(|e| e.to_string())?;
    let cnn = cnn_spectrum(&x).map_err(|e| e.to_string())?;
    let arch = CnnArch::default();
    let chain = [x.len(), spec.len(), CNN_BINS, cnn.values().len()];
    ensure(chain == [640, 321, 150, 150] && SPECTRUM_BINS == 321, || format!("chain {chain:?}"))?;
    ensure(arch.input_len == 150, || format!("network input {}", arch.input_len))?;
    let model = CnnModel::new(arch, 0).map_err(|e| e.to_string())?;
    model.score(&cnn).map_err(|e| e.to_string())?;
    Ok(format!("{} -> {} -> {} -> {}", chain[0], chain[1], chain[2], chain[3]))
}

fn on_some_segment(p: &[f64], points: &[Vec<f64>]) -> bool {
    points.iter().any(|a| {
        points.iter().any(|b| {
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
            let dd: f64 = d.iter().map(|v| v * v).sum();
            let u = if dd == 0.0 { 0.0 } else { p.iter().zip(a).zip(&d).map(|((p, a), d)| (p - a) * d).sum::<f64>() / dd };
            (-1e-12..=1.0 + 1e-12).contains(&u)
                && p.iter().zip(a).zip(&d).all(|((p, a), d)| (p - (a + u * d)).abs() < 1e-9)
        })
    })
}

fn smote_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut synthetic = 0;
    for trial in 0..1000u64 {
        let n_min = rng.random_range(2..8);
        let n_maj = n_min + rng.random_range(1..12);
        let d = rng.random_range(1..5);
        let n = n_min + n_maj;
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-5.0..5.0));
        let y: Vec<u8> = (0..n).map(|i| u8::from(i < n_min)).collect();
        let (xs, ys) = smote(&x, &y, 5, trial).map_err(|e| e.to_string())?;
        let ones = ys.iter().filter(|&&l| l == 1).count();
        ensure(2 * ones == ys.len(), || format!("trial {trial}: {ones} of {}", ys.len()))?;
        let minority: Vec<Vec<f64>> =
            x.rows().into_iter().zip(&y).filter(|(_, &l)| l == 1).map(|(r, _)| r.to_vec()).collect();
        for r in xs.rows().into_iter().skip(n) {
            ensure(on_some_segment(&r.to_vec(), &minority), || format!("trial {trial}: point off every segment"))?;
            synthetic += 1;
        }
    }
    Ok(format!("1000 trials, {synthetic} synthetic points"))
}

fn ids(site: &str, n: usize) -> Vec<SubjectId> {
    (0..n).map(|i| SubjectId::new(site, format!("s{i:02}"))).collect()
}

fn cv_check() -> Outcome {
    let err = |e: slowave_core::Error| e.to_string();
    let subjects: Vec<SubjectId> = [ids("tuh", 5), ids("nni", 4), ids("fortis", 3), ids("nuh", 3), ids("ltmgh", 4)].concat();
    let roles: BTreeMap<String, SiteRole> = [
        ("tuh", SiteRole::Full),
        ("nni", SiteRole::Full),
        ("fortis", SiteRole::Full),
        ("nuh", SiteRole::ChannelOnly),
        ("ltmgh", SiteRole::TestOnly),
    ]
    .into_iter()
    .map(|(s, r)| (s.to_string(), r))
    .collect();
    let loso = CvPlan::loso(&subjects, &roles, Level::Eeg).map_err(err)?;
    let tested = subjects.iter().filter(|s| s.site != "nuh").count();
    ensure(loso.folds.len() == tested, || format!("{} LOSO folds for {tested} subjects", loso.folds.len()))?;
    loso.validate().map_err(err)?;

    let loio = CvPlan::loio(&subjects, &roles, Level::Eeg).map_err(err)?;
    loio.validate().map_err(err)?;
    let sites: Vec<&str> = loio.folds.iter().map(|f| f.test_site.as_str()).collect();
    ensure(sites.len() == 4 && !sites.contains(&"nuh") && sites.contains(&"ltmgh"), || format!("LOIO tests {sites:?}"))?;
    for f in &loio.folds {
        let leaks = f.channel_train.iter().chain(&f.eeg_train).any(|s| s.site == f.test_site || s.site == "ltmgh");
        ensure(!leaks, || format!("fold {} trains on a held-out site", f.test_site))?;
        ensure(f.eeg_train.iter().all(|s| s.site != "nuh"), || "channel-only site in an EEG pool".into())?;
    }

    let mut rejected = 0;
    let mut leaky = loio.clone();
    let test = leaky.folds[0].test[0].clone();
    leaky.folds[0].channel_train.push(test);
    rejected += usize::from(leaky.validate().is_err_and(|e| e.kind() == "cv_leakage"));
    let mut leaky = loio.clone();
    leaky.folds[0].eeg_train.push(SubjectId::new("ltmgh", "s00"));
    rejected += usize::from(leaky.validate().is_err_and(|e| e.kind() == "cv_leakage"));
    let mut leaky = loso.clone();
    let test = leaky.folds[3].test[0].clone();
    leaky.folds[3].eeg_train.push(test);
    rejected += usize::from(leaky.validate().is_err_and(|e| e.kind() == "cv_leakage"));
    ensure(rejected == 3, || format!("{rejected} of 3 leaky plans rejected"))?;
    Ok(format!("{} LOSO folds, {} LOIO folds, 3 leaky plans rejected", loso.folds.len(), loio.folds.len()))
}

fn metrics_check() -> Outcome {
    let c = Confusion { tp: 8, fn_: 2, tn: 9, fp: 1 };
    ensure(c.sen() == 0.8 && c.spe() == 0.9, || format!("sen {} spe {}", c.sen(), c.spe()))?;
    ensure((c.bac() - 0.85).abs() < 1e-12, || format!("bac {}", c.bac()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let c = Confusion {
            tp: rng.random_range(1..100),
            fn_: rng.random_range(0..100),
            tn: rng.random_range(1..100),
            fp: rng.random_range(0..100),
        };
        ensure((c.bac() - (c.sen() + c.spe()) / 2.0).abs() < 1e-15, || format!("{c:?}"))?;
    }
    let labels: Vec<u8> = (0..10_000).map(|i| (i % 2) as u8).collect();
    let scores: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
    let a = auc(&scores, &labels).ok_or("AUC undefined")?;
    ensure((a - 0.5).abs() <= 0.02, || format!("random AUC {a}"))?;
    Ok(format!("confusion 0.8/0.9/0.85, random AUC {a:.4}"))
}

// Benchmark cohort: two sites with slightly different backgrounds and a
// third whose delta band is boosted, tested but never trained on.
const BENCH_SUBJECTS: usize = 40;
const BENCH_DURATION_S: f64 = 300.0;
const BENCH_AMPLITUDE: f64 = 1.5;
const BENCH_DELTA_BOOST: f64 = 4.0;

fn bench_site(name: &str, alpha_hz: f64, exponent: f64, boost: f64, seed: u64) -> SynthConfig {
    SynthConfig {
        n_subjects: BENCH_SUBJECTS,
        duration_s: BENCH_DURATION_S,
        fs: 128.0,
        site: SiteProfile {
            name: name.into(),
            alpha_hz,
            one_over_f_exponent: exponent,
            delta_boost: boost,
            ..SiteProfile::default()
        },
        slowing: SlowingSpec { amplitude: BENCH_AMPLITUDE, ..SlowingSpec::default() },
        seed,
        ..SynthConfig::default()
    }
}

fn bank_cohort(cfg: &SynthConfig, pre: &slowave_core::preprocess::PreprocessConfig) -> Result<Vec<SubjectData>, String> {
    (0..cfg.n_subjects)
        .map(|i| {
            let (rec, truth) = generate_subject(cfg, i).map_err(|e| e.to_string())?;
            SubjectData::from_truth(&rec, &truth, pre).map_err(|e| e.to_string())
        })
        .collect()
}

fn benchmark() -> Outcome {
    let t = Instant::now();
    let mut cfg = SystemConfig::for_system(SystemKind::Sdls);
    cfg.channel_cap = Some(40);
    cfg.train.lr = 1e-3;
    cfg.train.max_iters = 400;
    cfg.train.patience = 10;
    let sites = [
        bench_site("alpha", 10.0, 1.0, 1.0, 100),
        bench_site("beta", 9.5, 1.1, 1.0, 101),
        bench_site("gamma", 10.5, 0.9, BENCH_DELTA_BOOST, 102),
    ];
    let mut subjects = Vec::new();
    for s in &sites {
        subjects.extend(bank_cohort(s, &cfg.preprocess)?);
    }
    let roles: BTreeMap<String, SiteRole> = [("alpha", SiteRole::Full), ("beta", SiteRole::Full), ("gamma", SiteRole::TestOnly)]
        .into_iter()
        .map(|(s, r)| (s.to_string(), r))
        .collect();
    let runner = CohortRunner::new(&subjects, cfg).map_err(|e| e.to_string())?;
    let ids = runner.ids();
    let loio = run_loio(&ids, &roles, Level::Eeg, &runner, false).map_err(|e| e.to_string())?;
    let loso = run_loso(&ids, &roles, Level::Eeg, &runner, false).map_err(|e| e.to_string())?;
    let bac = |r: &slowave_core::eval::CvReport, s: &str| r.site(s).map_or(f64::NAN, |x| x.metrics.bac);
    let loio_mean = (bac(&loio, "alpha") + bac(&loio, "beta")) / 2.0;
    let loso_mean = (bac(&loso, "alpha") + bac(&loso, "beta")) / 2.0;
    let drop = bac(&loso, "gamma") - bac(&loio, "gamma");
    let summary = format!(
        "LOSO BAC {loso_mean:.3}, LOIO BAC {loio_mean:.3} (unshifted); boosted site LOSO {:.3} LOIO {:.3}; {:.0}s",
        bac(&loso, "gamma"),
        bac(&loio, "gamma"),
        t.elapsed().as_secs_f64()
    );
    ensure(loso_mean >= 0.85 && loio_mean >= 0.80 && drop >= 0.05, || summary.clone())?;
    within(t.elapsed(), 1800.0)?;
    Ok(summary)
}

/// Every per-channel coverage, the flagged-channel share and the mean
/// flagged coverage clear their rule boundaries by at least `margin`.
fn clear_of_boundaries(coverage: &[f64], margin: f64) -> bool {
    let flagged: Vec<f64> = coverage.iter().copied().filter(|&c| c > CHANNEL_FLAG_FRACTION).collect();
    let channels_clear = coverage.iter().all(|&c| (c - CHANNEL_FLAG_FRACTION).abs() >= margin);
    if flagged.is_empty() {
        return channels_clear;
    }
    let share = flagged.len() as f64 / coverage.len() as f64;
    let persistence = flagged.iter().sum::<f64>() / flagged.len() as f64;
    channels_clear
        && (share - GENERALIZED_FRACTION).abs() >= margin
        && (persistence - PERSISTENT_FRACTION).abs() >= margin
}

fn degrees_oracle() -> Outcome {
    let mut cfg = SystemConfig::for_system(SystemKind::Sdls);
    cfg.channel_cap = Some(60);
    cfg.train.lr = 1e-3;
    cfg.train.max_iters = 400;
    cfg.train.patience = 10;
    let train_cfg = SynthConfig { n_subjects: 20, duration_s: 120.0, fs: 128.0, seed: 900, ..SynthConfig::default() };
    let train = bank_cohort(&train_cfg, &cfg.preprocess)?;
    let pool: Vec<&SubjectData> = train.iter().collect();
    let system = TrainedSystem::fit(&cfg, Level::Eeg, &pool, &pool).map_err(|e| e.to_string())?;

    let mut test_cfg = SynthConfig { n_subjects: 80, duration_s: 180.0, fs: 128.0, seed: 901, ..SynthConfig::default() };
    test_cfg.slowing.prevalence = 0.8;
    let (mut eligible, mut hits) = (0, 0);
    let mut per_cat: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (rec, truth) in generate_cohort(&test_cfg).map_err(|e| e.to_string())? {
        if !clear_of_boundaries(&truth.coverage, 0.05) || categorize(&truth.coverage) != truth.category {
            continue;
        }
        let pred = system.predict(&rec).map_err(|e| e.to_string())?;
        eligible += 1;
        let hit = pred.degrees.category == truth.category;
        hits += usize::from(hit);
        let e = per_cat.entry(truth.category.name()).or_default();
        e.0 += usize::from(hit);
        e.1 += 1;
        if !hit {
            let (want, got) = (truth.category.name(), pred.degrees.category.name());
            let detected: Vec<String> = pred.degrees.slow_fraction.iter().map(|f| format!("{f:.2}")).collect();
            let cov: Vec<String> = truth.coverage.iter().map(|f| format!("{f:.2}")).collect();
            eprintln!("{want} -> {got}\n  truth {}\n  found {}", cov.join(" "), detected.join(" "));
        }
    }
    let share = hits as f64 / eligible.max(1) as f64;
    let detail: Vec<String> = per_cat.iter().map(|(k, (h, n))| format!("{k} {h}/{n}")).collect();
    let summary = format!("{hits}/{eligible} EEGs match ({:.1}%): {}", 100.0 * share, detail.join(", "));
    ensure(eligible >= 40 && share >= 0.9, || summary.clone())?;
    Ok(summary)
}

fn unit_histogram(scores: &[f64]) -> SlowHistogram {
    build_histogram(scores, 20, HistogramDomain::Unit).unwrap()
}

fn threshold_sweep() -> Outcome {
    // histograms built from ground-truth channel labels with score jitter
    let mut cfg = SynthConfig { n_subjects: 60, duration_s: 60.0, fs: 128.0, seed: 77, ..SynthConfig::default() };
    cfg.slowing.amplitude = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    let mut cases = Vec::new();
    for (_, truth) in generate_cohort(&cfg).map_err(|e| e.to_string())? {
        let scores: Vec<f64> = truth
            .window_flags
            .iter()
            .flatten()
            .map(|&f| if f { rng.random_range(0.7..=1.0) } else { rng.random_range(0.0..0.3) })
            .collect();
        cases.push((unit_histogram(&scores), truth.eeg_label));
    }
    let rates = |mode: ThresholdMode, theta: f64| -> (f64, f64) {
        let mut c = Confusion::default();
        for (h, label) in &cases {
            let p = threshold_classify_eeg(h, mode, theta).unwrap();
            match (label, p) {
                (1, 1) => c.tp += 1,
                (1, _) => c.fn_ += 1,
                (_, 1) => c.fp += 1,
                _ => c.tn += 1,
            }
        }
        (c.sen(), c.spe())
    };
    let mut best: (f64, f64) = (0.0, 0.0);
    for mode in [ThresholdMode::Normal, ThresholdMode::Slow] {
        let mut prev: Option<(f64, f64)> = None;
        for step in 0..=100 {
            let theta = step as f64;
            let (sen, spe) = rates(mode, theta);
            if let Some((ps, pp)) = prev {
                let ok = match mode {
                    ThresholdMode::Normal => sen >= ps && spe <= pp,
                    ThresholdMode::Slow => sen <= ps && spe >= pp,
                };
                ensure(ok, || format!("{mode:?} mode not monotone at theta {theta}"))?;
            }
            prev = Some((sen, spe));
            if mode == ThresholdMode::Normal && (sen + spe) / 2.0 > best.1 {
                best = (theta, (sen + spe) / 2.0);
            }
        }
    }

    // rule application at the tabulated thresholds, one step either side
    let hist = |normal: usize, slow: usize| {
        let mut counts = vec![0; 22];
        counts[1] = normal;
        counts[20] = slow;
        counts[10] = 100 - normal - slow;
        SlowHistogram { bins: 20, domain: HistogramDomain::Uls, counts }
    };
    let mut applied = 0;
    for system in [SystemKind::Uls, SystemKind::Ssls, SystemKind::Sdls] {
        let theta = default_threshold_pct(system, ThresholdMode::Normal);
        let t = theta as usize;
        for (normal, want) in [(t - 1, 1), (t, 0), (t + 1, 0)] {
            let got = threshold_classify_eeg(&hist(normal, 0), ThresholdMode::Normal, theta).unwrap();
            ensure(got == want, || format!("{system:?} normal {normal}% theta {theta}: {got}"))?;
            applied += 1;
        }
        let theta = default_threshold_pct(system, ThresholdMode::Slow);
        let t = theta as usize;
        for (slow, want) in [(t - 1, 0), (t, 0), (t + 1, 1)] {
            let got = threshold_classify_eeg(&hist(0, slow), ThresholdMode::Slow, theta).unwrap();
            ensure(got == want, || format!("{system:?} slow {slow}% theta {theta}: {got}"))?;
            applied += 1;
        }
    }
    let tab: Vec<f64> = [SystemKind::Uls, SystemKind::Ssls, SystemKind::Sdls]
        .iter()
        .flat_map(|&s| [default_threshold_pct(s, ThresholdMode::Normal), default_threshold_pct(s, ThresholdMode::Slow)])
        .collect();
    ensure(tab == [55.0, 10.0, 80.0, 5.0, 90.0, 5.0], || format!("tabulated thresholds {tab:?}"))?;
    let (n, s, m) = mass_split(&hist(40, 5)).unwrap();
    ensure((n, s, m) == (40.0, 5.0, 55.0), || format!("mass split {n}/{s}/{m}"))?;
    Ok(format!("{} EEGs swept over 0..100%, best normal-mode BAC {:.3} at {}%, {applied} rule cases", cases.len(), best.1, best.0))
}

fn runtime() -> Outcome {
    let mut cfg = SystemConfig::for_system(SystemKind::Sdls);
    cfg.channel_cap = Some(40);
    cfg.train.lr = 1e-3;
    cfg.train.max_iters = 100;
    let train_cfg = SynthConfig { n_subjects: 6, duration_s: 60.0, fs: 128.0, seed: 31, ..SynthConfig::default() };
    let train = bank_cohort(&train_cfg, &cfg.preprocess)?;
    let pool: Vec<&SubjectData> = train.iter().collect();
    let system = TrainedSystem::fit(&cfg, Level::Eeg, &pool, &pool).map_err(|e| e.to_string())?;

    let long = SynthConfig { duration_s: 1800.0, fs: 256.0, seed: 32, ..SynthConfig::default() };
    let (rec, _) = generate_subject(&long, 0).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("long.edf");
    write_edf(&rec, &path).map_err(|e| e.to_string())?;

    let run = |threads: usize| -> Result<f64, String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        pool.install(|| {
            let t = Instant::now();
            let rec = read_edf(&path).map_err(|e| e.to_string())?;
            let pred = system.predict(&rec).map_err(|e| e.to_string())?;
            ensure(pred.n_windows > 0, || "no window survived".into())?;
            Ok(t.elapsed().as_secs_f64())
        })
    };
    let single = run(1)?;
    let four = run(4)?;
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    let summary = format!("30 min x 19 ch @256 Hz: {single:.2}s on 1 thread, {four:.2}s on 4 threads ({cpus} CPU)");
    ensure(single <= 20.0 && four <= 8.0, || summary.clone())?;
    Ok(summary)
}

fn edf_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let n_ch = rng.random_range(1..24);
        let secs = rng.random_range(1..10);
        let fs = [128.0, 200.0, 256.0][trial % 3];
        let scale = 10f64.powf(rng.random_range(0.0..3.5));
        let n = secs * fs as usize;
        let data = Array2::from_shape_fn((n_ch, n), |_| rng.random_range(-scale..scale));
        let names = (0..n_ch).map(|i| format!("ch{i}")).collect();
        let rec = Recording::new(names, fs, data).map_err(|e| e.to_string())?;
        let bytes = encode_edf(&rec, &EdfWriteOptions::default()).map_err(|e| e.to_string())?;
        let header = parse_header(&bytes).map_err(|e| e.to_string())?;
        ensure(header.header_bytes == 256 * (1 + n_ch) && EdfHeader::expected_header_bytes(n_ch) == 256 * (1 + n_ch), || {
            format!("header {} bytes for {n_ch} signals", header.header_bytes)
        })?;
        let back = decode_edf(&bytes).map_err(|e| e.to_string())?;
        ensure(back.data.dim() == rec.data.dim(), || "shape changed".into())?;
        for (c, sig) in header.signals.iter().enumerate() {
            let step = sig.quantization_step();
            for (a, b) in rec.data.row(c).iter().zip(back.data.row(c)) {
                let steps = (a - b).abs() / step;
                worst = worst.max(steps);
                ensure(steps <= 1.0, || format!("trial {trial}: error {steps:.3} steps"))?;
            }
        }
    }
    Ok(format!("200 recordings, worst error {worst:.3} quantization steps"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("spectral laws", spectral_laws),
        ("filter oracle", filter_oracle),
        ("CNN gradient check", gradient_check),
        ("CNN input shape chain", shape_chain),
        ("SMOTE", smote_check),
        ("CV leakage", cv_check),
        ("metrics", metrics_check),
        ("synthetic benchmark", benchmark),
        ("degrees-of-slowing oracle", degrees_oracle),
        ("threshold classifier", threshold_sweep),
        ("runtime", runtime),
        ("EDF round-trip", edf_round_trip),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(msg) => println!("criterion {n}: PASS {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n}: FAIL {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
