use std::f64::consts::PI;

use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slowave_core::edf::{decode_edf, encode_edf, parse_header, read_csv, write_csv, EdfHeader, EdfWriteOptions};
use slowave_core::filter::{butterworth_bandstop, butterworth_highpass};
use slowave_core::preprocess::{car_montage, resample_to};
use slowave_core::spectral::{
    band_powers, periodogram, power_ratios, power_spectrum, relative_powers, BandPowers, SpectralFeature,
    SpectralFeatures, WINDOW_LEN,
};
use slowave_core::Recording;

fn recording(n_ch: usize, n: usize, fs: f64, seed: u64, scale: f64) -> Recording {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = Array2::from_shape_fn((n_ch, n), |_| rng.random_range(-scale..scale));
    let names = (0..n_ch).map(|i| format!("ch{i}")).collect();
    Recording::new(names, fs, data).unwrap()
}

fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn edf_round_trip_within_one_step(n_ch in 1usize..6, secs in 1usize..8, seed in any::<u64>(), scale in 1.0f64..500.0) {
        let rec = recording(n_ch, secs * 128, 128.0, seed, scale);
        let bytes = encode_edf(&rec, &EdfWriteOptions::default()).unwrap();
        let header = parse_header(&bytes).unwrap();
        prop_assert_eq!(header.header_bytes, 256 * (1 + n_ch));
        prop_assert_eq!(EdfHeader::expected_header_bytes(n_ch), 256 * (1 + n_ch));
        let back = decode_edf(&bytes).unwrap();
        prop_assert_eq!(back.data.dim(), rec.data.dim());
        for (c, sig) in header.signals.iter().enumerate() {
            let step = sig.quantization_step();
            for (a, b) in rec.data.row(c).iter().zip(back.data.row(c)) {
                prop_assert!((a - b).abs() <= step, "{} vs {} (step {})", a, b, step);
            }
        }
    }

    #[test]
    fn car_is_idempotent_with_zero_column_means(n_ch in 2usize..20, seed in any::<u64>()) {
        let rec = recording(n_ch, 64, 128.0, seed, 100.0);
        let once = car_montage(&rec).unwrap();
        let twice = car_montage(&once).unwrap();
        for col in once.data.columns() {
            prop_assert!(col.sum().abs() / (n_ch as f64) < 1e-12);
        }
        for (a, b) in once.data.iter().zip(twice.data.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn relative_powers_form_a_simplex(p in prop::array::uniform4(1e-6f64..1e6)) {
        let bp = BandPowers { p_delta: p[0], p_theta: p[1], p_alpha: p[2], p_beta: p[3], p_total: p.iter().sum() };
        let rp = relative_powers(&bp).unwrap();
        let parts = [rp.delta, rp.theta, rp.alpha, rp.beta];
        prop_assert!((parts.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(parts.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn features_are_scale_invariant(seed in any::<u64>(), k in 1e-3f64..1e3) {
        let x = noise(seed, WINDOW_LEN);
        let scaled: Vec<f64> = x.iter().map(|v| v * k).collect();
        let a = SpectralFeatures::from_window(&x).unwrap().to_array();
        let b = SpectralFeatures::from_window(&scaled).unwrap().to_array();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
        }
    }

    // the tone must dominate the noise in its bin, or the cross term can cancel it
    #[test]
    fn adding_delta_raises_pri_and_dar(seed in any::<u64>(), amp in 0.5f64..2.0, f in 1.2f64..3.8) {
        let x = noise(seed, WINDOW_LEN);
        let slowed: Vec<f64> =
            x.iter().enumerate().map(|(i, v)| v + amp * (2.0 * PI * f * i as f64 / 128.0).sin()).collect();
        let a = SpectralFeatures::from_window(&x).unwrap();
        let b = SpectralFeatures::from_window(&slowed).unwrap();
        prop_assert!(b.get(SpectralFeature::Pri) > a.get(SpectralFeature::Pri));
        prop_assert!(b.get(SpectralFeature::Dar) > a.get(SpectralFeature::Dar));
    }

    #[test]
    fn parseval(seed in any::<u64>(), n in 2usize..2000) {
        let x = noise(seed, n);
        let energy: f64 = x.iter().map(|v| v * v).sum();
        let spec: f64 = power_spectrum(&x).iter().sum();
        prop_assert!((energy - spec).abs() <= 1e-6 * energy);
    }

    #[test]
    fn filters_stay_bounded(cutoff in 0.2f64..20.0, f0 in 45.0f64..62.0, fs in prop::sample::select(vec![128.0, 200.0, 256.0, 500.0])) {
        let mut impulse = vec![0.0; 4000];
        impulse[0] = 1.0;
        for sos in [butterworth_highpass(4, cutoff, fs).unwrap(), butterworth_bandstop(4, f0, 2.0, fs).unwrap()] {
            let y = sos.filter(&impulse);
            prop_assert!(y.iter().all(|v| v.is_finite() && v.abs() < 10.0));
            prop_assert!(y[3000..].iter().all(|v| v.abs() < 1e-3));
        }
    }
}

#[test]
fn csv_round_trip_is_exact() {
    let rec = recording(3, 50, 128.0, 9, 1e4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    write_csv(&rec, &path).unwrap();
    let back = read_csv(&path, 128.0).unwrap();
    assert_eq!(back.channels, rec.channels);
    assert_eq!(back.data, rec.data);
}

#[test]
fn csv_shape_and_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    let mut text = String::from("Fp1,Fp2,Cz\n");
    for i in 0..10 {
        text.push_str(&format!("{i},{},{}\n", i * 2, -i));
    }
    std::fs::write(&path, &text).unwrap();
    let rec = read_csv(&path, 128.0).unwrap();
    assert_eq!(rec.data.dim(), (3, 10));
    std::fs::write(&path, "Fp1,Fp2\n").unwrap();
    assert!(read_csv(&path, 128.0).is_err());
}

#[test]
fn white_noise_relative_powers_follow_bandwidth() {
    let mut acc = [0.0; 4];
    for w in 0..200 {
        let spec = periodogram(&noise(1000 + w, WINDOW_LEN)).unwrap();
        let rp = relative_powers(&band_powers(&spec)).unwrap();
        for (a, v) in acc.iter_mut().zip([rp.delta, rp.theta, rp.alpha, rp.beta]) {
            *a += v / 200.0;
        }
    }
    for (got, width) in acc.iter().zip([3.0, 4.0, 5.0, 17.0]) {
        assert!((got - width / 29.0).abs() < 0.02, "{got} vs {}", width / 29.0);
    }
}

#[test]
fn ratios_match_direct_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let p: [f64; 4] = std::array::from_fn(|_| rng.random_range(1e-3..1.0));
        let s: f64 = p.iter().sum();
        let bp = BandPowers { p_delta: p[0], p_theta: p[1], p_alpha: p[2], p_beta: p[3], p_total: s };
        let r = power_ratios(&relative_powers(&bp).unwrap()).unwrap();
        let rp = p.map(|v| v / s);
        assert_eq!(r.pri, (rp[0] + rp[1]) / (rp[2] + rp[3]));
        assert_eq!(r.dar, rp[0] / rp[2]);
        assert_eq!(r.tar, rp[1] / rp[2]);
        assert_eq!(r.tbar, rp[1] / (rp[3] + rp[2]));
    }
}

#[test]
fn downsampling_suppresses_aliases() {
    let n = 256 * 20;
    let tone = |f: f64| {
        let data = Array2::from_shape_fn((1, n), |(_, i)| (2.0 * PI * f * i as f64 / 256.0).sin());
        Recording::new(vec!["Cz".into()], 256.0, data).unwrap()
    };
    let out = resample_to(&tone(60.0), 128.0).unwrap();
    let mid: Vec<f64> = out.data.row(0).iter().skip(256).take(1280).copied().collect();
    let rms = (mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64).sqrt();
    assert!(20.0 * (rms / std::f64::consts::FRAC_1_SQRT_2).log10() < -40.0, "rms {rms}");
}
