//! Butterworth IIR design (bilinear transform with pre-warping) as cascaded
//! second-order sections, plus a windowed-sinc FIR low-pass.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the Butterworth band-stop around the notch frequency.
pub const NOTCH_HALF_WIDTH_HZ: f64 = 2.0;

/// One biquad, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    /// Causal filtering from zero initial state (transposed direct form II).
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.filter_in_place(&mut y);
        y
    }

    pub fn filter_in_place(&self, x: &mut [f64]) {
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in x.iter_mut() {
                let input = *v;
                let out = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[0] * out + z2;
                z2 = s.b[2] * input - s.a[1] * out;
                *v = out;
            }
        }
    }

    /// Complex frequency response at `f` Hz.
    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        let z = Complex64::from_polar(1.0, 2.0 * PI * f / fs);
        let zi = z.inv();
        self.sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| {
            let num = s.b[0] + s.b[1] * zi + s.b[2] * zi * zi;
            let den = 1.0 + s.a[0] * zi + s.a[1] * zi * zi;
            acc * num / den
        })
    }
}

fn prewarp(f: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * f / fs).tan()
}

fn prototype_poles(order: usize) -> Vec<Complex64> {
    (0..order)
        .map(|k| {
            let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            Complex64::from_polar(1.0, theta)
        })
        .collect()
}

fn bilinear(s: Complex64, fs: f64) -> Complex64 {
    let k = Complex64::new(2.0 * fs, 0.0);
    (k + s) / (k - s)
}

/// Pairs conjugates (and leftover reals) into quadratic factors `[1, c1, c2]`.
fn quadratic_factors(roots: &[Complex64]) -> Vec<[f64; 3]> {
    const EPS: f64 = 1e-9;
    let mut complex: Vec<Complex64> = roots.iter().copied().filter(|r| r.im > EPS).collect();
    complex.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    let mut reals: Vec<f64> = roots.iter().filter(|r| r.im.abs() <= EPS).map(|r| r.re).collect();
    reals.sort_by(f64::total_cmp);
    let mut out: Vec<[f64; 3]> = complex.iter().map(|r| [1.0, -2.0 * r.re, r.norm_sqr()]).collect();
    for pair in reals.chunks(2) {
        match pair {
            [a, b] => out.push([1.0, -(a + b), a * b]),
            [a] => out.push([1.0, -a, 0.0]),
            _ => unreachable!(),
        }
    }
    out
}

fn zpk_to_sos(zeros: &[Complex64], poles: &[Complex64], norm_freq: f64, fs: f64) -> Sos {
    let zq = quadratic_factors(zeros);
    let pq = quadratic_factors(poles);
    debug_assert_eq!(zq.len(), pq.len());
    let mut sos = Sos {
        sections: zq
            .iter()
            .zip(&pq)
            .map(|(z, p)| Biquad { b: *z, a: [p[1], p[2]] })
            .collect(),
    };
    let gain = sos.response(norm_freq, fs).norm();
    for b in sos.sections[0].b.iter_mut() {
        *b /= gain;
    }
    sos
}

/// Butterworth high-pass of even `order`, unit gain at Nyquist.
pub fn butterworth_highpass(order: usize, cutoff: f64, fs: f64) -> Result<Sos> {
    if !(cutoff > 0.0 && cutoff < fs / 2.0) {
        return Err(Error::invalid(format!("high-pass cutoff {cutoff} Hz outside (0, {})", fs / 2.0)));
    }
    if order == 0 || order % 2 != 0 {
        return Err(Error::invalid(format!("unsupported Butterworth order {order}")));
    }
    let wc = prewarp(cutoff, fs);
    let poles: Vec<Complex64> =
        prototype_poles(order).into_iter().map(|p| bilinear(wc / p, fs)).collect();
    let zeros = vec![Complex64::new(1.0, 0.0); order];
    Ok(zpk_to_sos(&zeros, &poles, fs / 2.0, fs))
}

/// Butterworth band-stop of total `order` (prototype order `order / 2`) with
/// its null exactly at `f0` and edges at `f0 ± half_width`. Unit gain at DC.
pub fn butterworth_bandstop(order: usize, f0: f64, half_width: f64, fs: f64) -> Result<Sos> {
    if !(f0 > 0.0 && f0 < fs / 2.0) {
        return Err(Error::invalid(format!("notch frequency {f0} Hz outside (0, {})", fs / 2.0)));
    }
    if order == 0 || order % 2 != 0 {
        return Err(Error::invalid(format!("unsupported band-stop order {order}")));
    }
    let (lo, hi) = (f0 - half_width, f0 + half_width);
    if !(lo > 0.0 && hi < fs / 2.0) {
        return Err(Error::invalid(format!("notch band [{lo}, {hi}] Hz does not fit below Nyquist")));
    }
    let bw = prewarp(hi, fs) - prewarp(lo, fs);
    let w0 = prewarp(f0, fs);
    let mut poles = Vec::with_capacity(order);
    for p in prototype_poles(order / 2) {
        // roots of s^2 - (bw/p) s + w0^2
        let b = bw / p;
        let disc = (b * b - 4.0 * w0 * w0).sqrt();
        poles.push(bilinear((b + disc) / 2.0, fs));
        poles.push(bilinear((b - disc) / 2.0, fs));
    }
    let zero = bilinear(Complex64::new(0.0, w0), fs);
    let zeros: Vec<Complex64> =
        (0..order).map(|i| if i % 2 == 0 { zero } else { zero.conj() }).collect();
    Ok(zpk_to_sos(&zeros, &poles, 0.0, fs))
}

/// Closed-form magnitude of the digital Butterworth high-pass.
pub fn highpass_magnitude(order: usize, cutoff: f64, f: f64, fs: f64) -> f64 {
    let ratio = prewarp(cutoff, fs) / prewarp(f, fs);
    1.0 / (1.0 + ratio.powi(2 * order as i32)).sqrt()
}

/// Closed-form magnitude of [`butterworth_bandstop`].
pub fn bandstop_magnitude(order: usize, f0: f64, half_width: f64, f: f64, fs: f64) -> f64 {
    let bw = prewarp(f0 + half_width, fs) - prewarp(f0 - half_width, fs);
    let w0 = prewarp(f0, fs);
    let w = prewarp(f, fs);
    let ratio = bw * w / (w0 * w0 - w * w);
    1.0 / (1.0 + ratio.powi(order as i32)).sqrt()
}

/// Hamming-windowed sinc low-pass with `n_taps` taps at rate `fs`, DC gain `gain`.
pub fn fir_lowpass(n_taps: usize, cutoff: f64, fs: f64, gain: f64) -> Vec<f64> {
    let centre = (n_taps as f64 - 1.0) / 2.0;
    let fc = cutoff / fs;
    let mut h: Vec<f64> = (0..n_taps)
        .map(|k| {
            let t = k as f64 - centre;
            let sinc = if t == 0.0 { 2.0 * fc } else { (2.0 * PI * fc * t).sin() / (PI * t) };
            let window = if n_taps > 1 {
                0.54 - 0.46 * (2.0 * PI * k as f64 / (n_taps as f64 - 1.0)).cos()
            } else {
                1.0
            };
            sinc * window
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v *= gain / sum);
    h
}
