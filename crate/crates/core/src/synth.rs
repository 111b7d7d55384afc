//! Deterministic synthetic test material: speech-like utterances, noise
//! maskers and SNR mixing. Everything is seeded so scenes are reproducible.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dsp::Waveform;
use crate::error::{Error, Result};

/// A speech-like signal: voiced syllables with a wandering pitch and moving
/// formants, unvoiced fricative bursts, and pauses of digital silence.
/// Peak-normalised to 0.9.
pub fn utterance(seed: u64, duration_s: f64, sample_rate: u32) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = f64::from(sample_rate);
    let len = (duration_s * fs).round() as usize;
    let mut out = vec![0.0; len];

    let f0_base = rng.random_range(100.0..220.0);
    let mut cursor = (rng.random_range(0.05..0.15) * fs) as usize;
    while cursor < len {
        let kind: f64 = rng.random();
        let seg_len = if kind < 0.78 {
            let n = (rng.random_range(0.12..0.32) * fs) as usize;
            voiced(&mut rng, &mut out, cursor, n, fs, f0_base);
            n
        } else {
            let n = (rng.random_range(0.06..0.15) * fs) as usize;
            fricative(&mut rng, &mut out, cursor, n, fs);
            n
        };
        let gap = if rng.random::<f64>() < 0.2 {
            rng.random_range(0.25..0.45)
        } else {
            rng.random_range(0.02..0.12)
        };
        cursor += seg_len + (gap * fs) as usize;
    }
    normalise_peak(&mut out, 0.9);
    Waveform::new(out, sample_rate).expect("finite synthetic samples")
}

fn envelope(t: usize, n: usize, fs: f64) -> f64 {
    let attack = (0.015 * fs) as usize;
    let release = (0.04 * fs) as usize;
    let rise = if t < attack {
        0.5 - 0.5 * (PI * t as f64 / attack as f64).cos()
    } else {
        1.0
    };
    let fall = if t + release > n {
        let r = (n - t) as f64 / release as f64;
        0.5 - 0.5 * (PI * r).cos()
    } else {
        1.0
    };
    rise * fall
}

fn voiced(rng: &mut ChaCha8Rng, out: &mut [f64], start: usize, n: usize, fs: f64, f0_base: f64) {
    let formant = |rng: &mut ChaCha8Rng| {
        [
            rng.random_range(300.0..850.0),
            rng.random_range(900.0..2300.0),
            rng.random_range(2300.0..3300.0),
        ]
    };
    let from = formant(rng);
    let to = formant(rng);
    let bandwidth = [90.0, 140.0, 220.0];
    let gains = [1.0, 0.6, 0.3];
    let level = rng.random_range(0.3..1.0);
    let f0_start = f0_base * rng.random_range(0.85..1.2);
    let f0_end = f0_start * rng.random_range(0.8..1.1);
    let vibrato = rng.random_range(3.0..6.0);
    let nyquist_cap = (0.45 * fs).min(5000.0);
    let max_harmonics = (nyquist_cap / 80.0) as usize;
    let mut phases = vec![0.0; max_harmonics];
    let mut amps = vec![0.0; max_harmonics];

    for t in 0..n {
        let idx = start + t;
        if idx >= out.len() {
            break;
        }
        let u = t as f64 / n as f64;
        let f0 = (f0_start + (f0_end - f0_start) * u) * (1.0 + 0.03 * (2.0 * PI * vibrato * t as f64 / fs).sin());
        if t % 32 == 0 {
            for (h, a) in amps.iter_mut().enumerate() {
                let f = (h + 1) as f64 * f0;
                if f >= nyquist_cap {
                    *a = 0.0;
                    continue;
                }
                let shape: f64 = (0..3)
                    .map(|i| {
                        let fc = from[i] + (to[i] - from[i]) * u;
                        gains[i] * (-0.5 * ((f - fc) / bandwidth[i]).powi(2)).exp()
                    })
                    .sum();
                *a = (shape + 0.02) / (1.0 + f / 1500.0);
            }
        }
        let mut v = 0.0;
        for (h, (p, a)) in phases.iter_mut().zip(&amps).enumerate() {
            *p += 2.0 * PI * (h + 1) as f64 * f0 / fs;
            if *p > 2.0 * PI {
                *p -= 2.0 * PI;
            }
            v += a * p.sin();
        }
        out[idx] += level * envelope(t, n, fs) * v;
    }
}

fn fricative(rng: &mut ChaCha8Rng, out: &mut [f64], start: usize, n: usize, fs: f64) {
    let centre: f64 = rng.random_range(2500.0..4500.0_f64).min(0.4 * fs);
    let q = 2.0;
    // RBJ band-pass biquad
    let w0 = 2.0 * PI * centre / fs;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let (b0, b2) = (alpha / a0, -alpha / a0);
    let (a1, a2) = (-2.0 * w0.cos() / a0, (1.0 - alpha) / a0);
    let level = rng.random_range(0.1..0.3);
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    for t in 0..n {
        let idx = start + t;
        if idx >= out.len() {
            break;
        }
        let x: f64 = rng.sample(StandardNormal);
        let y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
        (x2, x1) = (x1, x);
        (y2, y1) = (y1, y);
        out[idx] += level * envelope(t, n, fs) * y;
    }
}

fn normalise_peak(x: &mut [f64], target: f64) {
    let peak = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v *= target / peak);
    }
}

/// Unit-variance Gaussian white noise.
pub fn white_noise(seed: u64, len: usize, sample_rate: u32) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    Waveform::new(s, sample_rate).expect("finite noise")
}

/// Pink (1/f) noise from white noise through Paul Kellet's refined filter.
pub fn pink_noise(seed: u64, len: usize, sample_rate: u32) -> Waveform {
    let white = white_noise(seed, len, sample_rate);
    let mut b = [0.0; 7];
    let mut out: Vec<f64> = white
        .samples()
        .iter()
        .map(|&w| {
            b[0] = 0.99886 * b[0] + w * 0.0555179;
            b[1] = 0.99332 * b[1] + w * 0.0750759;
            b[2] = 0.96900 * b[2] + w * 0.1538520;
            b[3] = 0.86650 * b[3] + w * 0.3104856;
            b[4] = 0.55000 * b[4] + w * 0.5329522;
            b[5] = -0.7616 * b[5] - w * 0.0168980;
            let v = b[..6].iter().sum::<f64>() + b[6] + w * 0.5362;
            b[6] = w * 0.115926;
            v
        })
        .collect();
    normalise_peak(&mut out, 0.9);
    Waveform::new(out, sample_rate).expect("finite noise")
}

/// Several overlapping synthetic talkers at equal level.
pub fn babble(seed: u64, len: usize, sample_rate: u32, talkers: usize) -> Waveform {
    let duration = len as f64 / f64::from(sample_rate);
    let mut out = vec![0.0; len];
    for i in 0..talkers.max(1) {
        let talker = utterance(seed.wrapping_mul(1000).wrapping_add(i as u64), duration, sample_rate);
        let rms = talker.rms().max(1e-12);
        for (o, s) in out.iter_mut().zip(talker.samples()) {
            *o += s / rms;
        }
    }
    normalise_peak(&mut out, 0.9);
    Waveform::new(out, sample_rate).expect("finite babble")
}

/// `signal + g * noise` with `g` chosen so the energy ratio is `snr_db`.
/// The result has the signal's length; the noise must be at least as long.
pub fn mix_at_snr(signal: &Waveform, noise: &Waveform, snr_db: f64) -> Result<Waveform> {
    if signal.sample_rate() != noise.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: signal.sample_rate(),
            right: noise.sample_rate(),
        });
    }
    if noise.len() < signal.len() {
        return Err(Error::ShapeMismatch(format!(
            "noise has {} samples, signal {}",
            noise.len(),
            signal.len()
        )));
    }
    let noise = noise.truncated(signal.len());
    let (es, en) = (signal.energy(), noise.energy());
    if es == 0.0 {
        return Err(Error::Silent("signal"));
    }
    if en == 0.0 {
        return Err(Error::Silent("noise"));
    }
    let g = (es / (en * 10f64.powf(snr_db / 10.0))).sqrt();
    let s = signal
        .samples()
        .iter()
        .zip(noise.samples())
        .map(|(a, b)| a + g * b)
        .collect();
    Waveform::new(s, signal.sample_rate())
}
