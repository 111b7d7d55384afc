use std::f64::consts::PI;

use super::Waveform;
use crate::error::{Error, Result};

/// Polyphase rational resampling with a Kaiser-windowed sinc low-pass
/// (60 dB rejection, transition width a tenth of the cutoff).
///
/// Output length is `round(len * target / source)`. Equal rates return the
/// input unchanged.
pub fn resample(x: &Waveform, target_rate: u32) -> Result<Waveform> {
    if target_rate == 0 {
        return Err(Error::InvalidSampleRate(target_rate));
    }
    let source_rate = x.sample_rate();
    if source_rate == target_rate {
        return Ok(x.clone());
    }
    let g = gcd(source_rate as u64, target_rate as u64);
    let up = target_rate as u64 / g;
    let down = source_rate as u64 / g;

    let taps = design_filter(up, down);
    let half = (taps.len() / 2) as i64;
    let up_i = up as i64;
    let n_in = x.len() as i64;
    let n_out = ((x.len() as f64) * up as f64 / down as f64).round() as usize;
    let samples = x.samples();

    let out = (0..n_out)
        .map(|j| {
            // Output sample j sits at position j*down on the upsampled grid.
            let centre = j as i64 * down as i64;
            let first = (centre - half).div_euclid(up_i) + i64::from((centre - half).rem_euclid(up_i) != 0);
            let last = (centre + half).div_euclid(up_i);
            let mut acc = 0.0;
            for i in first.max(0)..=last.min(n_in - 1) {
                acc += taps[(centre - i * up_i + half) as usize] * samples[i as usize];
            }
            acc
        })
        .collect();
    Waveform::new(out, target_rate)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Low-pass prototype on the upsampled grid, normalised to a DC gain of `up`
/// so that every polyphase branch has unit DC gain.
fn design_filter(up: u64, down: u64) -> Vec<f64> {
    let rejection_db = 60.0;
    let cutoff = 1.0 / (2.0 * up.max(down) as f64);
    let roll_off = cutoff / 10.0;
    let half = ((rejection_db - 8.0) / (28.714 * roll_off)).ceil() as i64;
    let beta = 0.1102 * (rejection_db - 8.7);
    let len = 2 * half + 1;

    let i0_beta = bessel_i0(beta);
    let mut h: Vec<f64> = (-half..=half)
        .map(|t| {
            let arg = 2.0 * cutoff * t as f64;
            let sinc = if t == 0 {
                1.0
            } else {
                (PI * arg).sin() / (PI * arg)
            };
            let r = t as f64 / half as f64;
            let kaiser = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            sinc * kaiser
        })
        .collect();
    debug_assert_eq!(h.len() as i64, len);
    let sum: f64 = h.iter().sum();
    let gain = up as f64 / sum;
    h.iter_mut().for_each(|v| *v *= gain);
    h
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rustfft::FftPlanner;

    fn tone(freq: f64, fs: u32, len: usize) -> Waveform {
        let s = (0..len)
            .map(|t| (2.0 * PI * freq * t as f64 / fs as f64).sin())
            .collect();
        Waveform::new(s, fs).unwrap()
    }

    /// Frequency of the largest FFT peak, refined by parabolic interpolation
    /// on log magnitudes of a Hann-windowed frame.
    fn dominant_frequency(x: &Waveform) -> f64 {
        let n = x.len();
        let mut buf: Vec<Complex64> = x
            .samples()
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos();
                Complex64::new(s * w, 0.0)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let mags: Vec<f64> = buf[..n / 2].iter().map(|c| c.norm().max(1e-300).ln()).collect();
        let k = (1..mags.len() - 1)
            .max_by(|&a, &b| mags[a].total_cmp(&mags[b]))
            .unwrap();
        let (a, b, c) = (mags[k - 1], mags[k], mags[k + 1]);
        let delta = 0.5 * (a - c) / (a - 2.0 * b + c);
        (k as f64 + delta) * x.sample_rate() as f64 / n as f64
    }

    #[test]
    fn same_rate_is_identity() {
        let x = tone(440.0, 16000, 1000);
        assert_eq!(resample(&x, 16000).unwrap(), x);
    }

    #[test]
    fn zero_rate_is_an_error() {
        let x = tone(440.0, 16000, 100);
        assert!(matches!(resample(&x, 0), Err(Error::InvalidSampleRate(0))));
    }

    #[test]
    fn tone_frequency_preserved_16k_to_10k() {
        let x = tone(1000.0, 16000, 16000);
        let y = resample(&x, 10000).unwrap();
        assert_eq!(y.len(), 10000);
        assert_eq!(y.sample_rate(), 10000);
        let f = dominant_frequency(&y);
        assert!((f - 1000.0).abs() < 1.0, "peak at {f} Hz");
    }

    #[test]
    fn tone_frequency_preserved_upsampling() {
        let x = tone(1234.0, 10000, 10000);
        let y = resample(&x, 16000).unwrap();
        assert_eq!(y.len(), 16000);
        let f = dominant_frequency(&y);
        assert!((f - 1234.0).abs() < 1.0, "peak at {f} Hz");
    }

    #[test]
    fn length_rounds() {
        let x = Waveform::zeros(1001, 16000).unwrap();
        // 1001 * 5 / 8 = 625.625
        assert_eq!(resample(&x, 10000).unwrap().len(), 626);
        let x = Waveform::zeros(1003, 44100).unwrap();
        assert_eq!(resample(&x, 16000).unwrap().len(), 364);
    }

    #[test]
    fn constant_stays_constant_in_interior() {
        let x = Waveform::new(vec![0.7; 8000], 16000).unwrap();
        let y = resample(&x, 10000).unwrap();
        let edge = 300;
        for &v in &y.samples()[edge..y.len() - edge] {
            assert!((v - 0.7).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn tone_above_target_nyquist_is_rejected() {
        // 7 kHz cannot be represented at 10 kHz.
        let x = tone(7000.0, 16000, 16000);
        let y = resample(&x, 10000).unwrap();
        let interior = &y.samples()[500..9500];
        let rms = (interior.iter().map(|v| v * v).sum::<f64>() / interior.len() as f64).sqrt();
        assert!(rms < 0.01, "leakage rms {rms}");
    }

    #[test]
    fn bessel_reference_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i0(5.0) - 27.239_871_823_604_45).abs() < 1e-11);
    }
}
