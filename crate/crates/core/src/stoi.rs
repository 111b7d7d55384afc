//! Short-time objective intelligibility (STOI) of a degraded signal against
//! its clean reference.
//!
//! Both signals are resampled to 10 kHz, frames that are more than 40 dB
//! below the loudest clean frame are dropped from both, and the one-third
//! octave band envelopes are compared over sliding 30-frame segments after
//! per-segment normalisation and clipping of the degraded envelope.

use std::ops::Range;

use crate::dsp::{resample, stft, window, Spectrogram, StftConfig, Waveform, WindowKind};
use crate::error::{Error, Result};

const EPS: f64 = f64::EPSILON;

/// Constants of the intelligibility measure. The defaults are the standard
/// parameterisation; other values are accepted but no longer define STOI.
#[derive(Debug, Clone, PartialEq)]
pub struct StoiConfig {
    pub internal_rate: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub fft_len: usize,
    pub num_bands: usize,
    /// Centre frequency of the lowest one-third octave band, Hz.
    pub lowest_center: f64,
    /// Frames per intermediate-intelligibility segment.
    pub segment_len: usize,
    /// Lower signal-to-distortion bound in dB.
    pub clip_db: f64,
    /// Frames quieter than the loudest clean frame by more than this are
    /// discarded.
    pub silence_range_db: f64,
}

impl Default for StoiConfig {
    fn default() -> Self {
        Self {
            internal_rate: 10_000,
            frame_len: 256,
            hop: 128,
            fft_len: 512,
            num_bands: 15,
            lowest_center: 150.0,
            segment_len: 30,
            clip_db: -15.0,
            silence_range_db: 40.0,
        }
    }
}

impl StoiConfig {
    fn stft_config(&self) -> StftConfig {
        StftConfig {
            window_len: self.frame_len,
            hop: self.hop,
            window: WindowKind::Hanning,
            fft_len: self.fft_len,
        }
    }

    /// Number of analysis frames for a signal of `len` samples: frames start
    /// at multiples of `hop` strictly before `len - frame_len`.
    fn frames_in(&self, len: usize) -> usize {
        if len <= self.frame_len {
            0
        } else {
            (len - self.frame_len).div_ceil(self.hop)
        }
    }

    /// Centre frequency of band `j` in Hz.
    pub fn band_center(&self, j: usize) -> f64 {
        self.lowest_center * 2f64.powf(j as f64 / 3.0)
    }

    /// FFT bin range of every band. Band edges sit one sixth of an octave
    /// either side of the centre, each snapped to the nearest bin; the
    /// upper edge bin is exclusive.
    pub fn band_bins(&self) -> Vec<Range<usize>> {
        let bins = self.fft_len / 2 + 1;
        let df = f64::from(self.internal_rate) / self.fft_len as f64;
        let nearest = |f: f64| {
            (0..bins)
                .min_by(|&a, &b| {
                    let da = (a as f64 * df - f).powi(2);
                    let db = (b as f64 * df - f).powi(2);
                    da.total_cmp(&db)
                })
                .unwrap_or(0)
        };
        (0..self.num_bands)
            .map(|j| {
                let k = j as f64;
                let low = self.lowest_center * 2f64.powf((2.0 * k - 1.0) / 6.0);
                let high = self.lowest_center * 2f64.powf((2.0 * k + 1.0) / 6.0);
                nearest(low)..nearest(high)
            })
            .collect()
    }
}

/// Drops the clean signal's silent frames from both signals and
/// overlap-adds the remaining windowed frames.
pub fn remove_silence(
    clean: &Waveform,
    degraded: &Waveform,
    cfg: &StoiConfig,
) -> Result<(Waveform, Waveform)> {
    if clean.sample_rate() != degraded.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: clean.sample_rate(),
            right: degraded.sample_rate(),
        });
    }
    if clean.len() != degraded.len() {
        return Err(Error::ShapeMismatch(format!(
            "clean has {} samples, degraded {}",
            clean.len(),
            degraded.len()
        )));
    }
    let frames = cfg.frames_in(clean.len());
    if frames == 0 {
        return Err(Error::TooShort {
            frames: 0,
            needed: cfg.segment_len,
        });
    }
    let win = window(WindowKind::Hanning, cfg.frame_len);
    let frame_energy_db = |x: &[f64], start: usize| {
        let e: f64 = win
            .iter()
            .zip(&x[start..start + cfg.frame_len])
            .map(|(w, s)| (w * s).powi(2))
            .sum();
        20.0 * (e.sqrt() + EPS).log10()
    };
    let energies: Vec<f64> = (0..frames)
        .map(|n| frame_energy_db(clean.samples(), n * cfg.hop))
        .collect();
    let loudest = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if loudest <= 20.0 * EPS.log10() {
        return Err(Error::Silent("clean reference"));
    }
    let kept: Vec<usize> = (0..frames)
        .filter(|&n| energies[n] > loudest - cfg.silence_range_db)
        .collect();

    let out_len = (kept.len() - 1) * cfg.hop + cfg.frame_len;
    let overlap_add = |x: &[f64]| {
        let mut out = vec![0.0; out_len];
        for (slot, &n) in kept.iter().enumerate() {
            let src = &x[n * cfg.hop..n * cfg.hop + cfg.frame_len];
            let dst = &mut out[slot * cfg.hop..slot * cfg.hop + cfg.frame_len];
            for ((d, s), w) in dst.iter_mut().zip(src).zip(&win) {
                *d += s * w;
            }
        }
        out
    };
    Ok((
        Waveform::new(overlap_add(clean.samples()), clean.sample_rate())?,
        Waveform::new(overlap_add(degraded.samples()), degraded.sample_rate())?,
    ))
}

/// Per-frame one-third octave band magnitudes, `frames × num_bands`.
pub fn third_octave_energies(spec: &Spectrogram, cfg: &StoiConfig) -> Result<Vec<Vec<f64>>> {
    if spec.sample_rate() != cfg.internal_rate || spec.config().fft_len != cfg.fft_len {
        return Err(Error::InvalidConfig(format!(
            "band analysis expects {} Hz / {}-point spectra, got {} Hz / {}",
            cfg.internal_rate,
            cfg.fft_len,
            spec.sample_rate(),
            spec.config().fft_len
        )));
    }
    let bands = cfg.band_bins();
    Ok((0..spec.frames())
        .map(|n| {
            let frame = spec.frame(n);
            bands
                .iter()
                .map(|r| frame[r.clone()].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
                .collect()
        })
        .collect())
}

/// A clean reference resampled once, for scoring many degraded signals.
#[derive(Debug, Clone)]
pub struct StoiReference {
    clean: Waveform,
    source_rate: u32,
    cfg: StoiConfig,
}

impl StoiReference {
    pub fn new(clean: &Waveform) -> Result<Self> {
        Self::with_config(clean, StoiConfig::default())
    }

    pub fn with_config(clean: &Waveform, cfg: StoiConfig) -> Result<Self> {
        if clean.is_empty() {
            return Err(Error::EmptySignal);
        }
        Ok(Self {
            clean: resample(clean, cfg.internal_rate)?,
            source_rate: clean.sample_rate(),
            cfg,
        })
    }

    /// STOI of `degraded`, which must share the reference's sample rate.
    /// The longer of the two is truncated after resampling.
    pub fn score(&self, degraded: &Waveform) -> Result<f64> {
        if degraded.sample_rate() != self.source_rate {
            return Err(Error::SampleRateMismatch {
                left: self.source_rate,
                right: degraded.sample_rate(),
            });
        }
        if degraded.is_empty() {
            return Err(Error::EmptySignal);
        }
        let degraded = resample(degraded, self.cfg.internal_rate)?;
        let len = self.clean.len().min(degraded.len());
        intelligibility(&self.clean.truncated(len), &degraded.truncated(len), &self.cfg)
    }
}

/// STOI score in `[0, 1]` of `degraded` against `clean`.
pub fn stoi(clean: &Waveform, degraded: &Waveform) -> Result<f64> {
    if clean.sample_rate() != degraded.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: clean.sample_rate(),
            right: degraded.sample_rate(),
        });
    }
    StoiReference::new(clean)?.score(degraded)
}

fn intelligibility(clean: &Waveform, degraded: &Waveform, cfg: &StoiConfig) -> Result<f64> {
    let (clean, degraded) = remove_silence(clean, degraded, cfg)?;
    let frames = cfg.frames_in(clean.len());
    if frames < cfg.segment_len {
        return Err(Error::TooShort {
            frames,
            needed: cfg.segment_len,
        });
    }
    // Drop the tail so the STFT produces exactly `frames` unpadded frames.
    let keep = (frames - 1) * cfg.hop + cfg.frame_len;
    let stft_cfg = cfg.stft_config();
    let x = third_octave_energies(&stft(&clean.truncated(keep), &stft_cfg)?, cfg)?;
    let y = third_octave_energies(&stft(&degraded.truncated(keep), &stft_cfg)?, cfg)?;

    let clip = 1.0 + 10f64.powf(-cfg.clip_db / 20.0);
    let n = cfg.segment_len;
    let segments = frames - n + 1;
    let mut total = 0.0;
    let mut xs = vec![0.0; n];
    let mut ys = vec![0.0; n];
    for j in 0..cfg.num_bands {
        for m in 0..segments {
            for t in 0..n {
                xs[t] = x[m + t][j];
                ys[t] = y[m + t][j];
            }
            total += segment_correlation(&mut xs, &mut ys, clip);
        }
    }
    let d = total / (cfg.num_bands * segments) as f64;
    Ok(d.clamp(0.0, 1.0))
}

/// Correlation of one band segment after scaling the degraded envelope to
/// the clean norm and clipping it at `clip` times the clean envelope.
fn segment_correlation(x: &mut [f64], y: &mut [f64], clip: f64) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let alpha = norm(x) / (norm(y) + EPS);
    for (yv, xv) in y.iter_mut().zip(x.iter()) {
        *yv = (*yv * alpha).min(*xv * clip);
    }
    let centre = |v: &mut [f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter_mut().for_each(|a| *a -= mean);
        let n = norm(v) + EPS;
        v.iter_mut().for_each(|a| *a /= n);
    };
    centre(x);
    centre(y);
    x.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}
