//! Signal plumbing shared by both stages: waveforms, STFT analysis and
//! synthesis, resampling, convolution and WAV I/O.

mod conv;
mod resample;
mod stft;
mod wav;
mod window;

pub use conv::fft_convolve;
pub use resample::resample;
pub use stft::{istft, stft, Spectrogram, StftConfig};
pub use wav::{read_wav, write_wav, WavFormat};
pub use window::{window, WindowKind};

use crate::error::{Error, Result};

/// A mono time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    /// Wraps `samples`, rejecting a zero rate and non-finite samples.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidSampleRate(sample_rate));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("waveform"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Largest absolute sample value, 0 for an empty signal.
    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            (self.energy() / self.samples.len() as f64).sqrt()
        }
    }

    pub fn is_silent(&self) -> bool {
        self.samples.iter().all(|&s| s == 0.0)
    }

    /// First `len` samples (or the whole signal when shorter).
    pub fn truncated(&self, len: usize) -> Waveform {
        Waveform {
            samples: self.samples[..len.min(self.samples.len())].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn scaled(&self, gain: f64) -> Waveform {
        Waveform {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Result of [`peak_normalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeakNormalized {
    pub waveform: Waveform,
    /// Set when the input had no nonzero sample; the waveform is then the
    /// input unchanged.
    pub silent: bool,
}

/// Scales `x` so that its largest absolute sample is exactly 1.
pub fn peak_normalize(x: &Waveform) -> PeakNormalized {
    let peak = x.peak();
    if peak == 0.0 {
        return PeakNormalized {
            waveform: x.clone(),
            silent: true,
        };
    }
    let samples = x.samples.iter().map(|s| s / peak).collect();
    PeakNormalized {
        waveform: Waveform {
            samples,
            sample_rate: x.sample_rate,
        },
        silent: false,
    }
}
