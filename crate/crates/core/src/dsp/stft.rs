use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::window::{window, WindowKind};
use super::Waveform;
use crate::error::{Error, Result};

/// Framing parameters for [`stft`] / [`istft`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
    pub window: WindowKind,
    pub fft_len: usize,
}

impl Default for StftConfig {
    /// 512-sample periodic Hamming frames with 50% overlap.
    fn default() -> Self {
        Self {
            window_len: 512,
            hop: 256,
            window: WindowKind::Hamming,
            fft_len: 512,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.hop > self.window_len || self.window_len > self.fft_len {
            return Err(Error::InvalidConfig(format!(
                "stft needs 0 < hop <= window_len <= fft_len, got hop={} window_len={} fft_len={}",
                self.hop, self.window_len, self.fft_len
            )));
        }
        Ok(())
    }

    /// Number of one-sided frequency bins.
    pub fn bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Frames needed to cover `signal_len` samples, zero-padding the tail.
    pub fn frame_count(&self, signal_len: usize) -> usize {
        if signal_len <= self.window_len {
            1
        } else {
            (signal_len - self.window_len).div_ceil(self.hop) + 1
        }
    }
}

/// One-sided complex STFT, stored frame-major (`frames × bins`).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    data: Vec<Complex64>,
    frames: usize,
    config: StftConfig,
    sample_rate: u32,
    signal_len: usize,
}

impl Spectrogram {
    /// Builds a spectrogram from raw frame-major data. `signal_len` is the
    /// length of the time signal [`istft`] should produce.
    pub fn new(
        data: Vec<Complex64>,
        frames: usize,
        config: StftConfig,
        sample_rate: u32,
        signal_len: usize,
    ) -> Result<Self> {
        config.validate()?;
        if data.len() != frames * config.bins() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} frames of {} bins",
                data.len(),
                frames,
                config.bins()
            )));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("spectrogram"));
        }
        Ok(Self {
            data,
            frames,
            config,
            sample_rate,
            signal_len,
        })
    }

    /// An all-zero spectrogram with the same shape and metadata as `self`.
    pub fn zeros_like(&self) -> Self {
        Self {
            data: vec![Complex64::new(0.0, 0.0); self.data.len()],
            ..self.clone()
        }
    }

    /// Same shape and metadata, different values. Used by per-bin filters,
    /// which preserve finiteness of finite inputs.
    pub(crate) fn with_data(&self, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            data,
            ..self.clone()
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.config.bins()
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn frame(&self, n: usize) -> &[Complex64] {
        let k = self.bins();
        &self.data[n * k..(n + 1) * k]
    }

    pub fn get(&self, frame: usize, bin: usize) -> Complex64 {
        self.data[frame * self.bins() + bin]
    }

    /// Centre frequency of `bin` in Hz.
    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * f64::from(self.sample_rate) / self.config.fft_len as f64
    }

    /// True when both spectrograms can be combined bin by bin.
    pub fn same_shape(&self, other: &Spectrogram) -> bool {
        self.frames == other.frames
            && self.config == other.config
            && self.sample_rate == other.sample_rate
            && self.signal_len == other.signal_len
    }
}

/// Short-time Fourier transform of `x`. Frame `n` covers samples
/// `n*hop .. n*hop + window_len`; the last frame is zero-padded.
pub fn stft(x: &Waveform, cfg: &StftConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(Error::EmptySignal);
    }
    let frames = cfg.frame_count(x.len());
    let bins = cfg.bins();
    let win = window(cfg.window, cfg.window_len);
    let fft = FftPlanner::new().plan_fft_forward(cfg.fft_len);
    let samples = x.samples();

    let mut data = Vec::with_capacity(frames * bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_len];
    for n in 0..frames {
        let start = n * cfg.hop;
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (i, w) in win.iter().enumerate() {
            if let Some(&s) = samples.get(start + i) {
                buf[i].re = s * w;
            }
        }
        fft.process(&mut buf);
        data.extend_from_slice(&buf[..bins]);
    }
    Spectrogram::new(data, frames, *cfg, x.sample_rate(), x.len())
}

/// Weighted overlap-add inverse of [`stft`], normalised by the summed
/// squared synthesis window.
pub fn istft(spec: &Spectrogram) -> Result<Waveform> {
    let cfg = spec.config;
    let bins = cfg.bins();
    let n_fft = cfg.fft_len;
    let win = window(cfg.window, cfg.window_len);
    let ifft = FftPlanner::new().plan_fft_inverse(n_fft);

    let full_len = (spec.frames - 1) * cfg.hop + cfg.window_len;
    let mut out = vec![0.0; full_len];
    let mut norm = vec![0.0; full_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    let scale = 1.0 / n_fft as f64;

    for n in 0..spec.frames {
        let frame = spec.frame(n);
        buf[..bins].copy_from_slice(frame);
        // DC and Nyquist of a real signal are real.
        buf[0].im = 0.0;
        if n_fft.is_multiple_of(2) {
            buf[bins - 1].im = 0.0;
        }
        for k in bins..n_fft {
            buf[k] = buf[n_fft - k].conj();
        }
        ifft.process(&mut buf);
        let start = n * cfg.hop;
        for (i, w) in win.iter().enumerate() {
            out[start + i] += buf[i].re * scale * w;
            norm[start + i] += w * w;
        }
    }

    let len = spec.signal_len.min(full_len);
    let peak_norm = norm.iter().cloned().fold(0.0, f64::max);
    let floor = peak_norm * 1e-12;
    for t in 0..len {
        if norm[t] > floor {
            out[t] /= norm[t];
        } else if t >= cfg.window_len && t + cfg.window_len < len {
            return Err(Error::ZeroWindowSum(t));
        } else {
            out[t] = 0.0;
        }
    }
    out.truncate(len);
    Waveform::new(out, spec.sample_rate)
}
