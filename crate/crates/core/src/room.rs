//! Shoebox-room capture synthesis: image-source impulse responses, source
//! placement relative to the array, and SIR-controlled mixing at the
//! reference microphone.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::array::{check_angle, steering_vector, ArrayGeometry};
use crate::dsp::{fft_convolve, istft, stft, Spectrogram, StftConfig, Waveform};
use crate::error::{Error, Result};

/// Half-width of the windowed-sinc fractional delay (81 taps).
const SINC_HALF_WIDTH: i64 = 40;

/// How the wall absorption is derived from the requested reverberation
/// time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsorptionModel {
    /// `a = 0.161 V / (rt60 S)`, as Pyroomacoustics' `inverse_sabine`. In
    /// small, dry rooms the image-source decay comes out near rt60 / 2.
    #[default]
    Sabine,
    /// `a = 1 - exp(-0.161 V / (rt60 S))`; decay times close to rt60.
    Eyring,
}

/// Scene description. JSON keys mirror the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoomScenario {
    pub room_dims: [f64; 3],
    pub rt60: f64,
    pub mic_center: [f64; 3],
    pub geometry: ArrayGeometry,
    pub speech_angle: f64,
    pub interference_angle: f64,
    /// Distance of both sources from the reference microphone, metres.
    pub source_distance: f64,
    pub sir_db: f64,
    pub max_image_order: usize,
    pub absorption: AbsorptionModel,
    /// Seed for the optional sensor noise.
    pub rng_seed: u64,
    /// Sensor noise level relative to the mixture at mic 1, dB; `None`
    /// disables it.
    pub sensor_noise_db: Option<f64>,
    pub sample_rate: u32,
}

impl Default for RoomScenario {
    fn default() -> Self {
        Self {
            room_dims: [5.0, 6.0, 4.0],
            rt60: 0.15,
            mic_center: [2.5, 3.0, 1.0],
            geometry: ArrayGeometry::default(),
            speech_angle: 90.0,
            interference_angle: 22.5,
            source_distance: 1.5,
            sir_db: 0.0,
            max_image_order: 17,
            absorption: AbsorptionModel::default(),
            rng_seed: 0,
            sensor_noise_db: None,
            sample_rate: 16_000,
        }
    }
}

impl RoomScenario {
    /// Reference microphone (the one on the +x side), then the second one.
    pub fn mic_positions(&self) -> [[f64; 3]; 2] {
        let h = self.geometry.spacing / 2.0;
        let [x, y, z] = self.mic_center;
        [[x + h, y, z], [x - h, y, z]]
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        check_angle(self.speech_angle)?;
        check_angle(self.interference_angle)?;
        if self.room_dims.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidConfig(format!("room dimensions {:?}", self.room_dims)));
        }
        if !(self.rt60 >= 0.0 && self.rt60.is_finite()) {
            return Err(Error::InvalidConfig(format!("rt60 must be >= 0, got {}", self.rt60)));
        }
        if !(self.source_distance > 0.0) {
            return Err(Error::InvalidConfig("source distance must be positive".into()));
        }
        if self.sample_rate == 0 {
            return Err(Error::InvalidSampleRate(0));
        }
        for m in self.mic_positions() {
            check_inside(m, self.room_dims)?;
        }
        wall_reflection(self.room_dims, self.rt60, self.absorption)?;
        Ok(())
    }
}

/// Room impulse response from one source to one microphone.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub taps: Vec<f64>,
    pub sample_rate: u32,
}

impl ImpulseResponse {
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }
}

fn check_inside(p: [f64; 3], dims: [f64; 3]) -> Result<()> {
    if p.iter().zip(&dims).all(|(&v, &d)| v > 0.0 && v < d) {
        Ok(())
    } else {
        Err(Error::OutsideRoom {
            position: p,
            dims,
        })
    }
}

/// Uniform pressure reflection coefficient `sqrt(1 - a)` of the walls for
/// energy absorption `a`. An rt60 of zero means anechoic.
pub fn wall_reflection(dims: [f64; 3], rt60: f64, model: AbsorptionModel) -> Result<f64> {
    if rt60 == 0.0 {
        return Ok(0.0);
    }
    let [lx, ly, lz] = dims;
    let volume = lx * ly * lz;
    let surface = 2.0 * (lx * ly + lx * lz + ly * lz);
    let sabine = 0.161 * volume / (rt60 * surface);
    let absorption = match model {
        AbsorptionModel::Sabine => sabine,
        AbsorptionModel::Eyring => 1.0 - (-sabine).exp(),
    };
    if absorption > 1.0 {
        return Err(Error::AbsorptionOutOfRange { rt60, absorption });
    }
    Ok((1.0 - absorption).sqrt())
}

/// Image-source impulse response (Allen and Berkley) with uniform wall
/// absorption from `rt60`. Each image at distance `d` after `n` reflections
/// adds `beta^n / (4 pi d)` at delay `d / c`, spread over 81 taps of a
/// Hann-windowed sinc. Taps falling before time zero are dropped.
pub fn image_source_rir(
    room_dims: [f64; 3],
    source: [f64; 3],
    mic: [f64; 3],
    rt60: f64,
    model: AbsorptionModel,
    max_order: usize,
    sample_rate: u32,
    sound_speed: f64,
) -> Result<ImpulseResponse> {
    check_inside(source, room_dims)?;
    check_inside(mic, room_dims)?;
    if sample_rate == 0 {
        return Err(Error::InvalidSampleRate(0));
    }
    let beta = wall_reflection(room_dims, rt60, model)?;
    let order = if beta == 0.0 { 0 } else { max_order as i64 };
    let fs = f64::from(sample_rate);

    let mut images = Vec::new();
    for nx in -order..=order {
        for ny in -order..=order {
            for nz in -order..=order {
                for q in 0..8u8 {
                    let q = [(q & 1) as i64, ((q >> 1) & 1) as i64, ((q >> 2) & 1) as i64];
                    let n = [nx, ny, nz];
                    let reflections: i64 = (0..3).map(|i| (n[i] - q[i]).abs() + n[i].abs()).sum();
                    if reflections > order {
                        continue;
                    }
                    let mut d2 = 0.0;
                    for i in 0..3 {
                        let pos = (1 - 2 * q[i]) as f64 * source[i] + 2.0 * n[i] as f64 * room_dims[i];
                        d2 += (pos - mic[i]).powi(2);
                    }
                    let d = d2.sqrt();
                    let gain = beta.powi(reflections as i32) / (4.0 * PI * d);
                    images.push((d / sound_speed * fs, gain));
                }
            }
        }
    }

    let last = images.iter().map(|&(t, _)| t).fold(0.0, f64::max);
    let len = last.floor() as usize + SINC_HALF_WIDTH as usize + 2;
    let mut taps = vec![0.0; len];
    for (delay, gain) in images {
        add_fractional_impulse(&mut taps, delay, gain);
    }
    Ok(ImpulseResponse { taps, sample_rate })
}

fn add_fractional_impulse(taps: &mut [f64], delay: f64, gain: f64) {
    let centre = delay.floor() as i64;
    let width = (SINC_HALF_WIDTH + 1) as f64;
    for t in centre - SINC_HALF_WIDTH..=centre + SINC_HALF_WIDTH + 1 {
        if t < 0 || t as usize >= taps.len() {
            continue;
        }
        let x = t as f64 - delay;
        if x.abs() >= width {
            continue;
        }
        let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
        let hann = 0.5 * (1.0 + (PI * x / width).cos());
        taps[t as usize] += gain * sinc * hann;
    }
}

/// Source position at `source_distance` from the reference microphone, in
/// the horizontal plane of the array, `angle` degrees from the +x axis.
pub fn place_source(scenario: &RoomScenario, angle: f64) -> Result<[f64; 3]> {
    check_angle(angle)?;
    let [m, _] = scenario.mic_positions();
    let a = angle.to_radians();
    let r = scenario.source_distance;
    let p = [m[0] + r * a.cos(), m[1] + r * a.sin(), m[2]];
    check_inside(p, scenario.room_dims)?;
    Ok(p)
}

/// Two-channel capture from the array.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoCapture {
    pub ch1: Waveform,
    pub ch2: Waveform,
    pub geometry: ArrayGeometry,
}

impl StereoCapture {
    pub fn new(ch1: Waveform, ch2: Waveform, geometry: ArrayGeometry) -> Result<Self> {
        if ch1.sample_rate() != ch2.sample_rate() {
            return Err(Error::SampleRateMismatch {
                left: ch1.sample_rate(),
                right: ch2.sample_rate(),
            });
        }
        if ch1.len() != ch2.len() {
            return Err(Error::ShapeMismatch(format!(
                "channels have {} and {} samples",
                ch1.len(),
                ch2.len()
            )));
        }
        geometry.validate()?;
        Ok(Self { ch1, ch2, geometry })
    }

    pub fn sample_rate(&self) -> u32 {
        self.ch1.sample_rate()
    }

    pub fn len(&self) -> usize {
        self.ch1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ch1.is_empty()
    }
}

/// A simulated capture together with its separated components.
#[derive(Debug, Clone)]
pub struct SimulatedScene {
    pub capture: StereoCapture,
    /// Speech image at each microphone.
    pub speech_images: [Waveform; 2],
    /// Scaled interference image at each microphone.
    pub interference_images: [Waveform; 2],
    /// Gain applied to the interference to reach the requested SIR.
    pub interference_gain: f64,
    /// Impulse responses: `[speech, interference][mic]`. Far-field scenes
    /// carry unit pulses here.
    pub rirs: [[ImpulseResponse; 2]; 2],
}

/// Renders both sources into the room and mixes them so that the SIR at the
/// reference microphone equals `scenario.sir_db`. The interference is
/// truncated or cyclically repeated to the speech length.
pub fn simulate_capture(
    scenario: &RoomScenario,
    speech: &Waveform,
    interference: &Waveform,
) -> Result<SimulatedScene> {
    scenario.validate()?;
    for w in [speech, interference] {
        if w.sample_rate() != scenario.sample_rate {
            return Err(Error::SampleRateMismatch {
                left: scenario.sample_rate,
                right: w.sample_rate(),
            });
        }
    }
    if speech.is_empty() {
        return Err(Error::EmptySignal);
    }
    if interference.is_silent() {
        return Err(Error::Silent("interference"));
    }
    let interference = fit_length(interference, speech.len());

    let mics = scenario.mic_positions();
    let rir = |angle: f64, mic: usize| -> Result<ImpulseResponse> {
        let src = place_source(scenario, angle)?;
        image_source_rir(
            scenario.room_dims,
            src,
            mics[mic],
            scenario.rt60,
            scenario.absorption,
            scenario.max_image_order,
            scenario.sample_rate,
            scenario.geometry.sound_speed,
        )
    };
    let (speech_rirs, interference_rirs) = rayon::join(
        || -> Result<[ImpulseResponse; 2]> { Ok([rir(scenario.speech_angle, 0)?, rir(scenario.speech_angle, 1)?]) },
        || -> Result<[ImpulseResponse; 2]> {
            Ok([rir(scenario.interference_angle, 0)?, rir(scenario.interference_angle, 1)?])
        },
    );
    let (speech_rirs, interference_rirs) = (speech_rirs?, interference_rirs?);

    let speech_img: Vec<Vec<f64>> = speech_rirs.iter().map(|g| fft_convolve(speech.samples(), &g.taps)).collect();
    let interf_img: Vec<Vec<f64>> = interference_rirs
        .iter()
        .map(|g| fft_convolve(interference.samples(), &g.taps))
        .collect();

    let es: f64 = speech_img[0].iter().map(|v| v * v).sum();
    let ei: f64 = interf_img[0].iter().map(|v| v * v).sum();
    if es == 0.0 {
        return Err(Error::Silent("speech at the reference microphone"));
    }
    if ei == 0.0 {
        return Err(Error::Silent("interference at the reference microphone"));
    }
    let gamma = (es / (ei * 10f64.powf(scenario.sir_db / 10.0))).sqrt();

    let len = speech_img
        .iter()
        .chain(&interf_img)
        .map(Vec::len)
        .max()
        .unwrap_or(0);
    let pad = |v: &[f64], g: f64| {
        let mut out: Vec<f64> = v.iter().map(|x| x * g).collect();
        out.resize(len, 0.0);
        out
    };
    let fs = scenario.sample_rate;
    let s_img = [pad(&speech_img[0], 1.0), pad(&speech_img[1], 1.0)];
    let i_img = [pad(&interf_img[0], gamma), pad(&interf_img[1], gamma)];
    let mut channels: Vec<Vec<f64>> = (0..2)
        .map(|m| s_img[m].iter().zip(&i_img[m]).map(|(a, b)| a + b).collect())
        .collect();

    if let Some(level_db) = scenario.sensor_noise_db {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(scenario.rng_seed);
        let ref_power = channels[0].iter().map(|v| v * v).sum::<f64>() / len as f64;
        let sigma = (ref_power * 10f64.powf(level_db / 10.0)).sqrt();
        for ch in channels.iter_mut() {
            for v in ch.iter_mut() {
                let n: f64 = StandardNormal.sample(&mut rng);
                *v += sigma * n;
            }
        }
    }

    let [c1, c2]: [Vec<f64>; 2] = channels.try_into().expect("two channels");
    let [s1, s2] = s_img;
    let [i1, i2] = i_img;
    Ok(SimulatedScene {
        capture: StereoCapture::new(Waveform::new(c1, fs)?, Waveform::new(c2, fs)?, scenario.geometry)?,
        speech_images: [Waveform::new(s1, fs)?, Waveform::new(s2, fs)?],
        interference_images: [Waveform::new(i1, fs)?, Waveform::new(i2, fs)?],
        interference_gain: gamma,
        rirs: [speech_rirs, interference_rirs],
    })
}

/// Second channel of a far-field plane wave from `angle`: every STFT bin of
/// `x1` gets the steering phase of mic 2.
pub fn far_field_second_channel(x1: &Spectrogram, angle: f64, geom: &ArrayGeometry) -> Result<Spectrogram> {
    check_angle(angle)?;
    let bins = x1.bins();
    let data = x1
        .data()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let omega = 2.0 * PI * x1.bin_frequency(i % bins);
            v * steering_vector(angle, omega, geom)[1]
        })
        .collect();
    Spectrogram::new(data, x1.frames(), *x1.config(), x1.sample_rate(), x1.signal_len())
}

/// Anechoic far-field capture under the narrowband array model: mic 1 hears
/// the dry signals, mic 2 the same signals phase-shifted per STFT bin. The
/// interference is scaled for `sir_db` at mic 1.
pub fn far_field_capture(
    speech: &Waveform,
    interference: &Waveform,
    theta_s: f64,
    theta_i: f64,
    sir_db: f64,
    geom: &ArrayGeometry,
    cfg: &StftConfig,
) -> Result<SimulatedScene> {
    geom.validate()?;
    if speech.sample_rate() != interference.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: speech.sample_rate(),
            right: interference.sample_rate(),
        });
    }
    if speech.is_silent() {
        return Err(Error::Silent("speech"));
    }
    if interference.is_silent() {
        return Err(Error::Silent("interference"));
    }
    let interference = fit_length(interference, speech.len());
    let gamma = (speech.energy() / (interference.energy() * 10f64.powf(sir_db / 10.0))).sqrt();
    let interference = interference.scaled(gamma);

    let second = |x: &Waveform, angle: f64| -> Result<Waveform> {
        istft(&far_field_second_channel(&stft(x, cfg)?, angle, geom)?)
    };
    let s2 = second(speech, theta_s)?;
    let i2 = second(&interference, theta_i)?;
    let add = |a: &Waveform, b: &Waveform| -> Result<Waveform> {
        Waveform::new(a.samples().iter().zip(b.samples()).map(|(x, y)| x + y).collect(), a.sample_rate())
    };
    let capture = StereoCapture::new(add(speech, &interference)?, add(&s2, &i2)?, *geom)?;
    let direct = ImpulseResponse {
        taps: vec![1.0],
        sample_rate: speech.sample_rate(),
    };
    Ok(SimulatedScene {
        capture,
        speech_images: [speech.clone(), s2],
        interference_images: [interference, i2],
        interference_gain: gamma,
        rirs: std::array::from_fn(|_| [direct.clone(), direct.clone()]),
    })
}

fn fit_length(x: &Waveform, len: usize) -> Waveform {
    if x.len() >= len {
        return x.truncated(len);
    }
    let s = x.samples().iter().cycle().take(len).copied().collect();
    Waveform::new(s, x.sample_rate()).expect("finite input")
}
