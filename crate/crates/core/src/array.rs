//! Two-element array model: steering vectors, the projector onto the
//! orthogonal complement of a null direction, and null-steering weights.
//!
//! Angles are taken in degrees, measured from the array axis (0 deg is
//! endfire on the reference-microphone side). The second microphone lags
//! the first by `spacing * cos(angle) / c` seconds.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::StftConfig;
use crate::error::{Error, Result};

/// Guard against division by zero in the weight denominator.
pub const DEFAULT_EPSILON: f64 = 1.11e-16;

/// Complex 2-vector, one entry per microphone.
pub type Vec2 = [Complex64; 2];

/// Complex 2x2 matrix, row-major.
pub type Mat2 = [[Complex64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArrayGeometry {
    /// Inter-microphone spacing in metres.
    pub spacing: f64,
    /// Speed of sound in m/s.
    pub sound_speed: f64,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self {
            spacing: 0.008,
            sound_speed: 343.0,
        }
    }
}

impl ArrayGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.sound_speed > 0.0)
            || !self.spacing.is_finite()
            || !self.sound_speed.is_finite()
        {
            return Err(Error::InvalidConfig(format!(
                "array geometry needs positive spacing and sound speed, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Inter-microphone phase lag at `omega` (rad/s) for a plane wave from
    /// `angle_deg`.
    pub fn phase_lag(&self, angle_deg: f64, omega: f64) -> f64 {
        omega * self.spacing / self.sound_speed * angle_deg.to_radians().cos()
    }
}

pub(crate) fn check_angle(angle_deg: f64) -> Result<()> {
    if (0.0..=180.0).contains(&angle_deg) {
        Ok(())
    } else {
        Err(Error::InvalidAngle(angle_deg))
    }
}

/// `[1, exp(-j * omega * spacing / c * cos(angle))]`.
pub fn steering_vector(angle_deg: f64, omega: f64, geom: &ArrayGeometry) -> Vec2 {
    [
        Complex64::new(1.0, 0.0),
        Complex64::from_polar(1.0, -geom.phase_lag(angle_deg, omega)),
    ]
}

/// `I - a a^H / 2` for the steering vector `a` of `phi_deg`.
pub fn projection_matrix(phi_deg: f64, omega: f64, geom: &ArrayGeometry) -> Mat2 {
    let a = steering_vector(phi_deg, omega, geom);
    let one = Complex64::new(1.0, 0.0);
    let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            let id = if r == c { one } else { Complex64::new(0.0, 0.0) };
            *v = id - a[r] * a[c].conj() * 0.5;
        }
    }
    m
}

/// `u^H v`.
pub fn inner(u: &Vec2, v: &Vec2) -> Complex64 {
    u[0].conj() * v[0] + u[1].conj() * v[1]
}

/// Null-steering weights for every one-sided bin of an STFT.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeights {
    theta_d: f64,
    phi: f64,
    epsilon: f64,
    sample_rate: u32,
    fft_len: usize,
    pub(crate) per_bin: Vec<Vec2>,
}

impl BeamWeights {
    /// Direction of (near-)unity gain, degrees.
    pub fn theta_d(&self) -> f64 {
        self.theta_d
    }

    /// Null direction, degrees.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn per_bin(&self) -> &[Vec2] {
        &self.per_bin
    }

    pub fn bins(&self) -> usize {
        self.per_bin.len()
    }

    /// Frequency of `bin` in Hz.
    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * f64::from(self.sample_rate) / self.fft_len as f64
    }

    /// Angular frequency of `bin` in rad/s.
    pub fn bin_omega(&self, bin: usize) -> f64 {
        2.0 * PI * self.bin_frequency(bin)
    }

    /// Debug dump: one CSV row per bin with both weights as re/im pairs.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "bin,frequency_hz,w1_re,w1_im,w2_re,w2_im")?;
        for (k, w) in self.per_bin.iter().enumerate() {
            writeln!(
                out,
                "{k},{},{:e},{:e},{:e},{:e}",
                self.bin_frequency(k),
                w[0].re,
                w[0].im,
                w[1].re,
                w[1].im
            )?;
        }
        Ok(())
    }
}

/// Weights `w[k] = Phi[k] a_d[k] / max(a_d[k]^H Phi[k] a_d[k], epsilon)`
/// with the default `epsilon`.
pub fn nsbf_weights(
    theta_d: f64,
    phi: f64,
    geom: &ArrayGeometry,
    cfg: &StftConfig,
    sample_rate: u32,
) -> Result<BeamWeights> {
    nsbf_weights_with_epsilon(theta_d, phi, geom, cfg, sample_rate, DEFAULT_EPSILON)
}

pub fn nsbf_weights_with_epsilon(
    theta_d: f64,
    phi: f64,
    geom: &ArrayGeometry,
    cfg: &StftConfig,
    sample_rate: u32,
    epsilon: f64,
) -> Result<BeamWeights> {
    check_angle(theta_d)?;
    check_angle(phi)?;
    geom.validate()?;
    cfg.validate()?;
    if sample_rate == 0 {
        return Err(Error::InvalidSampleRate(0));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }

    let cos_d = theta_d.to_radians().cos();
    let cos_phi = phi.to_radians().cos();
    let per_bin = (0..cfg.bins())
        .map(|k| {
            let omega = 2.0 * PI * (k as f64 * f64::from(sample_rate) / cfg.fft_len as f64);
            let scale = omega * geom.spacing / geom.sound_speed;
            bin_weight(scale * cos_d, scale * cos_phi, epsilon)
        })
        .collect();

    Ok(BeamWeights {
        theta_d,
        phi,
        epsilon,
        sample_rate,
        fft_len: cfg.fft_len,
        per_bin,
    })
}

/// Weight for one bin given the steering phases of the look and null
/// directions.
///
/// Phi is the rank-one projector `u u^H` with `u = [1, -e_phi] / sqrt(2)`,
/// so `Phi a_d = u (u^H a_d)` and the quadratic form is `|u^H a_d|^2`.
/// Writing `u^H a_d = (1 - exp(j (lag_phi - lag_d))) / sqrt(2)` through the
/// half-angle identity keeps both factors accurate when the two directions
/// have nearly equal phase, which is where the naive `I - a a^H / 2` route
/// loses all significant digits.
fn bin_weight(lag_d: f64, lag_phi: f64, epsilon: f64) -> Vec2 {
    let e_phi = Complex64::from_polar(1.0, -lag_phi);
    let u = [
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        -e_phi * FRAC_1_SQRT_2,
    ];
    let half = 0.5 * (lag_phi - lag_d);
    let s = half.sin();
    // 1 - exp(j 2h) = -2j sin(h) exp(j h)
    let projection = Complex64::from_polar(-(2.0_f64.sqrt()) * s, half) * Complex64::new(0.0, 1.0);
    let form = 2.0 * s * s;
    let coef = projection / form.max(epsilon);
    let w1 = u[1] * coef;
    // w0 = -e_phi^* w1 up to rounding; taking it from the rounded product
    // makes w^H a_phi cancel exactly in floating point, where |w| ~ 1/sin(h)
    // would otherwise leave about |w| ulps.
    let w0 = -(w1.conj() * e_phi).conj();
    [w0, w1]
}
