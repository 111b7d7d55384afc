//! Stage one: run every null-steering beamformer of the angle grid over the
//! captured pair.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::array::{check_angle, nsbf_weights, ArrayGeometry, BeamWeights};
use crate::dsp::{istft, peak_normalize, write_wav, Spectrogram, WavFormat, Waveform};
use crate::error::{Error, Result};

/// Ordered set of candidate null angles in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    angles: Vec<f64>,
}

impl AngleGrid {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.len() < 2 {
            return Err(Error::InvalidConfig("angle grid needs at least two angles".into()));
        }
        for &a in &angles {
            check_angle(a)?;
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("angle grid must be strictly increasing".into()));
        }
        Ok(Self { angles })
    }

    /// `0, step, 2*step, ...` up to and including 180 when it lands on the grid.
    pub fn uniform(step: f64) -> Result<Self> {
        if !(step > 0.0 && step <= 180.0) {
            return Err(Error::InvalidConfig(format!("grid step must be in (0, 180], got {step}")));
        }
        let count = (180.0 / step + 1e-9).floor() as usize + 1;
        Self::new((0..count).map(|i| i as f64 * step).collect())
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Index of `angle` when it is a grid member, compared at 0.1 deg.
    pub fn position(&self, angle: f64) -> Option<usize> {
        let key = decidegrees(angle);
        self.angles.iter().position(|&a| decidegrees(a) == key)
    }
}

impl Default for AngleGrid {
    /// 0 to 180 degrees in 2 degree steps (91 angles).
    fn default() -> Self {
        Self::uniform(2.0).expect("default grid is valid")
    }
}

fn decidegrees(angle: f64) -> i64 {
    (angle * 10.0).round() as i64
}

/// The beamformed spectrograms for one look direction `psi`.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub candidates: Vec<Spectrogram>,
    pub psi: f64,
    pub grid: AngleGrid,
    /// Grid index equal to `psi`, whose candidate is the reference channel.
    pub passthrough_index: Option<usize>,
}

/// Filter-and-sum: `Y[n, k] = w[k]^H [X1[n, k], X2[n, k]]`.
pub fn apply_beamformer(w: &BeamWeights, x1: &Spectrogram, x2: &Spectrogram) -> Result<Spectrogram> {
    if !x1.same_shape(x2) {
        return Err(Error::ShapeMismatch(format!(
            "channel spectrograms differ: {}x{} vs {}x{}",
            x1.frames(),
            x1.bins(),
            x2.frames(),
            x2.bins()
        )));
    }
    if w.bins() != x1.bins() {
        return Err(Error::ShapeMismatch(format!(
            "{} weight bins for {} spectrogram bins",
            w.bins(),
            x1.bins()
        )));
    }
    let bins = x1.bins();
    let conj: Vec<[Complex64; 2]> = w.per_bin().iter().map(|v| [v[0].conj(), v[1].conj()]).collect();
    let data = x1
        .data()
        .iter()
        .zip(x2.data())
        .enumerate()
        .map(|(i, (a, b))| {
            let c = &conj[i % bins];
            c[0] * a + c[1] * b
        })
        .collect();
    Ok(x1.with_data(data))
}

/// Builds one candidate per grid angle with `theta_d = psi`. When `psi` is
/// itself on the grid, that candidate is `x1` unchanged.
pub fn generate_candidates(
    x1: &Spectrogram,
    x2: &Spectrogram,
    psi: f64,
    grid: &AngleGrid,
    geom: &ArrayGeometry,
) -> Result<CandidateSet> {
    check_angle(psi)?;
    if !x1.same_shape(x2) {
        return Err(Error::ShapeMismatch("channel spectrograms differ".into()));
    }
    let passthrough_index = grid.position(psi);
    let candidates = grid
        .angles()
        .par_iter()
        .enumerate()
        .map(|(p, &phi)| {
            if Some(p) == passthrough_index {
                return Ok(x1.clone());
            }
            let w = nsbf_weights(psi, phi, geom, x1.config(), x1.sample_rate())?;
            apply_beamformer(&w, x1, x2)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CandidateSet {
        candidates,
        psi,
        grid: grid.clone(),
        passthrough_index,
    })
}

/// A candidate brought back to the time domain.
#[derive(Debug, Clone)]
pub struct TimeCandidate {
    pub angle: f64,
    /// iSTFT output before normalisation.
    pub raw: Waveform,
    /// Peak-normalised copy handed to scorers.
    pub normalized: Waveform,
    pub silent: bool,
}

/// iSTFT followed by peak normalisation for every candidate.
pub fn candidates_to_time(cs: &CandidateSet) -> Result<Vec<TimeCandidate>> {
    cs.candidates
        .par_iter()
        .zip(cs.grid.angles().par_iter())
        .map(|(spec, &angle)| {
            let raw = istft(spec)?;
            let n = peak_normalize(&raw);
            Ok(TimeCandidate {
                angle,
                raw,
                normalized: n.waveform,
                silent: n.silent,
            })
        })
        .collect()
}

/// File name a candidate is dumped under, e.g. `cand_phi_012.wav`.
pub fn candidate_file_name(angle: f64) -> String {
    if angle.fract() == 0.0 {
        format!("cand_phi_{:03}.wav", angle as i64)
    } else {
        format!("cand_phi_{:05.1}.wav", angle)
    }
}

/// Writes every normalised candidate to `dir` as float32 WAV.
pub fn dump_candidates(dir: &Path, candidates: &[TimeCandidate]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    candidates
        .iter()
        .map(|c| {
            let path = dir.join(candidate_file_name(c.angle));
            write_wav(&path, &c.normalized, WavFormat::Float32)?;
            Ok(path)
        })
        .collect()
}
