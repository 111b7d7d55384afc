//! The IANS pipeline: candidate bank, scoring, argmax selection. Also the
//! dual-ψ variant and the T-NSBF baseline with known directions.

use std::path::Path;

use serde_json::{json, Value};

use crate::array::{nsbf_weights, ArrayGeometry};
use crate::candidates::{apply_beamformer, candidates_to_time, generate_candidates, AngleGrid, TimeCandidate};
use crate::dsp::{istft, stft, Spectrogram, StftConfig, Waveform};
use crate::error::{Error, Result};
use crate::room::StereoCapture;
use crate::scorer::{score_all, ScoreVector, ScorerKind, ScorerSpec};

#[derive(Debug, Clone)]
pub struct IansResult {
    pub phi_star: f64,
    pub phi_index: usize,
    pub score_vector: ScoreVector,
    /// Winning candidate before peak normalisation.
    pub output: Waveform,
    pub psi: f64,
    pub grid: AngleGrid,
}

impl IansResult {
    pub fn scorer_kind(&self) -> ScorerKind {
        self.score_vector.kind
    }

    /// Report object; silent candidates show a `null` score.
    pub fn to_json(&self, output_wav_path: Option<&Path>) -> Value {
        let scores: Vec<Value> = self
            .grid
            .angles()
            .iter()
            .zip(&self.score_vector.scores)
            .map(|(&angle, &score)| json!({ "angle": angle, "score": score.is_finite().then_some(score) }))
            .collect();
        json!({
            "phi_star": self.phi_star,
            "phi_index": self.phi_index,
            "psi": self.psi,
            "scores": scores,
            "scorer": self.scorer_kind().to_string(),
            "output_wav_path": output_wav_path.map(|p| p.to_string_lossy().into_owned()),
        })
    }
}

/// Stage 1: every candidate of the grid, in the time domain.
pub fn candidate_bank(
    capture: &StereoCapture,
    psi: f64,
    grid: &AngleGrid,
    cfg: &StftConfig,
) -> Result<Vec<TimeCandidate>> {
    let x1 = stft(&capture.ch1, cfg)?;
    let x2 = stft(&capture.ch2, cfg)?;
    let set = generate_candidates(&x1, &x2, psi, grid, &capture.geometry)?;
    candidates_to_time(&set)
}

/// Picks the best-scoring candidate, earliest on ties.
pub fn select(
    mut candidates: Vec<TimeCandidate>,
    score_vector: ScoreVector,
    psi: f64,
    grid: &AngleGrid,
) -> Result<IansResult> {
    if candidates.len() != grid.len() || score_vector.len() != grid.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} candidates and {} scores for a {}-point grid",
            candidates.len(),
            score_vector.len(),
            grid.len()
        )));
    }
    let phi_index = score_vector.argmax().ok_or(Error::AllCandidatesSilent)?;
    Ok(IansResult {
        phi_star: grid.angles()[phi_index],
        phi_index,
        score_vector,
        output: candidates.swap_remove(phi_index).raw,
        psi,
        grid: grid.clone(),
    })
}

/// One IANS run with look direction ψ. With the oracle scorer this solves
/// STOI-NS.
pub fn run_ians(
    capture: &StereoCapture,
    psi: f64,
    grid: &AngleGrid,
    spec: &ScorerSpec,
    cfg: &StftConfig,
) -> Result<IansResult> {
    let candidates = candidate_bank(capture, psi, grid, cfg)?;
    let scores = score_all(&candidates, spec)?;
    select(candidates, scores, psi, grid)
}

/// Runs IANS for two look directions and keeps the run whose own best score
/// is higher; `psi1` wins ties.
pub fn run_ians_dual(
    capture: &StereoCapture,
    psi1: f64,
    psi2: f64,
    grid: &AngleGrid,
    spec: &ScorerSpec,
    cfg: &StftConfig,
) -> Result<IansResult> {
    if psi1 == psi2 {
        return Err(Error::InvalidConfig(format!("dual run needs two different look directions, got {psi1} twice")));
    }
    let first = run_ians(capture, psi1, grid, spec, cfg)?;
    let second = run_ians(capture, psi2, grid, spec, cfg)?;
    Ok(pick_better(first, second))
}

fn pick_better(first: IansResult, second: IansResult) -> IansResult {
    let best = |r: &IansResult| r.score_vector.max().unwrap_or(f64::NEG_INFINITY);
    if best(&second) > best(&first) {
        second
    } else {
        first
    }
}

/// Null-steering beamformer with the true directions: look at `theta_s`, null
/// at `theta_i`.
pub fn run_t_nsbf(capture: &StereoCapture, theta_s: f64, theta_i: f64, cfg: &StftConfig) -> Result<Waveform> {
    let x1 = stft(&capture.ch1, cfg)?;
    let x2 = stft(&capture.ch2, cfg)?;
    istft(&t_nsbf_spectrogram(&x1, &x2, theta_s, theta_i, &capture.geometry)?)
}

/// [`run_t_nsbf`] on spectrograms.
pub fn t_nsbf_spectrogram(
    x1: &Spectrogram,
    x2: &Spectrogram,
    theta_s: f64,
    theta_i: f64,
    geom: &ArrayGeometry,
) -> Result<Spectrogram> {
    let w = nsbf_weights(theta_s, theta_i, geom, x1.config(), x1.sample_rate())?;
    apply_beamformer(&w, x1, x2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::room::{far_field_capture, far_field_second_channel};
    use crate::synth;

    const FS: u32 = 16_000;

    fn far_field(speech: &Waveform, noise: &Waveform) -> StereoCapture {
        far_field_capture(speech, noise, 90.0, 22.5, 0.0, &ArrayGeometry::default(), &StftConfig::default())
            .unwrap()
            .capture
    }

    fn scene() -> (Waveform, StereoCapture, Waveform) {
        let speech = synth::utterance(21, 1.5, FS);
        let noise = synth::white_noise(22, speech.len(), FS);
        let cap = far_field(&speech, &noise);
        (speech, cap, noise)
    }

    #[test]
    fn oracle_run_selects_the_argmax_of_beta() {
        let (speech, cap, _) = scene();
        let grid = AngleGrid::uniform(10.0).unwrap();
        let spec = ScorerSpec::Oracle { reference: speech };
        let r = run_ians(&cap, 0.0, &grid, &spec, &StftConfig::default()).unwrap();
        assert_eq!(r.score_vector.len(), grid.len());
        assert_eq!(Some(r.phi_index), r.score_vector.argmax());
        assert_eq!(r.phi_star, grid.angles()[r.phi_index]);
        assert_eq!(r.output.len(), cap.len());
        let json = r.to_json(None);
        assert_eq!(json["scores"].as_array().unwrap().len(), grid.len());
        assert_eq!(json["scorer"], "oracle");
        assert!(json["output_wav_path"].is_null());
    }

    #[test]
    fn passthrough_winner_is_the_reference_channel() {
        let (_, cap, _) = scene();
        let grid = AngleGrid::uniform(45.0).unwrap();
        // score = position in the grid reversed, so angle 0 (= psi) wins
        let cands = candidate_bank(&cap, 0.0, &grid, &StftConfig::default()).unwrap();
        let n = cands.len();
        let v = ScoreVector {
            scores: (0..n).map(|i| (n - i) as f64).collect(),
            kind: ScorerKind::Plugin,
        };
        let r = select(cands, v, 0.0, &grid).unwrap();
        assert_eq!(r.phi_index, 0);
        let err = r
            .output
            .samples()
            .iter()
            .zip(cap.ch1.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn all_silent_is_an_error() {
        let (_, cap, _) = scene();
        let grid = AngleGrid::uniform(90.0).unwrap();
        let cands = candidate_bank(&cap, 1.0, &grid, &StftConfig::default()).unwrap();
        let v = ScoreVector {
            scores: vec![f64::NEG_INFINITY; grid.len()],
            kind: ScorerKind::Oracle,
        };
        assert!(matches!(select(cands, v, 1.0, &grid), Err(Error::AllCandidatesSilent)));
    }

    #[test]
    fn dual_run_keeps_the_higher_maximum_and_prefers_psi1_on_ties() {
        let r = |psi: f64, best: f64| IansResult {
            phi_star: 0.0,
            phi_index: 0,
            score_vector: ScoreVector {
                scores: vec![best, 0.1],
                kind: ScorerKind::Plugin,
            },
            output: Waveform::zeros(4, FS).unwrap(),
            psi,
            grid: AngleGrid::new(vec![0.0, 90.0]).unwrap(),
        };
        assert_eq!(pick_better(r(0.0, 0.5), r(80.0, 0.6)).psi, 80.0);
        assert_eq!(pick_better(r(0.0, 0.6), r(80.0, 0.5)).psi, 0.0);
        assert_eq!(pick_better(r(0.0, 0.5), r(80.0, 0.5)).psi, 0.0);
    }

    #[test]
    fn dual_run_is_at_least_as_good_as_each_single_run() {
        let (speech, cap, _) = scene();
        let grid = AngleGrid::uniform(15.0).unwrap();
        let spec = ScorerSpec::Oracle { reference: speech };
        let cfg = StftConfig::default();
        let dual = run_ians_dual(&cap, 0.0, 22.5, &grid, &spec, &cfg).unwrap();
        for psi in [0.0, 22.5] {
            let single = run_ians(&cap, psi, &grid, &spec, &cfg).unwrap();
            assert!(dual.score_vector.max() >= single.score_vector.max());
        }
        assert!(run_ians_dual(&cap, 10.0, 10.0, &grid, &spec, &cfg).is_err());
    }

    #[test]
    fn t_nsbf_cancels_a_plane_wave_interferer() {
        let geom = ArrayGeometry::default();
        let cfg = StftConfig::default();
        let noise = synth::white_noise(22, 24_000, FS);
        let x1 = stft(&noise, &cfg).unwrap();
        let x2 = far_field_second_channel(&x1, 22.5, &geom).unwrap();
        let y = istft(&t_nsbf_spectrogram(&x1, &x2, 90.0, 22.5, &geom).unwrap()).unwrap();
        let ratio = y.energy() / noise.energy();
        assert!(ratio <= 1e-9, "{ratio}");

        let speech = synth::utterance(21, 1.5, FS);
        let x1 = stft(&speech, &cfg).unwrap();
        let x2 = far_field_second_channel(&x1, 90.0, &geom).unwrap();
        let y = istft(&t_nsbf_spectrogram(&x1, &x2, 90.0, 22.5, &geom).unwrap()).unwrap();
        // unity gain everywhere except DC, where the weights vanish
        let bins = x1.bins();
        let no_dc: Vec<_> = x1
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| if i % bins == 0 { num_complex::Complex64::new(0.0, 0.0) } else { *v })
            .collect();
        let expect = istft(&Spectrogram::new(no_dc, x1.frames(), cfg, FS, x1.signal_len()).unwrap()).unwrap();
        let err: f64 = y.samples().iter().zip(expect.samples()).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(err / expect.energy() < 1e-9, "{}", err / expect.energy());
    }

    #[test]
    fn t_nsbf_improves_a_reverberant_scene() {
        use crate::room::{simulate_capture, RoomScenario};
        let speech = synth::utterance(31, 3.0, FS);
        let noise = synth::white_noise(32, speech.len(), FS);
        let sc = RoomScenario::default();
        let scene = simulate_capture(&sc, &speech, &noise).unwrap();
        let out = run_t_nsbf(&scene.capture, 90.0, 22.5, &StftConfig::default()).unwrap();
        let noisy = crate::stoi::stoi(&speech, &scene.capture.ch1).unwrap();
        let enhanced = crate::stoi::stoi(&speech, &out).unwrap();
        assert!(enhanced > noisy, "{enhanced} vs {noisy}");
    }
}
