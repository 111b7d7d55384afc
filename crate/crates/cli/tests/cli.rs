use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ians::dsp::{read_wav, write_wav, WavFormat};
use ians::room::{image_source_rir, place_source, RoomScenario};
use ians::synth;
use tempfile::TempDir;

fn ians(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ians"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn ians")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// One-second utterance and babble plus a mild reverberant scenario.
fn fixtures(dir: &Path) {
    write_wav(dir.join("s.wav"), &synth::utterance(3, 1.0, 16000), WavFormat::Float32).unwrap();
    write_wav(dir.join("s2.wav"), &synth::utterance(4, 1.0, 16000), WavFormat::Float32).unwrap();
    write_wav(dir.join("n.wav"), &synth::babble(5, 16000, 16000, 4), WavFormat::Float32).unwrap();
    std::fs::write(
        dir.join("scene.json"),
        r#"{"rt60": 0.15, "sir_db": 3.0, "interference_angle": 30, "max_image_order": 6}"#,
    )
    .unwrap();
}

fn simulated(dir: &Path) -> PathBuf {
    fixtures(dir);
    ok(&ians(&["simulate", "scene.json", "s.wav", "n.wav", "-o", "cap", "--images"], dir));
    dir.join("cap")
}

#[test]
fn simulate_hits_the_requested_sir() {
    let tmp = TempDir::new().unwrap();
    let cap = simulated(tmp.path());
    let s = read_wav(cap.join("speech_mic1.wav")).unwrap();
    let i = read_wav(cap.join("interference_mic1.wav")).unwrap();
    let sir = 10.0 * (s.energy() / i.energy()).log10();
    assert!((sir - 3.0).abs() < 0.01, "{sir}");

    let ch1 = read_wav(cap.join("ch1.wav")).unwrap();
    let sum_err = ch1
        .samples()
        .iter()
        .zip(s.samples().iter().zip(i.samples()))
        .map(|(c, (a, b))| (c - a - b).abs())
        .fold(0.0, f64::max);
    assert!(sum_err < 1e-6, "{sum_err}");
}

#[test]
fn simulate_output_length_is_speech_plus_longest_rir() {
    let tmp = TempDir::new().unwrap();
    let cap = simulated(tmp.path());
    let scenario: RoomScenario =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("scene.json")).unwrap()).unwrap();
    let mics = scenario.mic_positions();
    let longest = [scenario.speech_angle, scenario.interference_angle]
        .iter()
        .flat_map(|&a| {
            let src = place_source(&scenario, a).unwrap();
            mics.map(|m| {
                image_source_rir(
                    scenario.room_dims,
                    src,
                    m,
                    scenario.rt60,
                    scenario.absorption,
                    scenario.max_image_order,
                    scenario.sample_rate,
                    scenario.geometry.sound_speed,
                )
                .unwrap()
                .taps
                .len()
            })
        })
        .max()
        .unwrap();
    let ch1 = read_wav(cap.join("ch1.wav")).unwrap();
    let ch2 = read_wav(cap.join("ch2.wav")).unwrap();
    assert_eq!(ch1.len(), 16000 + longest - 1);
    assert_eq!(ch2.len(), ch1.len());
}

#[test]
fn simulate_rejects_negative_rt60() {
    let tmp = TempDir::new().unwrap();
    fixtures(tmp.path());
    std::fs::write(tmp.path().join("bad.json"), r#"{"rt60": -0.2}"#).unwrap();
    let out = ians(&["simulate", "bad.json", "s.wav", "n.wav", "-o", "cap"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("rt60"));
    assert!(!tmp.path().join("cap/ch1.wav").exists());
}

#[test]
fn run_oracle_writes_json_and_audio() {
    let tmp = TempDir::new().unwrap();
    let cap = simulated(tmp.path());
    let out = ians(
        &[
            "run",
            "cap/ch1.wav",
            "cap/ch2.wav",
            "--scorer",
            "oracle",
            "--ref",
            "s.wav",
            "--grid-step",
            "10",
            "-o",
            "result.json",
            "--output-wav",
            "enh.wav",
            "--dump-weights",
            "w.csv",
            "--dump-candidates",
            "cands",
        ],
        tmp.path(),
    );
    ok(&out);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(v["scorer"], "oracle");
    assert_eq!(v["psi"], 0.0);
    let scores = v["scores"].as_array().unwrap();
    assert_eq!(scores.len(), 19);
    let best = scores.iter().filter_map(|s| s["score"].as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let idx = v["phi_index"].as_u64().unwrap() as usize;
    assert_eq!(scores[idx]["score"].as_f64().unwrap(), best);
    assert_eq!(scores[idx]["angle"], v["phi_star"]);

    let enh = read_wav(tmp.path().join("enh.wav")).unwrap();
    assert_eq!(enh.len(), read_wav(cap.join("ch1.wav")).unwrap().len());
    let weights = std::fs::read_to_string(tmp.path().join("w.csv")).unwrap();
    assert_eq!(weights.lines().count(), 1 + 257);
    assert_eq!(std::fs::read_dir(tmp.path().join("cands")).unwrap().count(), 19);
}

#[test]
fn run_dual_reports_one_of_the_two_looks() {
    let tmp = TempDir::new().unwrap();
    simulated(tmp.path());
    let out = ians(
        &[
            "run", "cap/ch1.wav", "cap/ch2.wav", "--scorer", "oracle", "--ref", "s.wav", "--psi", "0", "--psi", "80",
            "--grid-step", "20",
        ],
        tmp.path(),
    );
    ok(&out);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let psi = v["psi"].as_f64().unwrap();
    assert!(psi == 0.0 || psi == 80.0, "{psi}");
}

#[test]
fn run_oracle_without_reference_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    simulated(tmp.path());
    let out = ians(&["run", "cap/ch1.wav", "cap/ch2.wav", "--scorer", "oracle"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--ref"));
}

#[test]
fn run_rejects_three_looks() {
    let tmp = TempDir::new().unwrap();
    simulated(tmp.path());
    let out = ians(
        &[
            "run", "cap/ch1.wav", "cap/ch2.wav", "--scorer", "oracle", "--ref", "s.wav", "--psi", "0", "--psi", "40",
            "--psi", "80",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_lists_every_grid_angle() {
    let tmp = TempDir::new().unwrap();
    simulated(tmp.path());
    let out = ians(&["sweep", "cap/ch1.wav", "cap/ch2.wav", "s.wav", "-o", "sweep.csv"], tmp.path());
    ok(&out);
    let text = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("angle,alpha,beta"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 91);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0].parse::<f64>().unwrap(), 2.0 * i as f64);
        assert_eq!(r[1], "");
        let beta: f64 = r[2].parse().unwrap();
        assert!((-1.0..=1.0).contains(&beta));
    }
}

#[test]
fn score_matches_the_library() {
    let tmp = TempDir::new().unwrap();
    let cap = simulated(tmp.path());
    let out = ians(&["score", "s.wav", "cap/ch1.wav"], tmp.path());
    ok(&out);
    let printed: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    let s = read_wav(tmp.path().join("s.wav")).unwrap();
    let expected = ians::stoi::stoi(&s, &read_wav(cap.join("ch1.wav")).unwrap()).unwrap();
    assert!((printed - expected).abs() <= 5e-5, "{printed} vs {expected}");
}

#[test]
fn synth_is_seeded() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    for (seed, name) in [("7", "a.wav"), ("7", "b.wav"), ("8", "c.wav")] {
        ok(&ians(&["--seed", seed, "synth", "pink", "--duration", "0.5", "-o", name], dir));
    }
    let a = read_wav(dir.join("a.wav")).unwrap();
    assert_eq!(a.len(), 8000);
    assert_eq!(a.samples(), read_wav(dir.join("b.wav")).unwrap().samples());
    assert_ne!(a.samples(), read_wav(dir.join("c.wav")).unwrap().samples());
}

#[test]
fn batch_writes_rows_and_summary() {
    let tmp = TempDir::new().unwrap();
    fixtures(tmp.path());
    std::fs::write(
        tmp.path().join("batch.json"),
        r#"{
            "scenario": {"rt60": 0.15, "max_image_order": 4},
            "matrix": {"speech_wavs": ["s.wav", "s2.wav"], "interference_wavs": ["n.wav"],
                       "interference_angles": [30, 150], "sir_db": [0, 5]},
            "grid_step": 30,
            "output_dir": "out"
        }"#,
    )
    .unwrap();
    let out = ians(&["batch", "batch.json"], tmp.path());
    ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("overall")), "{stdout}");

    let dir = tmp.path().join("out");
    let rows = std::fs::read_to_string(dir.join("rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 8);
    let summary = std::fs::read_to_string(dir.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 1 + 4 + 1);
    assert!(lines[0].starts_with("noise,interference_angle,sir_db,rows,noisy"));
    assert!(lines[5].starts_with("overall,,,8,"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["failed"], 0);
    assert!(dir.join("row_000_t_nsbf.wav").exists());
}

#[test]
fn batch_with_a_missing_file_fails() {
    let tmp = TempDir::new().unwrap();
    fixtures(tmp.path());
    std::fs::write(
        tmp.path().join("batch.json"),
        r#"{
            "scenario": {"rt60": 0.0},
            "rows": [
                {"speech_wav": "s.wav", "interference_wav": "n.wav", "interference_angle": 30, "sir_db": 0},
                {"speech_wav": "missing.wav", "interference_wav": "n.wav", "interference_angle": 30, "sir_db": 0}
            ],
            "grid_step": 45
        }"#,
    )
    .unwrap();
    let out = ians(&["batch", "batch.json"], tmp.path());
    assert!(!out.status.success());
}
