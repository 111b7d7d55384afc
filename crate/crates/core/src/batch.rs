//! Batch evaluation: simulate each (speech, interference, θi, SIR) row, run
//! IANS and STOI-NS for every look direction plus the T-NSBF baseline, and
//! average STOI per condition.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::AngleGrid;
use crate::dsp::{read_wav, write_wav, StftConfig, WavFormat, Waveform};
use crate::engine::{candidate_bank, run_t_nsbf, select, IansResult};
use crate::error::{Error, Result};
use crate::room::{simulate_capture, RoomScenario};
use crate::scorer::{score_all, PluginConfig, ScoreVector, ScorerSpec, DEFAULT_PLUGIN_TIMEOUT};
use crate::stoi::stoi;

/// Scorer choice as written in batch files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScorerChoice {
    /// True STOI against each row's clean speech; IANS then equals STOI-NS.
    #[default]
    Oracle,
    Plugin {
        command: Vec<String>,
        #[serde(default = "default_timeout_s")]
        timeout_s: f64,
    },
}

fn default_timeout_s() -> f64 {
    DEFAULT_PLUGIN_TIMEOUT.as_secs_f64()
}

impl ScorerChoice {
    /// Concrete scorer for a row with clean speech `reference`.
    pub fn spec(&self, reference: &Waveform) -> Result<ScorerSpec> {
        Ok(match self {
            ScorerChoice::Oracle => ScorerSpec::Oracle {
                reference: reference.clone(),
            },
            ScorerChoice::Plugin { command, timeout_s } => {
                if !(*timeout_s > 0.0 && timeout_s.is_finite()) {
                    return Err(Error::InvalidConfig(format!("plugin timeout {timeout_s} s")));
                }
                ScorerSpec::Plugin(PluginConfig {
                    command: command.clone(),
                    timeout: Duration::from_secs_f64(*timeout_s),
                })
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub speech_wav: PathBuf,
    pub interference_wav: PathBuf,
    pub interference_angle: f64,
    pub sir_db: f64,
    /// Condition label; defaults to the interference file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<String>,
    /// Overrides the batch-wide look directions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<f64>>,
}

impl BatchRow {
    pub fn noise_label(&self) -> String {
        self.noise.clone().unwrap_or_else(|| {
            self.interference_wav
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }
}

/// Full cross product of files and conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMatrix {
    pub speech_wavs: Vec<PathBuf>,
    pub interference_wavs: Vec<PathBuf>,
    pub interference_angles: Vec<f64>,
    pub sir_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchSpec {
    /// Room and array; angle and SIR are set per row.
    pub scenario: RoomScenario,
    pub rows: Vec<BatchRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<BatchMatrix>,
    pub scorer: ScorerChoice,
    pub psi: Vec<f64>,
    /// Also report the dual run over the first two look directions.
    pub dual: bool,
    pub grid_step: f64,
    /// Where enhanced WAVs and reports go; nothing is written when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for BatchSpec {
    fn default() -> Self {
        Self {
            scenario: RoomScenario::default(),
            rows: Vec::new(),
            matrix: None,
            scorer: ScorerChoice::default(),
            psi: vec![0.0],
            dual: false,
            grid_step: 2.0,
            output_dir: None,
        }
    }
}

impl BatchSpec {
    /// Reads a batch file. Relative paths are taken from the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        let mut spec: BatchSpec = serde_json::from_str(&text).map_err(|e| Error::from(e).in_file(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        spec.resolve_paths(base);
        Ok(spec)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for row in &mut self.rows {
            fix(&mut row.speech_wav);
            fix(&mut row.interference_wav);
        }
        if let Some(m) = &mut self.matrix {
            m.speech_wavs.iter_mut().for_each(fix);
            m.interference_wavs.iter_mut().for_each(fix);
        }
        if let Some(dir) = &mut self.output_dir {
            fix(dir);
        }
    }

    /// Explicit rows followed by the matrix expansion
    /// (speech × interference × angle × SIR).
    pub fn expanded_rows(&self) -> Vec<BatchRow> {
        let mut rows = self.rows.clone();
        if let Some(m) = &self.matrix {
            for s in &m.speech_wavs {
                for i in &m.interference_wavs {
                    for &angle in &m.interference_angles {
                        for &sir in &m.sir_db {
                            rows.push(BatchRow {
                                speech_wav: s.clone(),
                                interference_wav: i.clone(),
                                interference_angle: angle,
                                sir_db: sir,
                                noise: None,
                                psi: None,
                            });
                        }
                    }
                }
            }
        }
        rows
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        AngleGrid::uniform(self.grid_step)?;
        if self.psi.is_empty() {
            return Err(Error::InvalidConfig("at least one look direction is needed".into()));
        }
        if self.dual && self.psi.len() < 2 {
            return Err(Error::InvalidConfig("dual runs need two look directions".into()));
        }
        Ok(())
    }
}

/// The selected candidate of one run, scored with true STOI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pick {
    pub phi: f64,
    pub stoi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiRun {
    pub psi: f64,
    pub ians: Pick,
    /// Best scorer output of the IANS run; used by the dual selection.
    pub ians_score: f64,
    pub stoi_ns: Pick,
}

/// STOI of every method on one scene.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneMetrics {
    pub noisy: f64,
    pub t_nsbf: f64,
    pub runs: Vec<PsiRun>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<Pick>,
}

impl SceneMetrics {
    /// `(column, STOI)` in report order.
    pub fn columns(&self) -> Vec<(String, f64)> {
        let mut out = vec![("noisy".to_string(), self.noisy)];
        for r in &self.runs {
            out.push((format!("ians_psi{}", fmt_angle(r.psi)), r.ians.stoi));
        }
        for r in &self.runs {
            out.push((format!("stoi_ns_psi{}", fmt_angle(r.psi)), r.stoi_ns.stoi));
        }
        if let Some(d) = self.dual {
            out.push(("ians_dual".to_string(), d.stoi));
        }
        out.push(("t_nsbf".to_string(), self.t_nsbf));
        out
    }

    /// `(column, selected null angle)` in report order.
    pub fn angle_columns(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for r in &self.runs {
            out.push((format!("phi_ians_psi{}", fmt_angle(r.psi)), r.ians.phi));
            out.push((format!("phi_stoi_ns_psi{}", fmt_angle(r.psi)), r.stoi_ns.phi));
        }
        if let Some(d) = self.dual {
            out.push(("phi_ians_dual".to_string(), d.phi));
        }
        out
    }
}

fn fmt_angle(a: f64) -> String {
    if a.fract() == 0.0 {
        format!("{}", a as i64)
    } else {
        format!("{a}")
    }
}

/// Enhanced signals of one scene, for writing.
#[derive(Debug, Clone)]
pub struct SceneOutputs {
    pub ians: Vec<(f64, Waveform)>,
    pub stoi_ns: Vec<(f64, Waveform)>,
    pub t_nsbf: Waveform,
}

/// Settings shared by every row.
#[derive(Debug, Clone)]
pub struct Evaluation<'a> {
    pub scenario: &'a RoomScenario,
    pub psi: &'a [f64],
    pub dual: bool,
    pub grid: &'a AngleGrid,
    pub scorer: &'a ScorerChoice,
    pub stft: StftConfig,
}

fn pick(result: &IansResult, beta: &ScoreVector) -> Pick {
    Pick {
        phi: result.phi_star,
        stoi: beta.scores[result.phi_index],
    }
}

/// Simulates one scene and scores every method against the dry speech.
///
/// The STOI of a selected candidate is read off the oracle score vector, so
/// STOI-NS is the exact grid maximum and IANS never exceeds it.
pub fn evaluate_scene(
    eval: &Evaluation<'_>,
    speech: &Waveform,
    interference: &Waveform,
    interference_angle: f64,
    sir_db: f64,
) -> Result<(SceneMetrics, SceneOutputs)> {
    let scenario = RoomScenario {
        interference_angle,
        sir_db,
        ..eval.scenario.clone()
    };
    let scene = simulate_capture(&scenario, speech, interference)?;
    let capture = &scene.capture;
    let oracle = ScorerSpec::Oracle {
        reference: speech.clone(),
    };
    let scorer = eval.scorer.spec(speech)?;

    let mut runs = Vec::new();
    let mut outputs = SceneOutputs {
        ians: Vec::new(),
        stoi_ns: Vec::new(),
        t_nsbf: run_t_nsbf(capture, scenario.speech_angle, interference_angle, &eval.stft)?,
    };
    for &psi in eval.psi {
        let candidates = candidate_bank(capture, psi, eval.grid, &eval.stft)?;
        let beta = score_all(&candidates, &oracle)?;
        let (ians, stoi_ns) = match &scorer {
            ScorerSpec::Oracle { .. } => {
                let r = select(candidates, beta.clone(), psi, eval.grid)?;
                (r.clone(), r)
            }
            ScorerSpec::Plugin(_) => {
                let alpha = score_all(&candidates, &scorer)?;
                let best = select(candidates.clone(), beta.clone(), psi, eval.grid)?;
                (select(candidates, alpha, psi, eval.grid)?, best)
            }
        };
        runs.push(PsiRun {
            psi,
            ians: pick(&ians, &beta),
            ians_score: ians.score_vector.max().unwrap_or(f64::NEG_INFINITY),
            stoi_ns: pick(&stoi_ns, &beta),
        });
        outputs.ians.push((psi, ians.output));
        outputs.stoi_ns.push((psi, stoi_ns.output));
    }

    let dual = (eval.dual && runs.len() >= 2).then(|| {
        // higher scorer maximum wins, the first look direction on ties
        if runs[1].ians_score > runs[0].ians_score {
            runs[1].ians
        } else {
            runs[0].ians
        }
    });
    let metrics = SceneMetrics {
        noisy: stoi(speech, &capture.ch1)?,
        t_nsbf: stoi(speech, &outputs.t_nsbf)?,
        runs,
        dual,
    };
    Ok((metrics, outputs))
}

#[derive(Debug, Clone, Serialize)]
pub struct RowReport {
    pub index: usize,
    pub speech_wav: PathBuf,
    pub interference_wav: PathBuf,
    pub noise: String,
    pub interference_angle: f64,
    pub sir_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<SceneMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub noise: String,
    pub interference_angle: f64,
    pub sir_db: f64,
    pub rows: usize,
    /// Mean STOI per method column.
    pub mean: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchReport {
    pub rows: Vec<RowReport>,
    pub summary: Vec<SummaryRow>,
    pub overall: BTreeMap<String, f64>,
    /// Method columns in report order.
    pub columns: Vec<String>,
    pub failed: usize,
}

impl BatchReport {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::from(e).in_file(path))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    /// One line per row: conditions, STOI per method, selected angles.
    pub fn write_rows_csv(&self, path: &Path) -> Result<()> {
        let angle_cols: Vec<String> = union(self.rows.iter().filter_map(|r| r.metrics.as_ref()).map(|m| m.angle_columns()));
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(e, path))?;
        let mut header: Vec<String> = ["row", "speech", "noise", "interference_angle", "sir_db"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(self.columns.iter().cloned());
        header.extend(angle_cols.iter().cloned());
        header.push("error".into());
        w.write_record(&header).map_err(|e| csv_error(e, path))?;
        for r in &self.rows {
            let mut rec = vec![
                r.index.to_string(),
                r.speech_wav.to_string_lossy().into_owned(),
                r.noise.clone(),
                r.interference_angle.to_string(),
                r.sir_db.to_string(),
            ];
            let (stoi_cols, phi_cols) = match &r.metrics {
                Some(m) => (m.columns(), m.angle_columns()),
                None => (Vec::new(), Vec::new()),
            };
            let lookup = |cols: &[(String, f64)], name: &str| {
                cols.iter()
                    .find(|(c, _)| c == name)
                    .map(|(_, v)| format!("{v:.6}"))
                    .unwrap_or_default()
            };
            rec.extend(self.columns.iter().map(|c| lookup(&stoi_cols, c)));
            rec.extend(angle_cols.iter().map(|c| lookup(&phi_cols, c)));
            rec.push(r.error.clone().unwrap_or_default());
            w.write_record(&rec).map_err(|e| csv_error(e, path))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Mean STOI per condition, then an `overall` line.
    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(e, path))?;
        let mut header: Vec<String> = ["noise", "interference_angle", "sir_db", "rows"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(|e| csv_error(e, path))?;
        let cells = |mean: &BTreeMap<String, f64>| -> Vec<String> {
            self.columns
                .iter()
                .map(|c| mean.get(c).map(|v| format!("{v:.6}")).unwrap_or_default())
                .collect()
        };
        for s in &self.summary {
            let mut rec = vec![
                s.noise.clone(),
                s.interference_angle.to_string(),
                s.sir_db.to_string(),
                s.rows.to_string(),
            ];
            rec.extend(cells(&s.mean));
            w.write_record(&rec).map_err(|e| csv_error(e, path))?;
        }
        let done = self.rows.len() - self.failed;
        let mut rec = vec!["overall".to_string(), String::new(), String::new(), done.to_string()];
        rec.extend(cells(&self.overall));
        w.write_record(&rec).map_err(|e| csv_error(e, path))?;
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error, path: &Path) -> Error {
    let e = match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidConfig(format!("{other:?}")),
    };
    e.in_file(path)
}

/// Column names in first-seen order.
fn union(lists: impl Iterator<Item = Vec<(String, f64)>>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for list in lists {
        for (c, _) in list {
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out
}

fn mean_columns<'a>(metrics: impl Iterator<Item = &'a SceneMetrics>) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for m in metrics {
        for (c, v) in m.columns() {
            let e = sums.entry(c).or_default();
            e.0 += v;
            e.1 += 1;
        }
    }
    sums.into_iter().map(|(c, (s, n))| (c, s / n as f64)).collect()
}

/// Aggregates per-row results into condition means and an overall mean.
pub fn summarize(rows: Vec<RowReport>) -> BatchReport {
    let columns = union(rows.iter().filter_map(|r| r.metrics.as_ref()).map(|m| m.columns()));
    let mut groups: Vec<((String, f64, f64), Vec<&SceneMetrics>)> = Vec::new();
    for r in &rows {
        let Some(m) = &r.metrics else { continue };
        let key = (r.noise.clone(), r.interference_angle, r.sir_db);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(m),
            None => groups.push((key, vec![m])),
        }
    }
    let summary = groups
        .into_iter()
        .map(|((noise, interference_angle, sir_db), ms)| SummaryRow {
            noise,
            interference_angle,
            sir_db,
            rows: ms.len(),
            mean: mean_columns(ms.into_iter()),
        })
        .collect();
    let overall = mean_columns(rows.iter().filter_map(|r| r.metrics.as_ref()));
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    BatchReport {
        rows,
        summary,
        overall,
        columns,
        failed,
    }
}

fn run_row(index: usize, row: &BatchRow, spec: &BatchSpec, grid: &AngleGrid) -> Result<SceneMetrics> {
    let speech = read_wav(&row.speech_wav)?;
    let interference = read_wav(&row.interference_wav)?;
    if speech.sample_rate() != spec.scenario.sample_rate {
        return Err(Error::SampleRateMismatch {
            left: spec.scenario.sample_rate,
            right: speech.sample_rate(),
        }
        .in_file(&row.speech_wav));
    }
    let psi = row.psi.as_deref().unwrap_or(&spec.psi);
    let eval = Evaluation {
        scenario: &spec.scenario,
        psi,
        dual: spec.dual,
        grid,
        scorer: &spec.scorer,
        stft: StftConfig::default(),
    };
    let (metrics, outputs) = evaluate_scene(&eval, &speech, &interference, row.interference_angle, row.sir_db)?;
    if let Some(dir) = &spec.output_dir {
        let write = |name: String, w: &Waveform| {
            let p = dir.join(name);
            write_wav(&p, w, WavFormat::Float32).map_err(|e| e.in_file(p))
        };
        for (psi, w) in &outputs.ians {
            write(format!("row_{index:03}_ians_psi{}.wav", fmt_angle(*psi)), w)?;
        }
        for (psi, w) in &outputs.stoi_ns {
            write(format!("row_{index:03}_stoi_ns_psi{}.wav", fmt_angle(*psi)), w)?;
        }
        write(format!("row_{index:03}_t_nsbf.wav"), &outputs.t_nsbf)?;
    }
    Ok(metrics)
}

/// Runs every row in parallel. Row failures are recorded, not raised; only
/// an invalid spec or an unwritable output directory fails the call.
pub fn run_batch(spec: &BatchSpec) -> Result<BatchReport> {
    spec.validate()?;
    let grid = AngleGrid::uniform(spec.grid_step)?;
    if let Some(dir) = &spec.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    }
    let rows: Vec<RowReport> = spec
        .expanded_rows()
        .into_par_iter()
        .enumerate()
        .map(|(index, row)| {
            let result = run_row(index, &row, spec, &grid);
            RowReport {
                index,
                noise: row.noise_label(),
                interference_angle: row.interference_angle,
                sir_db: row.sir_db,
                metrics: result.as_ref().ok().cloned(),
                error: result.err().map(|e| e.to_string()),
                speech_wav: row.speech_wav,
                interference_wav: row.interference_wav,
            }
        })
        .collect();
    let report = summarize(rows);
    if let Some(dir) = &spec.output_dir {
        report.write_json(&dir.join("report.json"))?;
        report.write_rows_csv(&dir.join("rows.csv"))?;
        report.write_summary_csv(&dir.join("summary.csv"))?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn matrix_expands_in_nested_order() {
        let spec: BatchSpec = serde_json::from_str(
            r#"{
                "rows": [{"speech_wav": "a.wav", "interference_wav": "n.wav", "interference_angle": 45, "sir_db": 3, "noise": "car"}],
                "matrix": {"speech_wavs": ["s1.wav", "s2.wav"], "interference_wavs": ["babble.wav"],
                           "interference_angles": [22.5, 157.5], "sir_db": [-5, 5]},
                "psi": [0, 80]
            }"#,
        )
        .unwrap();
        let rows = spec.expanded_rows();
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[0].noise_label(), "car");
        assert_eq!(rows[1].speech_wav, PathBuf::from("s1.wav"));
        assert_eq!((rows[1].interference_angle, rows[1].sir_db), (22.5, -5.0));
        assert_eq!((rows[2].interference_angle, rows[2].sir_db), (22.5, 5.0));
        assert_eq!(rows[3].interference_angle, 157.5);
        assert_eq!(rows[5].speech_wav, PathBuf::from("s2.wav"));
        assert_eq!(rows[8].noise_label(), "babble");
        assert_eq!(spec.grid_step, 2.0);
        assert_eq!(spec.scorer, ScorerChoice::Oracle);
    }

    #[test]
    fn scorer_choice_json() {
        let c: ScorerChoice = serde_json::from_str(r#"{"kind": "plugin", "command": ["python3", "serve.py"]}"#).unwrap();
        assert_eq!(
            c,
            ScorerChoice::Plugin {
                command: vec!["python3".into(), "serve.py".into()],
                timeout_s: 30.0
            }
        );
    }

    #[test]
    fn relative_paths_follow_the_batch_file() {
        let mut spec = BatchSpec {
            rows: vec![BatchRow {
                speech_wav: "s.wav".into(),
                interference_wav: "/abs/n.wav".into(),
                interference_angle: 22.5,
                sir_db: 0.0,
                noise: None,
                psi: None,
            }],
            output_dir: Some("out".into()),
            ..BatchSpec::default()
        };
        spec.resolve_paths(Path::new("/data/batch"));
        assert_eq!(spec.rows[0].speech_wav, PathBuf::from("/data/batch/s.wav"));
        assert_eq!(spec.rows[0].interference_wav, PathBuf::from("/abs/n.wav"));
        assert_eq!(spec.output_dir, Some(PathBuf::from("/data/batch/out")));
    }

    #[test]
    fn scene_metrics_respect_the_upper_bound() {
        let fs = 16_000;
        let speech = synth::utterance(41, 2.0, fs);
        let noise = synth::babble(42, speech.len(), fs, 4);
        let scenario = RoomScenario {
            max_image_order: 6,
            ..RoomScenario::default()
        };
        let grid = AngleGrid::uniform(10.0).unwrap();
        let eval = Evaluation {
            scenario: &scenario,
            psi: &[0.0, 80.0],
            dual: true,
            grid: &grid,
            scorer: &ScorerChoice::Oracle,
            stft: StftConfig::default(),
        };
        let (m, out) = evaluate_scene(&eval, &speech, &noise, 22.5, 0.0).unwrap();
        assert_eq!(m.runs.len(), 2);
        for r in &m.runs {
            // the oracle scorer solves STOI-NS
            assert_eq!(r.ians, r.stoi_ns);
        }
        let dual = m.dual.unwrap();
        assert!(m.runs.iter().all(|r| dual.stoi >= r.ians.stoi));
        let cols: Vec<String> = m.columns().into_iter().map(|c| c.0).collect();
        assert_eq!(
            cols,
            ["noisy", "ians_psi0", "ians_psi80", "stoi_ns_psi0", "stoi_ns_psi80", "ians_dual", "t_nsbf"]
        );
        // reported STOI is the metric of the written output
        let direct = stoi(&speech, &out.stoi_ns[0].1).unwrap();
        assert!((direct - m.runs[0].stoi_ns.stoi).abs() < 1e-9);
    }

    #[test]
    fn summary_groups_by_condition() {
        let metrics = |v: f64| SceneMetrics {
            noisy: v,
            t_nsbf: v + 0.1,
            runs: vec![],
            dual: None,
        };
        let row = |index, noise: &str, angle, m: Option<SceneMetrics>| RowReport {
            index,
            speech_wav: "s.wav".into(),
            interference_wav: "n.wav".into(),
            noise: noise.into(),
            interference_angle: angle,
            sir_db: 0.0,
            error: m.is_none().then(|| "boom".to_string()),
            metrics: m,
        };
        let report = summarize(vec![
            row(0, "pink", 22.5, Some(metrics(0.5))),
            row(1, "pink", 22.5, Some(metrics(0.7))),
            row(2, "pink", 157.5, Some(metrics(0.2))),
            row(3, "babble", 22.5, None),
        ]);
        assert_eq!(report.failed, 1);
        assert!(!report.ok());
        assert_eq!(report.summary.len(), 2);
        assert_eq!(report.summary[0].rows, 2);
        assert!((report.summary[0].mean["noisy"] - 0.6).abs() < 1e-12);
        assert!((report.overall["t_nsbf"] - (0.6 + 0.8 + 0.3) / 3.0).abs() < 1e-12);
        assert_eq!(report.columns, ["noisy", "t_nsbf"]);
    }
}
