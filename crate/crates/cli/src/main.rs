use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum, ValueHint};

use ians::array::{nsbf_weights, ArrayGeometry};
use ians::batch::{run_batch, BatchSpec};
use ians::candidates::{dump_candidates, AngleGrid};
use ians::dsp::{read_wav, write_wav, StftConfig, WavFormat, Waveform};
use ians::engine::{candidate_bank, run_ians, run_ians_dual, run_t_nsbf, IansResult};
use ians::room::{simulate_capture, RoomScenario, StereoCapture};
use ians::scorer::{score_all, PluginConfig, ScorerSpec};
use ians::stoi::stoi;
use ians::synth;

/// Intelligibility-aware null-steering for two-microphone recordings.
#[derive(Parser)]
#[command(author, version, about, long_about = None)]
struct Cli {
    /// Seed for every random draw (synthetic signals, sensor noise)
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a two-microphone capture of a shoebox room scene
    Simulate(SimulateArgs),
    /// Pick the best null angle for a capture and write the enhanced signal
    Run(RunArgs),
    /// Score every null angle of the grid (angle, alpha, beta CSV)
    Sweep(SweepArgs),
    /// Evaluate a batch file and write per-row and summary reports
    Batch(BatchArgs),
    /// Print the STOI of a degraded signal against a clean one
    Score(ScoreArgs),
    /// Beamform with known speech and interference directions
    Tnsbf(TnsbfArgs),
    /// Write a synthetic test signal
    Synth(SynthArgs),
}

#[derive(Args)]
struct ArrayArgs {
    /// Microphone spacing in metres
    #[arg(long, default_value_t = 0.008)]
    spacing: f64,
    /// Speed of sound in m/s
    #[arg(long, default_value_t = 343.0)]
    sound_speed: f64,
}

impl ArrayArgs {
    fn geometry(&self) -> ArrayGeometry {
        ArrayGeometry {
            spacing: self.spacing,
            sound_speed: self.sound_speed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Float32,
    Pcm16,
}

impl From<Format> for WavFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Float32 => WavFormat::Float32,
            Format::Pcm16 => WavFormat::Pcm16,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON (missing keys take their defaults)
    #[arg(value_hint = ValueHint::FilePath)]
    scenario: PathBuf,
    #[arg(value_hint = ValueHint::FilePath)]
    speech: PathBuf,
    #[arg(value_hint = ValueHint::FilePath)]
    interference: PathBuf,
    /// Directory for ch1.wav and ch2.wav
    #[arg(short, long, default_value = ".", value_hint = ValueHint::DirPath)]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Float32)]
    format: Format,
    /// Also write the speech and interference images at both microphones
    #[arg(long)]
    images: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScorerArg {
    /// True STOI against --ref (STOI-NS)
    Oracle,
    /// External scorer speaking ians-scorer-v1 (IANS)
    Plugin,
}

#[derive(Args)]
struct PluginArgs {
    /// Scorer command line, split like a shell would
    #[arg(long)]
    plugin_cmd: Option<String>,
    /// Seconds to wait for each plugin reply
    #[arg(long, default_value_t = 30.0)]
    plugin_timeout: f64,
}

impl PluginArgs {
    fn config(&self) -> Result<Option<PluginConfig>> {
        let Some(cmd) = &self.plugin_cmd else { return Ok(None) };
        let command = shlex::split(cmd).with_context(|| format!("cannot parse plugin command {cmd:?}"))?;
        if command.is_empty() {
            bail!("empty plugin command");
        }
        if !(self.plugin_timeout > 0.0 && self.plugin_timeout.is_finite()) {
            bail!("plugin timeout must be positive");
        }
        Ok(Some(PluginConfig {
            command,
            timeout: Duration::from_secs_f64(self.plugin_timeout),
        }))
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(value_hint = ValueHint::FilePath)]
    ch1: PathBuf,
    #[arg(value_hint = ValueHint::FilePath)]
    ch2: PathBuf,
    #[arg(long, value_enum)]
    scorer: ScorerArg,
    /// Clean reference speech for the oracle scorer
    #[arg(long = "ref", required_if_eq("scorer", "oracle"), value_hint = ValueHint::FilePath)]
    reference: Option<PathBuf>,
    #[command(flatten)]
    plugin: PluginArgs,
    /// Look direction in degrees; give it twice for a dual run
    #[arg(long, default_values_t = [0.0], allow_negative_numbers = true)]
    psi: Vec<f64>,
    /// Null-angle grid step in degrees
    #[arg(long, default_value_t = 2.0)]
    grid_step: f64,
    #[command(flatten)]
    array: ArrayArgs,
    /// Result JSON; printed to stdout when omitted
    #[arg(short, long, value_hint = ValueHint::FilePath)]
    output: Option<PathBuf>,
    /// Enhanced signal
    #[arg(long, default_value = "enhanced.wav", value_hint = ValueHint::FilePath)]
    output_wav: PathBuf,
    /// Write every normalised candidate of the winning run here
    #[arg(long, value_hint = ValueHint::DirPath)]
    dump_candidates: Option<PathBuf>,
    /// Write the winning beamformer weights as CSV
    #[arg(long, value_hint = ValueHint::FilePath)]
    dump_weights: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(value_hint = ValueHint::FilePath)]
    ch1: PathBuf,
    #[arg(value_hint = ValueHint::FilePath)]
    ch2: PathBuf,
    #[arg(value_hint = ValueHint::FilePath)]
    clean: PathBuf,
    /// Optional scorer for the alpha column
    #[command(flatten)]
    plugin: PluginArgs,
    #[arg(long, default_value_t = 0.0)]
    psi: f64,
    #[arg(long, default_value_t = 2.0)]
    grid_step: f64,
    #[command(flatten)]
    array: ArrayArgs,
    /// CSV path; printed to stdout when omitted
    #[arg(short, long, value_hint = ValueHint::FilePath)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(value_hint = ValueHint::FilePath)]
    spec: PathBuf,
    /// Overrides output_dir of the batch file
    #[arg(short, long, value_hint = ValueHint::DirPath)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(value_hint = ValueHint::FilePath)]
    clean: PathBuf,
    #[arg(value_hint = ValueHint::FilePath)]
    degraded: PathBuf,
}

#[derive(Args)]
struct TnsbfArgs {
    #[arg(value_hint = ValueHint::FilePath)]
    ch1: PathBuf,
    #[arg(value_hint = ValueHint::FilePath)]
    ch2: PathBuf,
    #[arg(long, default_value_t = 90.0)]
    theta_s: f64,
    #[arg(long)]
    theta_i: f64,
    #[command(flatten)]
    array: ArrayArgs,
    #[arg(short, long, value_hint = ValueHint::FilePath)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignalKind {
    Utterance,
    White,
    Pink,
    Babble,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(value_enum)]
    kind: SignalKind,
    /// Length in seconds
    #[arg(long, default_value_t = 3.0)]
    duration: f64,
    #[arg(long, default_value_t = 16_000)]
    sample_rate: u32,
    /// Voices in babble
    #[arg(long, default_value_t = 6)]
    talkers: usize,
    #[arg(short, long, value_hint = ValueHint::FilePath)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Float32)]
    format: Format,
}

fn load_capture(ch1: &Path, ch2: &Path, array: &ArrayArgs) -> Result<StereoCapture> {
    let a = read_wav(ch1)?;
    let b = read_wav(ch2)?;
    Ok(StereoCapture::new(a, b, array.geometry())?)
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_simulate(args: &SimulateArgs, seed: Option<u64>) -> Result<()> {
    let text = std::fs::read_to_string(&args.scenario).with_context(|| format!("reading {}", args.scenario.display()))?;
    let mut scenario: RoomScenario =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.scenario.display()))?;
    if let Some(seed) = seed {
        scenario.rng_seed = seed;
    }
    let speech = read_wav(&args.speech)?;
    let interference = read_wav(&args.interference)?;
    let scene = simulate_capture(&scenario, &speech, &interference)?;

    std::fs::create_dir_all(&args.out_dir)?;
    let format = args.format.into();
    let write = |name: &str, w: &Waveform| -> Result<()> {
        write_wav(args.out_dir.join(name), w, format)?;
        Ok(())
    };
    write("ch1.wav", &scene.capture.ch1)?;
    write("ch2.wav", &scene.capture.ch2)?;
    if args.images {
        for m in 0..2 {
            write(&format!("speech_mic{}.wav", m + 1), &scene.speech_images[m])?;
            write(&format!("interference_mic{}.wav", m + 1), &scene.interference_images[m])?;
        }
    }
    let sir = 10.0 * (scene.speech_images[0].energy() / scene.interference_images[0].energy()).log10();
    eprintln!(
        "wrote {} samples per channel ({:.3} s), SIR at mic 1 {sir:.2} dB",
        scene.capture.len(),
        scene.capture.ch1.duration()
    );
    Ok(())
}

fn scorer_spec(scorer: ScorerArg, reference: Option<&Path>, plugin: &PluginArgs) -> Result<ScorerSpec> {
    Ok(match scorer {
        ScorerArg::Oracle => {
            let path = reference.context("--scorer oracle needs --ref")?;
            ScorerSpec::Oracle {
                reference: read_wav(path)?,
            }
        }
        ScorerArg::Plugin => ScorerSpec::Plugin(plugin.config()?.context("--scorer plugin needs --plugin-cmd")?),
    })
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let capture = load_capture(&args.ch1, &args.ch2, &args.array)?;
    let spec = scorer_spec(args.scorer, args.reference.as_deref(), &args.plugin)?;
    let grid = AngleGrid::uniform(args.grid_step)?;
    let cfg = StftConfig::default();
    let result: IansResult = match args.psi.as_slice() {
        [psi] => run_ians(&capture, *psi, &grid, &spec, &cfg)?,
        [a, b] => run_ians_dual(&capture, *a, *b, &grid, &spec, &cfg)?,
        other => bail!("--psi takes one or two values, got {}", other.len()),
    };

    write_wav(&args.output_wav, &result.output, WavFormat::Float32)?;
    if let Some(dir) = &args.dump_candidates {
        let candidates = candidate_bank(&capture, result.psi, &grid, &cfg)?;
        dump_candidates(dir, &candidates)?;
    }
    if let Some(path) = &args.dump_weights {
        if result.phi_star == result.psi {
            eprintln!("note: phi* equals psi, the output is channel 1 and the weights file holds the degenerate zero weights");
        }
        let w = nsbf_weights(result.psi, result.phi_star, &capture.geometry, &cfg, capture.sample_rate())?;
        let f = File::create(path).with_context(|| format!("writing {}", path.display()))?;
        let mut out = BufWriter::new(f);
        w.write_csv(&mut out)?;
        out.flush()?;
    }
    let json = serde_json::to_string_pretty(&result.to_json(Some(&args.output_wav)))? + "\n";
    write_text(args.output.as_deref(), &json)?;
    eprintln!(
        "phi* = {} deg (psi {} deg, {} scorer, best score {:.4})",
        result.phi_star,
        result.psi,
        result.scorer_kind(),
        result.score_vector.scores[result.phi_index]
    );
    Ok(())
}

fn cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let capture = load_capture(&args.ch1, &args.ch2, &args.array)?;
    let clean = read_wav(&args.clean)?;
    let grid = AngleGrid::uniform(args.grid_step)?;
    let candidates = candidate_bank(&capture, args.psi, &grid, &StftConfig::default())?;
    let beta = score_all(&candidates, &ScorerSpec::Oracle { reference: clean })?;
    let alpha = match args.plugin.config()? {
        Some(cfg) => Some(score_all(&candidates, &ScorerSpec::Plugin(cfg))?),
        None => None,
    };
    let mut csv = String::from("angle,alpha,beta\n");
    for (i, angle) in grid.angles().iter().enumerate() {
        let a = alpha.as_ref().map(|v| cell(v.scores[i])).unwrap_or_default();
        csv.push_str(&format!("{angle},{a},{}\n", cell(beta.scores[i])));
    }
    write_text(args.output.as_deref(), &csv)
}

fn cmd_batch(args: &BatchArgs) -> Result<bool> {
    let mut spec = BatchSpec::load(&args.spec)?;
    if let Some(dir) = &args.output_dir {
        spec.output_dir = Some(dir.clone());
    }
    let report = run_batch(&spec)?;
    let cols = &report.columns;
    println!("{:<12} {:>8} {:>7} {:>5}  {}", "noise", "theta_i", "sir_db", "rows", cols.join("  "));
    let line = |label: &str, angle: String, sir: String, n: usize, mean: &std::collections::BTreeMap<String, f64>| {
        let cells: Vec<String> = cols
            .iter()
            .map(|c| format!("{:>width$}", mean.get(c).map(|v| format!("{v:.3}")).unwrap_or_default(), width = c.len()))
            .collect();
        println!("{label:<12} {angle:>8} {sir:>7} {n:>5}  {}", cells.join("  "));
    };
    for s in &report.summary {
        line(&s.noise, s.interference_angle.to_string(), s.sir_db.to_string(), s.rows, &s.mean);
    }
    line("overall", String::new(), String::new(), report.rows.len() - report.failed, &report.overall);
    for r in report.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("row {} failed: {}", r.index, r.error.as_deref().unwrap_or_default());
    }
    Ok(report.ok())
}

fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let clean = read_wav(&args.clean)?;
    let degraded = read_wav(&args.degraded)?;
    println!("{:.4}", stoi(&clean, &degraded)?);
    Ok(())
}

fn cmd_tnsbf(args: &TnsbfArgs) -> Result<()> {
    let capture = load_capture(&args.ch1, &args.ch2, &args.array)?;
    let out = run_t_nsbf(&capture, args.theta_s, args.theta_i, &StftConfig::default())?;
    write_wav(&args.output, &out, WavFormat::Float32)?;
    Ok(())
}

fn cmd_synth(args: &SynthArgs, seed: u64) -> Result<()> {
    if !(args.duration > 0.0 && args.duration.is_finite()) {
        bail!("duration must be positive");
    }
    if args.sample_rate == 0 {
        bail!("sample rate must be positive");
    }
    let len = (args.duration * f64::from(args.sample_rate)).round() as usize;
    let fs = args.sample_rate;
    let w = match args.kind {
        SignalKind::Utterance => synth::utterance(seed, args.duration, fs),
        SignalKind::White => synth::white_noise(seed, len, fs),
        SignalKind::Pink => synth::pink_noise(seed, len, fs),
        SignalKind::Babble => synth::babble(seed, len, fs, args.talkers.max(1)),
    };
    write_wav(&args.output, &w, args.format.into())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, cli.seed).map(|_| true),
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a).map(|_| true),
        Command::Batch(a) => cmd_batch(a),
        Command::Score(a) => cmd_score(a).map(|_| true),
        Command::Tnsbf(a) => cmd_tnsbf(a).map(|_| true),
        Command::Synth(a) => cmd_synth(a, cli.seed.unwrap_or(0)).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
