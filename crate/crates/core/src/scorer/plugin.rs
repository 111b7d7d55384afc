use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::PluginConfig;
use crate::dsp::{resample, write_wav, WavFormat, Waveform};
use crate::error::{Error, Result};

pub const PROTOCOL: &str = "ians-scorer-v1";

/// Rate of the WAVs handed to plugins.
pub const SCORER_SAMPLE_RATE: u32 = 16_000;

/// A running scorer process. Requests are answered one at a time.
pub struct PluginHandle {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    next_id: u64,
    scratch: tempfile::TempDir,
    dead: bool,
}

impl std::fmt::Debug for PluginHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PluginHandle")
            .field("pid", &self.child.id())
            .field("next_id", &self.next_id)
            .finish()
    }
}

impl PluginHandle {
    /// Starts the process and waits for its handshake line.
    pub fn spawn(cfg: &PluginConfig) -> Result<Self> {
        let (program, args) = cfg
            .command
            .split_first()
            .ok_or_else(|| Error::InvalidConfig("empty plugin command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdout = child.stdout.take().expect("piped stdout");
        let stdin = child.stdin.take();

        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });

        let mut handle = Self {
            child,
            stdin,
            lines: rx,
            timeout: cfg.timeout,
            next_id: 0,
            scratch: tempfile::Builder::new().prefix("ians-scorer-").tempdir()?,
            dead: false,
        };
        let hello = handle.read_message()?;
        if hello.get("protocol").and_then(Value::as_str) != Some(PROTOCOL) {
            handle.kill();
            return Err(Error::PluginProtocol(format!("expected handshake {{\"protocol\": \"{PROTOCOL}\"}}, got {hello}")));
        }
        Ok(handle)
    }

    pub fn scratch_dir(&self) -> &Path {
        self.scratch.path()
    }

    /// Sends one candidate and waits for its score.
    pub fn score(&mut self, candidate: &Waveform) -> Result<f64> {
        if self.dead {
            return Err(Error::PluginExited);
        }
        let id = self.next_id;
        self.next_id += 1;

        let path = self.scratch.path().join(format!("req_{id:06}.wav"));
        let audio = if candidate.sample_rate() == SCORER_SAMPLE_RATE {
            std::borrow::Cow::Borrowed(candidate)
        } else {
            std::borrow::Cow::Owned(resample(candidate, SCORER_SAMPLE_RATE)?)
        };
        write_wav(&path, &audio, WavFormat::Float32)?;

        let request = json!({ "id": id, "wav_path": path.to_string_lossy() });
        let sent = match self.stdin.as_mut() {
            Some(stdin) => writeln!(stdin, "{request}").and_then(|_| stdin.flush()),
            None => Err(std::io::ErrorKind::BrokenPipe.into()),
        };
        if sent.is_err() {
            self.kill();
            return Err(Error::PluginExited);
        }

        let reply = self.read_message();
        let _ = std::fs::remove_file(&path);
        let reply = reply?;

        if let Some(msg) = reply.get("error") {
            let msg = msg.as_str().map(str::to_owned).unwrap_or_else(|| msg.to_string());
            return Err(Error::PluginReported(msg));
        }
        if reply.get("id").and_then(Value::as_u64) != Some(id) {
            return Err(Error::PluginProtocol(format!("response {reply} does not answer request {id}")));
        }
        let score = reply
            .get("score")
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::PluginProtocol(format!("response {reply} has no numeric score")))?;
        if !score.is_finite() {
            return Err(Error::NonFinite("plugin score"));
        }
        Ok(score)
    }

    fn read_message(&mut self) -> Result<Value> {
        let deadline = Instant::now() + self.timeout;
        let line = loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(line)) => break line,
                Ok(Err(_)) | Err(RecvTimeoutError::Disconnected) => {
                    self.kill();
                    return Err(Error::PluginExited);
                }
                Err(RecvTimeoutError::Timeout) => {
                    self.kill();
                    return Err(Error::PluginTimeout(self.timeout));
                }
            }
        };
        serde_json::from_str::<Value>(&line)
            .ok()
            .filter(Value::is_object)
            .ok_or_else(|| Error::PluginProtocol(format!("malformed line {line:?}")))
    }

    fn kill(&mut self) {
        self.dead = true;
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for PluginHandle {
    fn drop(&mut self) {
        if self.dead {
            return;
        }
        // closing stdin asks the plugin to exit
        self.stdin = None;
        let deadline = Instant::now() + Duration::from_secs(2);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
