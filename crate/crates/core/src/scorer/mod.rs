//! Stage-2 scoring: the oracle (true STOI against the clean reference) and
//! external non-intrusive scorers reached over a line-delimited JSON
//! protocol.

mod plugin;

use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::TimeCandidate;
use crate::dsp::Waveform;
use crate::error::Result;
use crate::stoi::StoiReference;

pub use plugin::{PluginHandle, PROTOCOL, SCORER_SAMPLE_RATE};

pub const DEFAULT_PLUGIN_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Oracle,
    Plugin,
}

impl std::fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScorerKind::Oracle => "oracle",
            ScorerKind::Plugin => "plugin",
        })
    }
}

/// One score per grid angle. Silent candidates hold `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
    pub kind: ScorerKind,
}

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Index of the largest score, earliest on ties. `None` when every entry
    /// is `-inf`.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &s) in self.scores.iter().enumerate() {
            if s == f64::NEG_INFINITY {
                continue;
            }
            if best.is_none_or(|b| s > self.scores[b]) {
                best = Some(i);
            }
        }
        best
    }

    pub fn max(&self) -> Option<f64> {
        self.argmax().map(|i| self.scores[i])
    }

    /// Index of the smallest non-silent score, earliest on ties.
    pub fn argmin(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &s) in self.scores.iter().enumerate() {
            if s == f64::NEG_INFINITY {
                continue;
            }
            if best.is_none_or(|b| s < self.scores[b]) {
                best = Some(i);
            }
        }
        best
    }
}

/// External scorer invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PluginConfig {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    /// Limit for the handshake and for each request.
    pub timeout: Duration,
}

impl PluginConfig {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            timeout: DEFAULT_PLUGIN_TIMEOUT,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ScorerSpec {
    /// True STOI against the clean speech.
    Oracle { reference: Waveform },
    Plugin(PluginConfig),
}

impl ScorerSpec {
    pub fn kind(&self) -> ScorerKind {
        match self {
            ScorerSpec::Oracle { .. } => ScorerKind::Oracle,
            ScorerSpec::Plugin(_) => ScorerKind::Plugin,
        }
    }
}

/// STOI of `candidate` against `reference`; the longer one is truncated.
pub fn score_oracle(candidate: &Waveform, reference: &Waveform) -> Result<f64> {
    crate::stoi::stoi(reference, candidate)
}

/// Score of one peak-normalized candidate from a running plugin.
pub fn score_plugin(candidate: &Waveform, plugin: &mut PluginHandle) -> Result<f64> {
    plugin.score(candidate)
}

/// Scores every candidate in grid order. Silent candidates get `-inf` and
/// never reach the scorer. The first failure aborts with its index.
pub fn score_all(candidates: &[TimeCandidate], spec: &ScorerSpec) -> Result<ScoreVector> {
    let scores = match spec {
        ScorerSpec::Oracle { reference } => {
            let reference = StoiReference::new(reference)?;
            candidates
                .par_iter()
                .enumerate()
                .map(|(i, c)| {
                    if c.silent {
                        Ok(f64::NEG_INFINITY)
                    } else {
                        reference.score(&c.normalized).map_err(|e| e.at_index(i))
                    }
                })
                .collect::<Result<Vec<f64>>>()?
        }
        ScorerSpec::Plugin(cfg) => {
            let mut handle = PluginHandle::spawn(cfg)?;
            score_with_plugin(candidates, &mut handle)?
        }
    };
    Ok(ScoreVector {
        scores,
        kind: spec.kind(),
    })
}

/// Like [`score_all`] with an already running plugin.
pub fn score_with_plugin(candidates: &[TimeCandidate], handle: &mut PluginHandle) -> Result<Vec<f64>> {
    candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if c.silent {
                Ok(f64::NEG_INFINITY)
            } else {
                handle.score(&c.normalized).map_err(|e| e.at_index(i))
            }
        })
        .collect()
}
