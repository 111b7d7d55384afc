use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("signal is empty")]
    EmptySignal,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid sample rate {0} Hz")]
    InvalidSampleRate(u32),

    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: u32, right: u32 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("angle {0} deg is outside [0, 180]")]
    InvalidAngle(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("window sum vanishes at interior sample {0}")]
    ZeroWindowSum(usize),

    #[error("position {position:?} is not strictly inside the room {dims:?}")]
    OutsideRoom { position: [f64; 3], dims: [f64; 3] },

    #[error("rt60 of {rt60} s needs wall absorption {absorption:.3} > 1 for this room")]
    AbsorptionOutOfRange { rt60: f64, absorption: f64 },

    #[error("{0} is silent")]
    Silent(&'static str),

    #[error("signal too short: {frames} frames after silence removal, need {needed}")]
    TooShort { frames: usize, needed: usize },

    #[error("every candidate is silent")]
    AllCandidatesSilent,

    #[error("scoring candidate {index} failed: {source}")]
    Scoring {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("plugin did not answer within {0:?}")]
    PluginTimeout(Duration),

    #[error("plugin exited unexpectedly")]
    PluginExited,

    #[error("plugin protocol violation: {0}")]
    PluginProtocol(String),

    #[error("plugin reported an error: {0}")]
    PluginReported(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_index(self, index: usize) -> Error {
        Error::Scoring {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Error {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
