pub mod array;
pub mod batch;
pub mod candidates;
pub mod dsp;
pub mod engine;
pub mod error;
pub mod room;
pub mod scorer;
pub mod stoi;
pub mod synth;

pub use error::{Error, Result};
