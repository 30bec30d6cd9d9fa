//! Harmonic-plus-noise DSP synthesis with analysis, spectral utilities,
//! losses and file formats.
//!
//! The synthesizer turns a pitch contour, per-harmonic amplitudes and a noise
//! magnitude spectrogram into audio. [`analysis`] estimates those features
//! from a recording so it can be resynthesised.

pub mod analysis;
pub mod error;
pub mod io;
pub mod losses;
pub mod signal;
pub mod spectral;

pub use error::{Error, ErrorKind, Result};
