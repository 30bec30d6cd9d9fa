//! Framed spectral analysis shared by synthesis, analysis and losses.

mod config;
mod mel;
mod stft;
mod window;

pub use config::{MelConfig, SpectralConfig};
pub use mel::{
    hz_to_mel, mel_spectrogram, mel_to_hz, multi_resolution_spectrograms, MelFilterbank,
};
pub use stft::{istft, magnitude, stft};
pub use window::WindowKind;

pub(crate) use stft::{overlap_add, stft_samples, wsum_floor, RealDft};
