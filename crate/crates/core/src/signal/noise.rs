use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use super::types::{NoiseMagnitudeSpectrum, Waveform};
use crate::error::{Error, Result};
use crate::spectral::{overlap_add, wsum_floor, SpectralConfig};

/// Noise branch over the natural span of the spectrogram.
pub fn noise_synthesize(
    noise: &NoiseMagnitudeSpectrum,
    spectral: &SpectralConfig,
    seed: u64,
) -> Result<Waveform> {
    let frames = noise.frames();
    let len = if spectral.center {
        frames * spectral.hop_size
    } else {
        frames.saturating_sub(1) * spectral.hop_size + spectral.fft_size
    };
    noise_synthesize_len(noise, spectral, seed, len)
}

/// Inverse STFT of `N · e^{iP}` with `P` drawn i.i.d. uniform on `[-π, π)`.
///
/// Phases come from a ChaCha8 stream seeded with `seed`, drawn frame by
/// frame, bin by bin, so the output is a pure function of the arguments.
///
/// Frames with independent random phases add incoherently, so plain
/// weighted overlap-add would lose power by the overlap factor. The sum is
/// instead scaled per sample by `sqrt(fft / (Σw² · S(n)))`, where `Σw²` is
/// the frame window energy and `S(n)` the overlap-added squared window.
/// With that gain, feeding back `|STFT(r)|` of a stationary noise `r` gives
/// a signal with the same expected power as `r`.
pub fn noise_synthesize_len(
    noise: &NoiseMagnitudeSpectrum,
    spectral: &SpectralConfig,
    seed: u64,
    out_len: usize,
) -> Result<Waveform> {
    spectral.validate_cola()?;
    if noise.bins() != spectral.bins() {
        return Err(Error::invalid(format!(
            "noise spectrum has {} bins, config expects {}",
            noise.bins(),
            spectral.bins()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = Array2::from_shape_fn((noise.frames(), noise.bins()), |(m, k)| {
        let phase: f64 = rng.random_range(-PI..PI);
        Complex64::from_polar(f64::from(noise.values()[[m, k]]), phase)
    });
    let (acc, wsum) = overlap_add(&spec, spectral, out_len);
    let window_energy: f64 = spectral.frame_window().iter().map(|w| w * w).sum();
    let scale = spectral.fft_size as f64 / window_energy;
    let floor = wsum_floor(spectral);
    let samples = acc
        .iter()
        .zip(&wsum)
        .map(|(a, s)| {
            if *s > floor {
                a * (scale / s).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Waveform::new(samples, spectral.sample_rate)
}
