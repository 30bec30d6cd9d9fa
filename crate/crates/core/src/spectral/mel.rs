//! Slaney-style mel filterbank and log-mel extraction.
//!
//! The mel scale is linear below 1 kHz (200/3 Hz per mel) and logarithmic
//! above it with step `ln(6.4) / 27`. Band edges are `n_mels + 2` points
//! spaced evenly in mel between `f_min` and `f_max`. Each triangle is
//! scaled by `2 / (f_hi - f_lo)` so that every band has unit area in Hz.
//! The filterbank is applied to the STFT magnitude (not power), and the
//! result is compressed with `ln(max(E, log_floor))`.

use std::sync::Arc;

use ndarray::Array2;

use super::config::{MelConfig, SpectralConfig};
use super::stft::{magnitude, stft};
use crate::error::{Error, Result};
use crate::signal::Waveform;

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

pub fn hz_to_mel(hz: f64) -> f64 {
    if hz < MIN_LOG_HZ {
        hz / F_SP
    } else {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / log_step()
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel < MIN_LOG_MEL {
        mel * F_SP
    } else {
        MIN_LOG_HZ * (log_step() * (mel - MIN_LOG_MEL)).exp()
    }
}

/// Immutable filterbank matrix, `n_mels × bins`. Cheap to clone and share.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    cfg: MelConfig,
    weights: Arc<Array2<f64>>,
}

impl MelFilterbank {
    pub fn new(cfg: &MelConfig) -> Result<Self> {
        cfg.validate()?;
        let spectral = &cfg.spectral;
        let bins = spectral.bins();
        let lo = hz_to_mel(cfg.f_min);
        let hi = hz_to_mel(cfg.f_max);
        let edges: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
            .collect();
        let bin_hz = spectral.bin_hz();
        let mut weights = Array2::zeros((cfg.n_mels, bins));
        for band in 0..cfg.n_mels {
            let (f_lo, f_c, f_hi) = (edges[band], edges[band + 1], edges[band + 2]);
            let enorm = 2.0 / (f_hi - f_lo);
            for k in 0..bins {
                let f = k as f64 * bin_hz;
                let rising = (f - f_lo) / (f_c - f_lo);
                let falling = (f_hi - f) / (f_hi - f_c);
                weights[[band, k]] = rising.min(falling).max(0.0) * enorm;
            }
        }
        Ok(Self {
            cfg: *cfg,
            weights: Arc::new(weights),
        })
    }

    pub fn config(&self) -> &MelConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    /// Raw (linear) mel energies for a `frames × bins` magnitude spectrogram.
    pub fn apply(&self, mag: &Array2<f64>) -> Result<Array2<f64>> {
        if mag.ncols() != self.weights.ncols() {
            return Err(Error::invalid(format!(
                "magnitude has {} bins, filterbank expects {}",
                mag.ncols(),
                self.weights.ncols()
            )));
        }
        Ok(mag.dot(&self.weights.t()))
    }

    /// Log-compressed mel spectrogram, shape `frames × n_mels`.
    pub fn log_mel(&self, x: &Waveform) -> Result<Array2<f64>> {
        if x.sample_rate() != self.cfg.spectral.sample_rate {
            return Err(Error::invalid(format!(
                "waveform is {} Hz, mel config is {} Hz",
                x.sample_rate(),
                self.cfg.spectral.sample_rate
            )));
        }
        let mag = magnitude(&stft(x, &self.cfg.spectral)?);
        let floor = self.cfg.log_floor;
        Ok(self.apply(&mag)?.mapv(|e| e.max(floor).ln()))
    }
}

/// `ln(max(mel(|STFT(x)|), log_floor))`, shape `frames × n_mels`.
pub fn mel_spectrogram(x: &Waveform, cfg: &MelConfig) -> Result<Array2<f64>> {
    MelFilterbank::new(cfg)?.log_mel(x)
}

/// Magnitude STFT at each resolution, in the order given.
pub fn multi_resolution_spectrograms(
    x: &Waveform,
    cfgs: &[SpectralConfig],
) -> Result<Vec<Array2<f64>>> {
    if cfgs.is_empty() {
        return Err(Error::invalid("at least one spectral config is required"));
    }
    cfgs.iter()
        .map(|c| stft(x, c).map(|s| magnitude(&s)))
        .collect()
}
