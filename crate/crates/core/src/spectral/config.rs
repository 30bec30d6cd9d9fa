use serde::{Deserialize, Serialize};

use super::window::WindowKind;
use crate::error::{Error, Result};

/// Framing parameters shared by every spectral operation.
///
/// With `center` enabled, frame `m` is centred on sample `m * hop_size`
/// and the signal is zero-padded by `fft_size / 2` on both sides. A
/// window shorter than the FFT is zero-padded symmetrically inside the
/// frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub sample_rate: u32,
    pub fft_size: usize,
    pub hop_size: usize,
    pub win_size: usize,
    pub window: WindowKind,
    pub center: bool,
}

impl SpectralConfig {
    /// 2048/512 at 44.1 kHz-class rates, 1024/256 below 32 kHz. Hann, centred.
    pub fn for_sample_rate(sample_rate: u32) -> Self {
        let fft_size = if sample_rate >= 32_000 { 2048 } else { 1024 };
        Self {
            sample_rate,
            fft_size,
            hop_size: fft_size / 4,
            win_size: fft_size,
            window: WindowKind::Hann,
            center: true,
        }
    }

    /// Hann, centred, `win = fft`, `hop = fft / 4`.
    pub fn with_fft(sample_rate: u32, fft_size: usize) -> Self {
        Self {
            sample_rate,
            fft_size,
            hop_size: fft_size / 4,
            win_size: fft_size,
            window: WindowKind::Hann,
            center: true,
        }
    }

    /// Resolutions used for the multi-resolution spectrogram stack.
    pub fn multi_resolution(sample_rate: u32) -> Vec<Self> {
        [512, 1024, 2048]
            .into_iter()
            .map(|n| Self::with_fft(sample_rate, n))
            .collect()
    }

    /// Every preset shipped with the crate for `sample_rate`; all are COLA.
    pub fn builtin(sample_rate: u32) -> Vec<Self> {
        let mut out = vec![Self::for_sample_rate(sample_rate)];
        for c in Self::multi_resolution(sample_rate) {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn bin_hz(&self) -> f64 {
        f64::from(self.sample_rate) / self.fft_size as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < 2 {
            return Err(Error::invalid(format!(
                "fft size {} is not a power of two",
                self.fft_size
            )));
        }
        if !(0 < self.hop_size && self.hop_size <= self.win_size && self.win_size <= self.fft_size)
        {
            return Err(Error::invalid(format!(
                "need 0 < hop ({}) <= win ({}) <= fft ({})",
                self.hop_size, self.win_size, self.fft_size
            )));
        }
        Ok(())
    }

    /// Window of `win_size` zero-padded to `fft_size`.
    pub fn frame_window(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.fft_size];
        let offset = (self.fft_size - self.win_size) / 2;
        w[offset..offset + self.win_size].copy_from_slice(&self.window.generate(self.win_size));
        w
    }

    /// Overlap-added squared window over one hop period.
    pub fn overlap_profile(&self) -> Vec<f64> {
        let w = self.frame_window();
        (0..self.hop_size)
            .map(|j| w.iter().skip(j).step_by(self.hop_size).map(|v| v * v).sum())
            .collect()
    }

    /// Steady-state value of the overlap-added squared window.
    pub fn overlap_gain(&self) -> f64 {
        let p = self.overlap_profile();
        p.iter().sum::<f64>() / p.len() as f64
    }

    /// Checks that the squared window overlap-adds to a constant at this hop,
    /// which is what the weighted overlap-add inverse relies on.
    pub fn validate_cola(&self) -> Result<()> {
        self.validate()?;
        let p = self.overlap_profile();
        let max = p.iter().cloned().fold(f64::MIN, f64::max);
        let min = p.iter().cloned().fold(f64::MAX, f64::min);
        if max <= 0.0 || (max - min) / max > 1e-9 {
            return Err(Error::invalid(format!(
                "{} window of {} at hop {} does not satisfy constant overlap-add \
                 (ripple {:.3e})",
                self.window,
                self.win_size,
                self.hop_size,
                if max > 0.0 {
                    (max - min) / max
                } else {
                    f64::INFINITY
                }
            )));
        }
        Ok(())
    }

    /// Number of frames `stft` produces for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if self.center {
            len.div_ceil(self.hop_size).max(1)
        } else if len <= self.fft_size {
            1
        } else {
            1 + (len - self.fft_size).div_ceil(self.hop_size)
        }
    }

    /// Signal index of the first sample of frame `m` (may be negative).
    pub fn frame_start(&self, m: usize) -> isize {
        let s = (m * self.hop_size) as isize;
        if self.center {
            s - (self.fft_size / 2) as isize
        } else {
            s
        }
    }
}

/// Mel-filterbank parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub log_floor: f64,
    pub spectral: SpectralConfig,
}

impl MelConfig {
    /// 80 bands from 0 Hz to Nyquist, floor 1e-5, on the default framing.
    pub fn for_sample_rate(sample_rate: u32) -> Self {
        Self::from_spectral(SpectralConfig::for_sample_rate(sample_rate))
    }

    pub fn from_spectral(spectral: SpectralConfig) -> Self {
        Self {
            n_mels: 80,
            f_min: 0.0,
            f_max: f64::from(spectral.sample_rate) / 2.0,
            log_floor: 1e-5,
            spectral,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spectral.validate()?;
        let nyquist = f64::from(self.spectral.sample_rate) / 2.0;
        if self.n_mels == 0 {
            return Err(Error::invalid("n_mels must be at least 1"));
        }
        if !(0.0 <= self.f_min && self.f_min < self.f_max && self.f_max <= nyquist) {
            return Err(Error::invalid(format!(
                "need 0 <= f_min ({}) < f_max ({}) <= nyquist ({nyquist})",
                self.f_min, self.f_max
            )));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return Err(Error::invalid("log floor must be positive and finite"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_sample_rate() {
        let c = SpectralConfig::for_sample_rate(44100);
        assert_eq!((c.fft_size, c.hop_size, c.win_size), (2048, 512, 2048));
        let c = SpectralConfig::for_sample_rate(22050);
        assert_eq!((c.fft_size, c.hop_size, c.win_size), (1024, 256, 1024));
        assert_eq!(c.bins(), 513);
    }

    #[test]
    fn builtin_configs_are_cola() {
        for sr in [22050, 44100] {
            for c in SpectralConfig::builtin(sr) {
                c.validate_cola().unwrap();
            }
        }
        // Hann squared sums to 1.5 at quarter-frame hop.
        let g = SpectralConfig::with_fft(44100, 1024).overlap_gain();
        assert!((g - 1.5).abs() < 1e-12);
    }

    #[test]
    fn non_cola_rejected() {
        let mut c = SpectralConfig::with_fft(44100, 1024);
        c.hop_size = 512;
        assert!(c.validate_cola().is_err());
        let mut c = SpectralConfig::with_fft(44100, 1024);
        c.window = WindowKind::Blackman;
        assert!(c.validate_cola().is_err());
        c.window = WindowKind::Hamming;
        assert!(c.validate_cola().is_ok());
    }

    #[test]
    fn invalid_geometry() {
        let mut c = SpectralConfig::with_fft(44100, 1000);
        assert!(c.validate().is_err());
        c.fft_size = 1024;
        c.win_size = 2048;
        assert!(c.validate().is_err());
        c.win_size = 1024;
        c.hop_size = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn frame_counts() {
        let c = SpectralConfig::with_fft(44100, 1024);
        assert_eq!(c.frame_count(1), 1);
        assert_eq!(c.frame_count(256), 1);
        assert_eq!(c.frame_count(257), 2);
        let mut c = c;
        c.center = false;
        assert_eq!(c.frame_count(1000), 1);
        assert_eq!(c.frame_count(1025), 2);
        assert_eq!(c.frame_count(1024 + 512), 3);
    }

    #[test]
    fn mel_validation() {
        let mut m = MelConfig::for_sample_rate(22050);
        m.validate().unwrap();
        m.f_max = 12000.0;
        assert!(m.validate().is_err());
        m.f_max = 8000.0;
        m.n_mels = 0;
        assert!(m.validate().is_err());
    }
}
