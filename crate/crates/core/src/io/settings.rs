//! Flat TOML configuration. Every key is optional; missing keys fall back to
//! the sample-rate defaults. Precedence is defaults < file < command line.
//!
//! ```toml
//! fft_size = 1024
//! hop_size = 256
//! window = "hann"
//! k_max = 60
//! f0_min = 80.0
//! seed = 7
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisConfig;
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::spectral::{MelConfig, SpectralConfig, WindowKind};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub fft_size: Option<usize>,
    pub hop_size: Option<usize>,
    pub win_size: Option<usize>,
    pub window: Option<WindowKind>,
    pub center: Option<bool>,

    pub n_mels: Option<usize>,
    pub f_min: Option<f64>,
    pub f_max: Option<f64>,
    pub log_floor: Option<f64>,

    pub f0_min: Option<f64>,
    pub f0_max: Option<f64>,
    pub k_max: Option<usize>,
    pub peak_halfwidth_bins: Option<usize>,
    pub refine_iters: Option<usize>,
    pub voicing_threshold: Option<f64>,
    pub median_len: Option<usize>,
    pub silence_rms: Option<f64>,

    pub lambda_dsp: Option<f64>,
    pub lambda_mel: Option<f64>,
    pub lambda_fm: Option<f64>,

    pub seed: Option<u64>,
}

/// Fully resolved parameters for one sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub spectral: SpectralConfig,
    pub mel: MelConfig,
    pub analysis: AnalysisConfig,
    pub weights: LossWeights,
    pub seed: u64,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl Settings {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(1);
            Error::Parse {
                path: path.into(),
                line,
                msg: e.message().to_string(),
            }
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Keys set in `top` win over keys set in `self`.
    pub fn overlay(mut self, top: &Settings) -> Self {
        let s = &mut self;
        overlay!(s, top;
            fft_size, hop_size, win_size, window, center,
            n_mels, f_min, f_max, log_floor,
            f0_min, f0_max, k_max, peak_halfwidth_bins, refine_iters,
            voicing_threshold, median_len, silence_rms,
            lambda_dsp, lambda_mel, lambda_fm, seed);
        self
    }

    pub fn resolve(&self, sample_rate: u32) -> Result<Resolved> {
        let mut spectral = match self.fft_size {
            Some(n) => SpectralConfig::with_fft(sample_rate, n),
            None => SpectralConfig::for_sample_rate(sample_rate),
        };
        if let Some(h) = self.hop_size {
            spectral.hop_size = h;
        }
        if let Some(w) = self.win_size {
            spectral.win_size = w;
        }
        if let Some(w) = self.window {
            spectral.window = w;
        }
        if let Some(c) = self.center {
            spectral.center = c;
        }
        spectral.validate()?;

        let mut mel = MelConfig::from_spectral(spectral);
        if let Some(v) = self.n_mels {
            mel.n_mels = v;
        }
        if let Some(v) = self.f_min {
            mel.f_min = v;
        }
        if let Some(v) = self.f_max {
            mel.f_max = v;
        }
        if let Some(v) = self.log_floor {
            mel.log_floor = v;
        }
        mel.validate()?;

        let mut analysis = AnalysisConfig::new(spectral.hop_size);
        let a = &mut analysis;
        let s = self;
        if let Some(v) = s.f0_min {
            a.f0_min = v;
        }
        if let Some(v) = s.f0_max {
            a.f0_max = v;
        }
        if let Some(v) = s.k_max {
            a.k_max = v;
        }
        if let Some(v) = s.peak_halfwidth_bins {
            a.peak_halfwidth_bins = v;
        }
        if let Some(v) = s.refine_iters {
            a.refine_iters = v;
        }
        if let Some(v) = s.voicing_threshold {
            a.voicing_threshold = v;
        }
        if let Some(v) = s.median_len {
            a.median_len = v;
        }
        if let Some(v) = s.silence_rms {
            a.silence_rms = v;
        }
        analysis.validate(sample_rate)?;

        let d = LossWeights::default();
        let weights = LossWeights {
            lambda_dsp: self.lambda_dsp.unwrap_or(d.lambda_dsp),
            lambda_mel: self.lambda_mel.unwrap_or(d.lambda_mel),
            lambda_fm: self.lambda_fm.unwrap_or(d.lambda_fm),
        };
        weights.validate()?;

        Ok(Resolved {
            spectral,
            mel,
            analysis,
            weights,
            seed: self.seed.unwrap_or(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let s = Settings::parse("", Path::new("c.toml")).unwrap();
        let r = s.resolve(22050).unwrap();
        assert_eq!(r.spectral, SpectralConfig::for_sample_rate(22050));
        assert_eq!(r.analysis, AnalysisConfig::new(256));
        assert_eq!(r.weights, LossWeights::default());
        assert_eq!(r.seed, 0);
    }

    #[test]
    fn file_values_apply() {
        let text = "fft_size = 512\nwindow = \"hamming\"\nk_max = 12\nseed = 9\nlambda_dsp = 1.5\n";
        let r = Settings::parse(text, Path::new("c.toml"))
            .unwrap()
            .resolve(16000)
            .unwrap();
        assert_eq!(r.spectral.fft_size, 512);
        assert_eq!(r.spectral.hop_size, 128);
        assert_eq!(r.spectral.window, WindowKind::Hamming);
        assert_eq!(r.analysis.hop_size, 128);
        assert_eq!(r.analysis.k_max, 12);
        assert_eq!(r.mel.spectral, r.spectral);
        assert_eq!(r.seed, 9);
        assert_eq!(r.weights.lambda_dsp, 1.5);
    }

    #[test]
    fn overlay_precedence() {
        let file = Settings {
            k_max: Some(10),
            seed: Some(1),
            ..Settings::default()
        };
        let flags = Settings {
            seed: Some(2),
            ..Settings::default()
        };
        let merged = file.overlay(&flags);
        assert_eq!(merged.k_max, Some(10));
        assert_eq!(merged.seed, Some(2));
    }

    #[test]
    fn errors_report_lines() {
        let e = Settings::parse("k_max = 3\nbogus = 1\n", Path::new("c.toml")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e =
            Settings::parse("k_max = 3\n\nhop_size = \"x\"\n", Path::new("c.toml")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        let bad = Settings {
            f0_max: Some(20000.0),
            ..Settings::default()
        };
        assert!(matches!(bad.resolve(16000), Err(Error::InvalidArgument(_))));
    }
}
