//! Estimation of the synthesizer's driving features from audio.

mod config;
mod f0;
mod harmonics;

pub use config::AnalysisConfig;
pub use f0::{estimate_f0, frame_count};
pub use harmonics::{
    estimate_harmonics, estimate_initial_phases, estimate_partials, reconstruct_partials, Partial,
    PartialTrack,
};

use ndarray::s;

use crate::error::{Error, Result};
use crate::signal::{
    F0Contour, HarmonicAmplitudes, InitialPhases, NoiseMagnitudeSpectrum, Waveform,
};
use crate::spectral::{magnitude, stft, stft_samples, SpectralConfig};

/// `|STFT(x - harmonic)|`, with the residual reflected at both ends
/// instead of zero-padded.
pub fn estimate_noise(
    x: &Waveform,
    harmonic: &Waveform,
    spectral: &SpectralConfig,
) -> Result<NoiseMagnitudeSpectrum> {
    if x.len() != harmonic.len() || x.sample_rate() != harmonic.sample_rate() {
        return Err(Error::invalid(format!(
            "signal ({} samples @ {} Hz) and harmonic part ({} samples @ {} Hz) differ",
            x.len(),
            x.sample_rate(),
            harmonic.len(),
            harmonic.sample_rate()
        )));
    }
    let residual: Vec<f64> = x
        .samples()
        .iter()
        .zip(harmonic.samples())
        .map(|(a, b)| a - b)
        .collect();
    let pad = spectral.fft_size / 2;
    let mag = if spectral.center && residual.len() > pad {
        // Reflect the ends so edge frames do not see an artificial step,
        // whose broadband leakage would be resynthesised as noise.
        let n = residual.len();
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| residual[i]));
        ext.extend_from_slice(&residual);
        ext.extend((1..=pad).map(|i| residual[n - 1 - i]));
        let plain = SpectralConfig {
            center: false,
            ..*spectral
        };
        let frames = spectral.frame_count(n);
        let full = magnitude(&stft_samples(&ext, &plain)?);
        full.slice(s![..frames, ..]).to_owned()
    } else {
        magnitude(&stft(&Waveform::new(residual, x.sample_rate())?, spectral)?)
    };
    NoiseMagnitudeSpectrum::new(mag.mapv(|v| v as f32))
}

/// Features for one signal; every component has the same frame count.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub f0: F0Contour,
    pub harmonics: HarmonicAmplitudes,
    pub noise: NoiseMagnitudeSpectrum,
    /// Starting phase per harmonic for resynthesis.
    pub phases: InitialPhases,
}

/// Full analysis with the built-in pitch tracker.
pub fn analyze(x: &Waveform, cfg: &AnalysisConfig, spectral: &SpectralConfig) -> Result<Analysis> {
    let f0 = estimate_f0(x, cfg)?;
    analyze_with_f0(x, f0, cfg, spectral)
}

/// Full analysis around a given pitch contour (e.g. one computed by an
/// external tracker).
///
/// The contour is truncated or padded with unvoiced frames to cover the
/// signal. The residual for the noise branch subtracts a phase-locked
/// reconstruction of the measured partials, not the free-running harmonic
/// bank, so that harmonic energy does not leak into the noise estimate.
pub fn analyze_with_f0(
    x: &Waveform,
    f0: F0Contour,
    cfg: &AnalysisConfig,
    spectral: &SpectralConfig,
) -> Result<Analysis> {
    if !spectral.center {
        return Err(Error::invalid("analysis requires centred spectral framing"));
    }
    let frames = frame_count(x.len(), spectral.hop_size);
    if frames == 0 {
        return Err(Error::invalid("cannot analyse an empty signal"));
    }
    let f0 = if f0.frames() == frames {
        f0
    } else {
        log::warn!(
            "f0 contour has {} frames, signal needs {frames}; resizing",
            f0.frames()
        );
        f0.resized(frames)
    };
    let track = estimate_partials(x, &f0, cfg, spectral)?;
    let harmonics = if cfg.refine_iters == 0 {
        track.amplitudes()?
    } else {
        estimate_harmonics(x, &f0, cfg, spectral)?
    };
    let phases = estimate_initial_phases(&track, &f0, x.sample_rate(), x.len())?;
    let locked = reconstruct_partials(&track, x.sample_rate(), x.len(), spectral)?;
    let noise = estimate_noise(x, &locked, spectral)?;
    debug_assert_eq!(noise.frames(), frames);
    Ok(Analysis {
        f0,
        harmonics,
        noise,
        phases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{harmonic_synthesize_len, InitialPhases};

    #[test]
    fn zero_residual_gives_zero_noise() {
        let spectral = SpectralConfig::for_sample_rate(22050);
        let x = Waveform::new((0..5000).map(|i| (i as f64 * 0.07).sin()).collect(), 22050).unwrap();
        let n = estimate_noise(&x, &x, &spectral).unwrap();
        assert!(n.values().iter().all(|v| *v < 1e-6));
    }

    #[test]
    fn zero_harmonic_gives_plain_magnitude_away_from_edges() {
        let spectral = SpectralConfig::for_sample_rate(22050);
        let x =
            Waveform::new((0..5000).map(|i| (i as f64 * 0.031).cos()).collect(), 22050).unwrap();
        let z = Waveform::silence(5000, 22050).unwrap();
        let n = estimate_noise(&x, &z, &spectral).unwrap();
        let want = magnitude(&stft(&x, &spectral).unwrap()).mapv(|v| v as f32);
        assert_eq!(n.values().dim(), want.dim());
        // frames 2..=17 lie fully inside the signal
        let inner = s![2..18, ..];
        assert_eq!(n.values().slice(inner), want.slice(inner));
        // edge frames see a reflection instead of a step
        assert_ne!(n.values().row(0), want.row(0));
    }

    #[test]
    fn length_mismatch_rejected() {
        let spectral = SpectralConfig::for_sample_rate(22050);
        let a = Waveform::silence(100, 22050).unwrap();
        let b = Waveform::silence(101, 22050).unwrap();
        assert!(estimate_noise(&a, &b, &spectral).is_err());
    }

    #[test]
    fn silence_analysis() {
        let sr = 22050;
        let spectral = SpectralConfig::for_sample_rate(sr);
        let cfg = AnalysisConfig::new(spectral.hop_size);
        let x = Waveform::silence(sr as usize, sr).unwrap();
        let a = analyze(&x, &cfg, &spectral).unwrap();
        assert_eq!(a.f0.voiced_count(), 0);
        assert!(a.harmonics.values().iter().all(|v| *v == 0.0));
        assert!(a.noise.values().iter().all(|v| *v < 1e-9));
        assert_eq!(a.f0.frames(), a.noise.frames());
        assert_eq!(a.f0.frames(), a.harmonics.frames());
    }

    #[test]
    fn analysis_f0_is_the_tracker_output() {
        let sr = 22050;
        let spectral = SpectralConfig::for_sample_rate(sr);
        let cfg = AnalysisConfig::new(spectral.hop_size);
        let x = Waveform::new(
            (0..sr as usize)
                .map(|i| 0.4 * (std::f64::consts::TAU * 220.0 * i as f64 / 22050.0).sin())
                .collect(),
            sr,
        )
        .unwrap();
        let a = analyze(&x, &cfg, &spectral).unwrap();
        assert_eq!(a.f0, estimate_f0(&x, &cfg).unwrap());
    }

    #[test]
    fn external_f0_is_resized() {
        let sr = 22050;
        let spectral = SpectralConfig::for_sample_rate(sr);
        let cfg = AnalysisConfig::new(spectral.hop_size);
        let frames = frame_count(sr as usize, spectral.hop_size);
        let f0 = F0Contour::constant(spectral.hop_size, frames, 200.0).unwrap();
        let h = HarmonicAmplitudes::constant(frames, &[0.3]).unwrap();
        let x =
            harmonic_synthesize_len(&f0, &h, sr, &InitialPhases::zeros(1), sr as usize).unwrap();
        let a = analyze_with_f0(&x, f0.resized(frames - 2), &cfg, &spectral).unwrap();
        assert_eq!(a.f0.frames(), frames);
        assert!(!a.f0.voiced()[frames - 1]);
    }
}
