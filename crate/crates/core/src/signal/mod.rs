//! Harmonic and noise waveform synthesis from frame-level features.

mod harmonic;
mod interp;
mod noise;
mod phase;
mod types;

pub(crate) use harmonic::pitch_track;
pub use harmonic::{harmonic_synthesize, harmonic_synthesize_len};
pub use interp::interpolate_to_samples;
pub use noise::{noise_synthesize, noise_synthesize_len};
pub use phase::cumulative_phase;
pub use types::{F0Contour, HarmonicAmplitudes, InitialPhases, NoiseMagnitudeSpectrum, Waveform};

use crate::error::{Error, Result};

/// Default size of the harmonic bank.
pub const DEFAULT_K_MAX: usize = 100;

/// Elementwise sum of the periodic and aperiodic parts.
pub fn dsp_combine(harmonic: &Waveform, noise: &Waveform) -> Result<Waveform> {
    if harmonic.sample_rate() != noise.sample_rate() {
        return Err(Error::invalid(format!(
            "sample rates differ: {} vs {}",
            harmonic.sample_rate(),
            noise.sample_rate()
        )));
    }
    if harmonic.len() != noise.len() {
        return Err(Error::invalid(format!(
            "lengths differ: {} vs {}",
            harmonic.len(),
            noise.len()
        )));
    }
    let samples = harmonic
        .samples()
        .iter()
        .zip(noise.samples())
        .map(|(h, n)| h + n)
        .collect();
    Waveform::new(samples, harmonic.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_identity_and_cancellation() {
        let x = Waveform::new(vec![0.1, -0.4, 0.25], 8000).unwrap();
        let z = Waveform::silence(3, 8000).unwrap();
        assert_eq!(dsp_combine(&x, &z).unwrap(), x);
        let neg = x.scaled(-1.0).unwrap();
        assert!(dsp_combine(&neg, &x)
            .unwrap()
            .samples()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn combine_rejects_mismatch() {
        let a = Waveform::silence(3, 8000).unwrap();
        assert!(dsp_combine(&a, &Waveform::silence(4, 8000).unwrap()).is_err());
        assert!(dsp_combine(&a, &Waveform::silence(3, 16000).unwrap()).is_err());
    }
}
