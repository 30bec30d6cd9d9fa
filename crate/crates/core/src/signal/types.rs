use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Mono audio at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn nyquist(&self) -> f64 {
        f64::from(self.sample_rate) / 2.0
    }

    /// Copy truncated or zero-extended to `len` samples.
    pub fn with_len(&self, len: usize) -> Self {
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }

    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::new(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate,
        )
    }
}

/// Frame-level fundamental frequency. A value of 0 Hz marks an unvoiced frame.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Contour {
    hop_size: usize,
    values: Vec<f32>,
    voiced: Vec<bool>,
}

impl F0Contour {
    /// Builds a contour, inferring voicing from non-zero values.
    pub fn new(hop_size: usize, values: Vec<f32>) -> Result<Self> {
        if hop_size == 0 {
            return Err(Error::invalid("f0 hop size must be positive"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!(
                "f0 frame {i} is negative or not finite ({})",
                values[i]
            )));
        }
        let voiced = values.iter().map(|&v| v > 0.0).collect();
        Ok(Self {
            hop_size,
            values,
            voiced,
        })
    }

    pub fn unvoiced(hop_size: usize, frames: usize) -> Result<Self> {
        Self::new(hop_size, vec![0.0; frames])
    }

    pub fn constant(hop_size: usize, frames: usize, hz: f32) -> Result<Self> {
        Self::new(hop_size, vec![hz; frames])
    }

    pub fn hop_size(&self) -> usize {
        self.hop_size
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn voiced(&self) -> &[bool] {
        &self.voiced
    }

    pub fn frames(&self) -> usize {
        self.values.len()
    }

    pub fn voiced_count(&self) -> usize {
        self.voiced.iter().filter(|v| **v).count()
    }

    /// Truncates, or pads with unvoiced frames, to exactly `frames`.
    pub fn resized(&self, frames: usize) -> Self {
        let mut values = self.values.clone();
        values.resize(frames, 0.0);
        let voiced = values.iter().map(|&v| v > 0.0).collect();
        Self {
            hop_size: self.hop_size,
            values,
            voiced,
        }
    }

    pub(crate) fn check_below_nyquist(&self, sample_rate: u32) -> Result<()> {
        let nyquist = f64::from(sample_rate) / 2.0;
        match self.values.iter().position(|&v| f64::from(v) >= nyquist) {
            Some(i) => Err(Error::invalid(format!(
                "f0 frame {i} ({} Hz) is at or above Nyquist ({nyquist} Hz)",
                self.values[i]
            ))),
            None => Ok(()),
        }
    }
}

fn check_nonneg(values: &Array2<f32>, what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite() || *v < 0.0) {
        Some(i) => Err(Error::invalid(format!(
            "{what} entry {i} is negative or not finite"
        ))),
        None => Ok(()),
    }
}

/// Per-frame amplitude of each harmonic, shape `frames × k_max`.
/// Column `k - 1` holds harmonic `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicAmplitudes {
    values: Array2<f32>,
}

impl HarmonicAmplitudes {
    pub fn new(values: Array2<f32>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::invalid("harmonic count must be at least 1"));
        }
        check_nonneg(&values, "harmonic amplitude")?;
        Ok(Self { values })
    }

    pub fn zeros(frames: usize, k_max: usize) -> Result<Self> {
        Self::new(Array2::zeros((frames, k_max)))
    }

    /// Every frame gets the same amplitude vector.
    pub fn constant(frames: usize, amps: &[f32]) -> Result<Self> {
        let values = Array2::from_shape_fn((frames, amps.len()), |(_, k)| amps[k]);
        Self::new(values)
    }

    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn k_max(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f32> {
        &self.values
    }

    pub fn scaled(&self, gain: f32) -> Result<Self> {
        Self::new(self.values.mapv(|v| v * gain))
    }
}

/// Magnitude spectrogram driving the noise branch, shape `frames × bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMagnitudeSpectrum {
    values: Array2<f32>,
}

impl NoiseMagnitudeSpectrum {
    pub fn new(values: Array2<f32>) -> Result<Self> {
        check_nonneg(&values, "noise magnitude")?;
        Ok(Self { values })
    }

    pub fn zeros(frames: usize, bins: usize) -> Result<Self> {
        Self::new(Array2::zeros((frames, bins)))
    }

    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn bins(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f32> {
        &self.values
    }
}

/// Starting phase of each harmonic, radians in `[-π, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialPhases {
    values: Vec<f64>,
}

impl InitialPhases {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|p| !(-PI..PI).contains(p)) {
            return Err(Error::invalid(format!(
                "initial phase {i} ({}) outside [-pi, pi)",
                values[i]
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(k_max: usize) -> Self {
        Self {
            values: vec![0.0; k_max],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
