use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::DEFAULT_K_MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Pitch search range, Hz.
    pub f0_min: f64,
    pub f0_max: f64,
    /// Frame hop in samples; must equal the spectral hop.
    pub hop_size: usize,
    pub k_max: usize,
    /// Peak search half-width around `k·f0`, in FFT bins.
    pub peak_halfwidth_bins: usize,
    /// Multiplicative amplitude refinement passes (0 disables).
    pub refine_iters: usize,
    /// Minimum normalised autocorrelation peak for a voiced frame.
    pub voicing_threshold: f64,
    /// Median filter length over voiced f0 values, frames. 1 disables.
    pub median_len: usize,
    /// Frames quieter than this RMS are unvoiced without further analysis.
    pub silence_rms: f64,
}

impl AnalysisConfig {
    pub fn new(hop_size: usize) -> Self {
        Self {
            f0_min: 65.0,
            f0_max: 1100.0,
            hop_size,
            k_max: DEFAULT_K_MAX,
            peak_halfwidth_bins: 2,
            refine_iters: 0,
            voicing_threshold: 0.3,
            median_len: 5,
            silence_rms: 1e-4,
        }
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = f64::from(sample_rate) / 2.0;
        if !(0.0 < self.f0_min && self.f0_min < self.f0_max && self.f0_max < nyquist) {
            return Err(Error::invalid(format!(
                "need 0 < f0_min ({}) < f0_max ({}) < nyquist ({nyquist})",
                self.f0_min, self.f0_max
            )));
        }
        if self.hop_size == 0 {
            return Err(Error::invalid("analysis hop must be positive"));
        }
        if self.k_max == 0 {
            return Err(Error::invalid("k_max must be at least 1"));
        }
        if self.median_len == 0 {
            return Err(Error::invalid("median length must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.voicing_threshold) {
            return Err(Error::invalid("voicing threshold must be in [0, 1]"));
        }
        if !(self.silence_rms >= 0.0 && self.silence_rms.is_finite()) {
            return Err(Error::invalid("silence RMS must be non-negative"));
        }
        Ok(())
    }
}
