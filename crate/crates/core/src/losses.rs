//! Reconstruction losses and objective metrics. All norms are mean-reduced.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{F0Contour, Waveform};
use crate::spectral::{MelConfig, MelFilterbank};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_dsp: f64,
    pub lambda_mel: f64,
    /// Feature-matching weight; kept for configuration parity, not used here.
    pub lambda_fm: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_dsp: 45.0,
            lambda_mel: 45.0,
            lambda_fm: 2.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_dsp", self.lambda_dsp),
            ("lambda_mel", self.lambda_mel),
            ("lambda_fm", self.lambda_fm),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Phoneme-level and note-level durations, in frames.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DurationPair {
    pub phone: Vec<f64>,
    pub note: Vec<f64>,
}

impl DurationPair {
    pub fn new(phone: Vec<f64>, note: Vec<f64>) -> Result<Self> {
        if let Some(d) = phone
            .iter()
            .chain(&note)
            .find(|d| !(d.is_finite() && **d >= 0.0))
        {
            return Err(Error::invalid(format!(
                "duration {d} is negative or not finite"
            )));
        }
        Ok(Self { phone, note })
    }
}

fn mean_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "spectrogram shapes differ: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

fn mse(a: &[f64], b: &[f64], what: &str) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "{what} lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// Mean absolute log-mel difference between two equal-length waveforms.
pub fn mel_l1(a: &Waveform, b: &Waveform, mel: &MelConfig) -> Result<f64> {
    if a.len() != b.len() || a.sample_rate() != b.sample_rate() {
        return Err(Error::invalid(format!(
            "waveforms differ in shape: {} @ {} Hz vs {} @ {} Hz",
            a.len(),
            a.sample_rate(),
            b.len(),
            b.sample_rate()
        )));
    }
    let fb = MelFilterbank::new(mel)?;
    mean_abs_diff(&fb.log_mel(a)?, &fb.log_mel(b)?)
}

/// `λ_DSP · mean |Mel(y_dsp) - Mel(y)|`.
pub fn dsp_loss(y_dsp: &Waveform, y: &Waveform, mel: &MelConfig, w: &LossWeights) -> Result<f64> {
    w.validate()?;
    Ok(w.lambda_dsp * mel_l1(y_dsp, y, mel)?)
}

/// `λ_Mel · mean |Mel(ŷ) - Mel(y)|`, the mel term of the generator loss.
pub fn mel_loss(y_hat: &Waveform, y: &Waveform, mel: &MelConfig, w: &LossWeights) -> Result<f64> {
    w.validate()?;
    Ok(w.lambda_mel * mel_l1(y_hat, y, mel)?)
}

/// Auxiliary-feature loss: mean squared log-F0 error over the frames marked
/// in `voiced`, plus mean absolute mel error.
pub fn aux_feature_loss(
    lf0_pred: &[f64],
    lf0_true: &[f64],
    voiced: &[bool],
    mel_pred: &Array2<f64>,
    mel_true: &Array2<f64>,
) -> Result<f64> {
    if lf0_pred.len() != lf0_true.len() || lf0_pred.len() != voiced.len() {
        return Err(Error::invalid(format!(
            "log-f0 lengths differ: pred {}, true {}, mask {}",
            lf0_pred.len(),
            lf0_true.len(),
            voiced.len()
        )));
    }
    let (p, t): (Vec<f64>, Vec<f64>) = lf0_pred
        .iter()
        .zip(lf0_true)
        .zip(voiced)
        .filter(|(_, v)| **v)
        .map(|((p, t), _)| (*p, *t))
        .unzip();
    Ok(mse(&p, &t, "log-f0")? + mean_abs_diff(mel_pred, mel_true)?)
}

/// Mean squared phoneme-duration error plus mean squared note-duration error.
pub fn duration_loss(pred: &DurationPair, truth: &DurationPair) -> Result<f64> {
    Ok(mse(&pred.phone, &truth.phone, "phone duration")?
        + mse(&pred.note, &truth.note, "note duration")?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Rmse {
    /// Hz.
    pub rmse: f64,
    pub common_voiced: usize,
    /// Set when no frame is voiced in both contours; `rmse` is then 0.
    pub no_common_voiced: bool,
}

/// RMS f0 error in Hz over frames voiced in both contours.
pub fn f0_rmse(pred: &F0Contour, truth: &F0Contour) -> Result<F0Rmse> {
    if pred.frames() != truth.frames() {
        return Err(Error::invalid(format!(
            "f0 frame counts differ: {} vs {}",
            pred.frames(),
            truth.frames()
        )));
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for i in 0..pred.frames() {
        if pred.voiced()[i] && truth.voiced()[i] {
            let d = f64::from(pred.values()[i]) - f64::from(truth.values()[i]);
            sum += d * d;
            n += 1;
        }
    }
    if n == 0 {
        log::warn!("f0 RMSE: no frame is voiced in both contours");
        return Ok(F0Rmse {
            rmse: 0.0,
            common_voiced: 0,
            no_common_voiced: true,
        });
    }
    Ok(F0Rmse {
        rmse: (sum / n as f64).sqrt(),
        common_voiced: n,
        no_common_voiced: false,
    })
}

/// RMS phoneme-duration error, in the durations' unit (frames).
pub fn duration_rmse(pred: &DurationPair, truth: &DurationPair) -> Result<f64> {
    Ok(mse(&pred.phone, &truth.phone, "phone duration")?.sqrt())
}
