use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::config::SpectralConfig;
use crate::error::{Error, Result};
use crate::signal::Waveform;

/// Forward/inverse real transform of one fixed size, built on a complex FFT.
pub(crate) struct RealDft {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
}

impl RealDft {
    pub(crate) fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
            buf: vec![Complex64::default(); size],
        }
    }

    /// Unnormalised DFT, non-negative frequencies only.
    pub(crate) fn forward(&mut self, frame: &[f64], out: &mut [Complex64]) {
        debug_assert_eq!(frame.len(), self.size);
        for (b, &x) in self.buf.iter_mut().zip(frame) {
            *b = Complex64::new(x, 0.0);
        }
        self.forward.process(&mut self.buf);
        out.copy_from_slice(&self.buf[..self.size / 2 + 1]);
    }

    /// Inverse of [`forward`](Self::forward), scaled by `1/size`. The
    /// spectrum is given Hermitian symmetry; only the real parts of the DC
    /// and Nyquist bins take part.
    pub(crate) fn inverse(&mut self, bins: &[Complex64], out: &mut [f64]) {
        let n = self.size;
        let half = n / 2;
        debug_assert_eq!(bins.len(), half + 1);
        self.buf[..=half].copy_from_slice(bins);
        for k in 1..half {
            self.buf[n - k] = bins[k].conj();
        }
        self.inverse.process(&mut self.buf);
        let scale = 1.0 / n as f64;
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.re * scale;
        }
    }
}

/// Short-time Fourier transform, shape `frames × (fft_size / 2 + 1)`.
pub fn stft(x: &Waveform, cfg: &SpectralConfig) -> Result<Array2<Complex64>> {
    stft_samples(x.samples(), cfg)
}

pub(crate) fn stft_samples(x: &[f64], cfg: &SpectralConfig) -> Result<Array2<Complex64>> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(Error::invalid("stft of an empty signal"));
    }
    let n = cfg.fft_size;
    let frames = cfg.frame_count(x.len());
    let window = cfg.frame_window();
    let mut dft = RealDft::new(n);
    let mut out = Array2::<Complex64>::zeros((frames, cfg.bins()));
    let mut frame = vec![0.0; n];
    for m in 0..frames {
        let start = cfg.frame_start(m);
        for (t, f) in frame.iter_mut().enumerate() {
            let idx = start + t as isize;
            *f = if idx >= 0 && (idx as usize) < x.len() {
                x[idx as usize] * window[t]
            } else {
                0.0
            };
        }
        let row = out.row_mut(m);
        dft.forward(&frame, row.into_slice().expect("row-major"));
    }
    Ok(out)
}

pub fn magnitude(spec: &Array2<Complex64>) -> Array2<f64> {
    spec.mapv(|c| c.norm())
}

/// Inverse STFT by weighted overlap-add: each inverse frame is multiplied
/// by the window and the sum is divided by the overlap-added squared window.
/// Output is exactly `out_len` samples.
pub fn istft(spec: &Array2<Complex64>, cfg: &SpectralConfig, out_len: usize) -> Result<Waveform> {
    cfg.validate_cola()?;
    if spec.ncols() != cfg.bins() {
        return Err(Error::invalid(format!(
            "spectrogram has {} bins, config expects {}",
            spec.ncols(),
            cfg.bins()
        )));
    }
    let (acc, wsum) = overlap_add(spec, cfg, out_len);
    let floor = wsum_floor(cfg);
    let samples = acc
        .iter()
        .zip(&wsum)
        .map(|(a, w)| if *w > floor { a / w } else { 0.0 })
        .collect();
    Waveform::new(samples, cfg.sample_rate)
}

/// Positions where the overlap-added squared window falls below this are
/// treated as uncovered.
pub(crate) fn wsum_floor(cfg: &SpectralConfig) -> f64 {
    1e-10 * cfg.overlap_gain()
}

/// Windowed overlap-add of inverse frames, returning the unnormalised sum and
/// the overlap-added squared window per output sample.
pub(crate) fn overlap_add(
    spec: &Array2<Complex64>,
    cfg: &SpectralConfig,
    out_len: usize,
) -> (Vec<f64>, Vec<f64>) {
    let n = cfg.fft_size;
    let window = cfg.frame_window();
    let mut dft = RealDft::new(n);
    let mut acc = vec![0.0; out_len];
    let mut wsum = vec![0.0; out_len];
    let mut frame = vec![0.0; n];
    for (m, row) in spec.rows().into_iter().enumerate() {
        let start = cfg.frame_start(m);
        if start >= out_len as isize {
            break;
        }
        let bins = row.as_slice().expect("row-major");
        dft.inverse(bins, &mut frame);
        for t in 0..n {
            let idx = start + t as isize;
            if idx < 0 || idx as usize >= out_len {
                continue;
            }
            let i = idx as usize;
            acc[i] += frame[t] * window[t];
            wsum[i] += window[t] * window[t];
        }
    }
    (acc, wsum)
}
