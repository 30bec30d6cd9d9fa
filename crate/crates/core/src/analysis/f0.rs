//! Normalised cross-correlation pitch tracker.
//!
//! For each frame the tracker correlates an integration window of
//! `W = ceil(sr / f0_min)` samples with its lagged copy and normalises by the
//! energies of both segments:
//!
//! ```text
//! r(τ) = Σ_{t<W} s[t]·s[t+τ] / sqrt(Σ s[t]² · Σ s[t+τ]²)
//! ```
//!
//! The chosen lag is the local maximum with the best score
//! `r(τ) + c·log2(τ_max / τ)`, with `r` and `τ` read at the maximum of a
//! windowed-sinc interpolation of the correlation around the peak. The small octave cost `c`
//! settles ties between the true period and its multiples in favour of the
//! shorter lag. Frames whose peak falls below the voicing threshold are
//! unvoiced. The lag only fixes the pitch to a fraction of a sample, so each
//! voiced estimate is then refined from the phase advance of its harmonics
//! over one period, measured under a Blackman window four periods long.
//! Finally a median filter over voiced neighbours removes isolated octave
//! jumps.

use std::f64::consts::{PI, TAU};

use super::config::AnalysisConfig;
use super::harmonics::dtft_centred;
use crate::error::{Error, Result};
use crate::signal::{F0Contour, Waveform};
use crate::spectral::WindowKind;

/// Score bonus per octave of shorter lag.
const OCTAVE_COST: f64 = 0.01;

/// Harmonics used to refine a pitch estimate.
const REFINE_HARMONICS: usize = 30;

/// Largest relative change the refinement may make.
const REFINE_MAX_STEP: f64 = 0.03;

/// Sample index at the centre of analysis frame `m`.
pub(crate) fn frame_center(m: usize, hop: usize) -> isize {
    (m * hop + hop / 2) as isize
}

/// Frames covering `len` samples at `hop`.
pub fn frame_count(len: usize, hop: usize) -> usize {
    len.div_ceil(hop)
}

/// Copies `out.len()` samples starting at `start`, zero outside the signal.
pub(crate) fn segment(x: &[f64], start: isize, out: &mut [f64]) {
    for (t, o) in out.iter_mut().enumerate() {
        let i = start + t as isize;
        *o = if i >= 0 && (i as usize) < x.len() {
            x[i as usize]
        } else {
            0.0
        };
    }
}

/// Slides a span of `len` samples so it lies within a signal of `n`
/// samples where possible. Zero padding at the edges flattens the
/// correlation peaks and lets the octave cost win.
fn inside(start: isize, len: usize, n: usize) -> isize {
    if len >= n {
        return start;
    }
    start.clamp(0, (n - len) as isize)
}

pub fn estimate_f0(x: &Waveform, cfg: &AnalysisConfig) -> Result<F0Contour> {
    let sr = x.sample_rate();
    cfg.validate(sr)?;
    let hop = cfg.hop_size;
    if x.len() < 2 * hop {
        return Err(Error::invalid(format!(
            "signal of {} samples is shorter than two frames of {hop}",
            x.len()
        )));
    }
    let srf = f64::from(sr);
    let lag_min = ((srf / cfg.f0_max).floor() as usize).max(2);
    let lag_max = (srf / cfg.f0_min).ceil() as usize;
    let width = lag_max;
    let lags = Lags {
        min: lag_min,
        max: lag_max,
        lo: lag_min.saturating_sub(1 + SINC_DEPTH).max(1),
        hi: lag_max + 1 + SINC_DEPTH,
    };
    let seg_len = width + lags.hi + 1;

    let frames = frame_count(x.len(), hop);
    let mut seg = vec![0.0; seg_len];
    let mut corr = vec![0.0; lags.hi + 1];
    let mut values = Vec::with_capacity(frames);
    for m in 0..frames {
        let start = inside(
            frame_center(m, hop) - (seg_len / 2) as isize,
            seg_len,
            x.len(),
        );
        segment(x.samples(), start, &mut seg);
        let rough = frame_pitch(&seg, width, &lags, srf, cfg, &mut corr);
        values.push(if rough > 0.0 {
            refine_pitch(x.samples(), frame_center(m, hop), rough, srf)
        } else {
            0.0
        });
    }
    let values = median_voiced(&values, cfg.median_len);
    F0Contour::new(hop, values.into_iter().map(|v| v as f32).collect())
}

/// Searched lags `min..=max`; correlation is computed over `lo..=hi` so the
/// interpolator has support around every candidate.
struct Lags {
    min: usize,
    max: usize,
    lo: usize,
    hi: usize,
}

/// Half-width of the interpolation kernel, in lags.
const SINC_DEPTH: usize = 8;

/// Hann-windowed sinc interpolation of `corr` at fractional lag `tau`.
fn interpolate(corr: &[f64], lags: &Lags, tau: f64) -> f64 {
    let base = tau.floor() as isize;
    let d = SINC_DEPTH as isize;
    let mut acc = 0.0;
    for j in (base - d + 1).max(lags.lo as isize)..=(base + d).min(lags.hi as isize) {
        let u = tau - j as f64;
        let sinc = if u.abs() < 1e-12 {
            1.0
        } else {
            (PI * u).sin() / (PI * u)
        };
        let w = 0.5 + 0.5 * (PI * u / SINC_DEPTH as f64).cos();
        acc += corr[j as usize] * sinc * w;
    }
    acc
}

/// Location and height of the interpolated maximum within one lag of `l`.
fn peak_vertex(corr: &[f64], lags: &Lags, l: usize) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (l as f64 - 1.0, l as f64 + 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (interpolate(corr, lags, c), interpolate(corr, lags, d));
    for _ in 0..40 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = interpolate(corr, lags, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = interpolate(corr, lags, d);
        }
    }
    let tau = 0.5 * (a + b);
    (tau, interpolate(corr, lags, tau).max(corr[l]))
}

fn frame_pitch(
    seg: &[f64],
    width: usize,
    lags: &Lags,
    sr: f64,
    cfg: &AnalysisConfig,
    corr: &mut [f64],
) -> f64 {
    let e0: f64 = seg[..width].iter().map(|v| v * v).sum();
    if e0 <= 0.0 || (e0 / width as f64).sqrt() < cfg.silence_rms {
        return 0.0;
    }
    // energy of the lagged window, updated incrementally
    let mut e_lag: f64 = seg[lags.lo..lags.lo + width].iter().map(|v| v * v).sum();
    for lag in lags.lo..=lags.hi {
        if lag > lags.lo {
            let out = seg[lag - 1];
            let inc = seg[lag - 1 + width];
            e_lag += inc * inc - out * out;
        }
        let num: f64 = seg[..width]
            .iter()
            .zip(&seg[lag..lag + width])
            .map(|(a, b)| a * b)
            .sum();
        let den = (e0 * e_lag.max(0.0)).sqrt();
        corr[lag] = if den > 0.0 { num / den } else { 0.0 };
    }

    let is_peak = |l: usize| corr[l] >= corr[l - 1] && corr[l] > corr[l + 1];
    let peaks: Vec<(f64, f64)> = (lags.min..=lags.max)
        .filter(|&l| is_peak(l))
        .map(|l| peak_vertex(corr, lags, l))
        .collect();
    let best = peaks.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    if best < cfg.voicing_threshold {
        return 0.0;
    }
    let score = |&(tau, h): &(f64, f64)| h + OCTAVE_COST * (lags.max as f64 / tau).log2();
    let Some(&(tau, _)) = peaks.iter().max_by(|a, b| score(a).total_cmp(&score(b))) else {
        return 0.0;
    };
    let f = sr / tau;
    if f < cfg.f0_min || f > cfg.f0_max {
        0.0
    } else {
        f
    }
}

/// Power-weighted mean of `f_k / k`, where `f_k` comes from the phase
/// advance of harmonic `k` between two windows one period apart.
fn refine_pitch(x: &[f64], center: isize, rough: f64, sr: f64) -> f64 {
    let period = (sr / rough).round().max(1.0) as usize;
    let len = 4 * period;
    let window = WindowKind::Blackman.generate(len);
    let start = inside(
        center - ((len + period) / 2) as isize,
        len + period,
        x.len(),
    );
    let mut a = vec![0.0; len];
    let mut b = vec![0.0; len];
    segment(x, start, &mut a);
    segment(x, start + period as isize, &mut b);
    for ((a, b), w) in a.iter_mut().zip(b.iter_mut()).zip(&window) {
        *a *= w;
        *b *= w;
    }
    let d = period as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 1..=REFINE_HARMONICS {
        let nu = k as f64 * rough / sr;
        if nu >= 0.45 {
            break;
        }
        let za = dtft_centred(&a, nu);
        let zb = dtft_centred(&b, nu);
        let dphi = ((zb * za.conj()).arg() - TAU * nu * d + PI).rem_euclid(TAU) - PI;
        let fk = (nu + dphi / (TAU * d)) * sr;
        let w = za.norm_sqr() + zb.norm_sqr();
        num += w * fk / k as f64;
        den += w;
    }
    if den <= 0.0 {
        return rough;
    }
    let refined = num / den;
    if (refined - rough).abs() <= REFINE_MAX_STEP * rough {
        refined
    } else {
        rough
    }
}

/// Median over the voiced values within `len / 2` frames of each voiced
/// frame. Unvoiced frames are left at 0 and do not take part.
pub(crate) fn median_voiced(values: &[f64], len: usize) -> Vec<f64> {
    if len <= 1 {
        return values.to_vec();
    }
    let half = len / 2;
    let mut buf = Vec::with_capacity(len);
    (0..values.len())
        .map(|i| {
            if values[i] <= 0.0 {
                return 0.0;
            }
            buf.clear();
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(values.len() - 1);
            buf.extend(values[lo..=hi].iter().copied().filter(|v| *v > 0.0));
            buf.sort_by(f64::total_cmp);
            let n = buf.len();
            if n % 2 == 1 {
                buf[n / 2]
            } else {
                0.5 * (buf[n / 2 - 1] + buf[n / 2])
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn sine(hz: f64, secs: f64, sr: u32) -> Waveform {
        let n = (secs * f64::from(sr)) as usize;
        Waveform::new(
            (0..n)
                .map(|i| 0.5 * (TAU * hz * i as f64 / f64::from(sr)).sin())
                .collect(),
            sr,
        )
        .unwrap()
    }

    #[test]
    fn pure_sine_220() {
        let x = sine(220.0, 1.0, 22050);
        let f0 = estimate_f0(&x, &AnalysisConfig::new(256)).unwrap();
        assert_eq!(f0.frames(), frame_count(22050, 256));
        assert!(f0.voiced_count() > f0.frames() * 9 / 10);
        for (&v, &on) in f0.values().iter().zip(f0.voiced()) {
            if on {
                assert!((v - 220.0).abs() < 1.0, "{v}");
            }
        }
    }

    #[test]
    fn silence_is_unvoiced() {
        let x = Waveform::silence(44100, 44100).unwrap();
        let f0 = estimate_f0(&x, &AnalysisConfig::new(512)).unwrap();
        assert_eq!(f0.voiced_count(), 0);
        assert!(f0.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn two_plateaus() {
        let sr = 22050u32;
        let half = sr as usize / 2;
        let mut phase = 0.0;
        let samples: Vec<f64> = (0..2 * half)
            .map(|i| {
                let hz = if i < half { 220.0 } else { 330.0 };
                phase += TAU * hz / f64::from(sr);
                0.5 * phase.sin()
            })
            .collect();
        let x = Waveform::new(samples, sr).unwrap();
        let f0 = estimate_f0(&x, &AnalysisConfig::new(256)).unwrap();
        let v = f0.values();
        let off = |target: f32| v.iter().filter(|&&f| (f - target).abs() > 2.0).count();
        // frames not within 2 Hz of either plateau: the transition
        let transition = v
            .iter()
            .filter(|&&f| (f - 220.0).abs() > 2.0 && (f - 330.0).abs() > 2.0)
            .count();
        assert!(transition < 5, "transition of {transition} frames");
        assert!(off(220.0) > 30 && off(330.0) > 30);
        let boundary = half / 256;
        assert!(v[..boundary - 3].iter().all(|f| (f - 220.0).abs() < 2.0));
        assert!(v[boundary + 3..].iter().all(|f| (f - 330.0).abs() < 2.0));
    }

    #[test]
    fn too_short_rejected() {
        let x = Waveform::silence(300, 22050).unwrap();
        assert!(estimate_f0(&x, &AnalysisConfig::new(256)).is_err());
    }

    #[test]
    fn median_ignores_unvoiced_and_octave_jumps() {
        let v = [220.0, 220.0, 440.0, 220.0, 0.0, 220.0];
        let m = median_voiced(&v, 5);
        assert_eq!(m, vec![220.0, 220.0, 220.0, 220.0, 0.0, 220.0]);
    }
}
