use std::f64::consts::{PI, TAU};

use ndarray::Array2;
use rustfft::num_complex::Complex64;

use super::config::AnalysisConfig;
use super::f0::{frame_center, segment};
use crate::error::{Error, Result};
use crate::signal::{
    harmonic_synthesize_len, interpolate_to_samples, pitch_track, F0Contour, HarmonicAmplitudes,
    InitialPhases, Waveform,
};
use crate::spectral::{mel_spectrogram, MelConfig, RealDft, SpectralConfig};

/// One measured sinusoid, relative to its frame centre:
/// `amp · cos(2π·freq·(n - centre)/sr + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Partial {
    pub freq: f64,
    pub amp: f64,
    pub phase: f64,
}

/// Partials per frame; `None` entries are unmeasured (unvoiced or above
/// Nyquist) and count as zero amplitude.
#[derive(Debug, Clone)]
pub struct PartialTrack {
    pub hop_size: usize,
    pub win_size: usize,
    pub partials: Array2<Option<Partial>>,
}

impl PartialTrack {
    pub fn amplitudes(&self) -> Result<HarmonicAmplitudes> {
        HarmonicAmplitudes::new(self.partials.mapv(|p| p.map_or(0.0, |p| p.amp as f32)))
    }
}

fn check_hops(f0: &F0Contour, cfg: &AnalysisConfig, spectral: &SpectralConfig) -> Result<()> {
    if f0.hop_size() != spectral.hop_size || cfg.hop_size != spectral.hop_size {
        return Err(Error::invalid(format!(
            "hop mismatch: f0 {}, analysis {}, spectral {}",
            f0.hop_size(),
            cfg.hop_size,
            spectral.hop_size
        )));
    }
    Ok(())
}

/// Measures amplitude and phase of every harmonic below Nyquist in each
/// voiced frame.
///
/// The frame is `win_size` samples centred on the frame anchor (slid inside
/// the signal near the ends), weighted by the spectral window. Harmonic `k`
/// is located as the largest FFT bin within `±peak_halfwidth_bins` of
/// `k·f0`, refined by a parabola through the log magnitudes of its
/// neighbours, then by the phase advance to a window half a hop away, and
/// measured by evaluating the DTFT at the refined frequency.
///
/// Each reading also holds sidelobe leakage from the other partials and
/// from the negative-frequency images. For the cosine-sum windows that
/// leakage has a closed form, so the readings of a frame are unmixed
/// jointly before taking `2|c|` as the amplitude. Frames shorter than the
/// window skip that step and use `2|X| / Σw` over the samples inside the
/// signal. Either way a unit sinusoid reads as 1.
pub fn estimate_partials(
    x: &Waveform,
    f0: &F0Contour,
    cfg: &AnalysisConfig,
    spectral: &SpectralConfig,
) -> Result<PartialTrack> {
    cfg.validate(x.sample_rate())?;
    spectral.validate()?;
    check_hops(f0, cfg, spectral)?;
    if x.sample_rate() != spectral.sample_rate {
        return Err(Error::invalid(format!(
            "waveform is {} Hz, spectral config is {} Hz",
            x.sample_rate(),
            spectral.sample_rate
        )));
    }
    let sr = f64::from(x.sample_rate());
    let nyquist = sr / 2.0;
    let len = spectral.win_size;
    let half = (len / 2) as isize;
    let window = spectral.window.generate(len);
    let bin_hz = spectral.bin_hz();
    let bins = spectral.bins();
    let hw = cfg.peak_halfwidth_bins as isize;

    let mut dft = RealDft::new(spectral.fft_size);
    let mut frame = vec![0.0; len];
    let mut padded = vec![0.0; spectral.fft_size];
    let mut spec = vec![Complex64::default(); bins];
    let mut logmag = vec![0.0; bins];
    let mut lagged = vec![0.0; len];
    let lag = (f0.hop_size() / 2).max(1) as isize;
    let mut found: Vec<(usize, f64, Complex64)> = Vec::with_capacity(cfg.k_max);
    let mut partials = Array2::from_elem((f0.frames(), cfg.k_max), None);
    let mut slid = vec![0isize; f0.frames()];

    for m in 0..f0.frames() {
        if !f0.voiced()[m] {
            continue;
        }
        let hz = f64::from(f0.values()[m]);
        let nominal = frame_center(m, f0.hop_size()) - half;
        // Near the ends, slide the window inside the signal rather than
        // zero-padding it; a truncated window leaks into every bin.
        let start = if x.len() >= len {
            nominal.clamp(0, (x.len() - len) as isize)
        } else {
            nominal
        };
        slid[m] = nominal - start;
        let shift = (nominal - start) as f64 / sr;
        segment(x.samples(), start, &mut frame);
        let gain: f64 = window
            .iter()
            .enumerate()
            .filter(|(t, _)| {
                let i = start + *t as isize;
                i >= 0 && (i as usize) < x.len()
            })
            .map(|(_, w)| w)
            .sum();
        if gain <= 0.0 {
            continue;
        }
        for (p, (s, w)) in padded.iter_mut().zip(frame.iter().zip(&window)) {
            *p = s * w;
        }
        // A second window a short lag away; the phase advance between the
        // two gives each partial's frequency without interpolation bias.
        let lag_start = if start + lag + len as isize <= x.len() as isize {
            Some(start + lag)
        } else if start - lag >= 0 && x.len() >= len {
            Some(start - lag)
        } else {
            None
        };
        if let Some(ls) = lag_start {
            segment(x.samples(), ls, &mut lagged);
            for (v, w) in lagged.iter_mut().zip(&window) {
                *v *= w;
            }
        }
        dft.forward(&padded, &mut spec);
        for (l, c) in logmag.iter_mut().zip(&spec) {
            *l = (c.norm() + 1e-300).ln();
        }

        found.clear();
        for k in 1..=cfg.k_max {
            let target = k as f64 * hz;
            if target >= nyquist {
                break;
            }
            let centre = (target / bin_hz).round() as isize;
            let lo = (centre - hw).max(1);
            let hi = (centre + hw).min(bins as isize - 2);
            if lo > hi {
                continue;
            }
            let peak = (lo..=hi)
                .max_by(|&a, &b| logmag[a as usize].total_cmp(&logmag[b as usize]))
                .expect("non-empty range") as usize;
            let (a, b, c) = (logmag[peak - 1], logmag[peak], logmag[peak + 1]);
            let denom = a - 2.0 * b + c;
            let delta = if denom < 0.0 {
                (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            let mut freq = ((peak as f64 + delta) * bin_hz).min(nyquist);
            if let Some(ls) = lag_start {
                let d = (ls - start) as f64;
                let nu = freq / sr;
                let z0 = dtft_centred(&padded[..len], nu);
                let z1 = dtft_centred(&lagged, nu);
                let dphi = wrap(z1.arg() - z0.arg() - TAU * nu * d);
                let refined = (nu + dphi / (TAU * d)) * sr;
                // a larger jump means the bin holds leakage, not a partial
                if (refined - freq).abs() <= 0.5 * bin_hz {
                    freq = refined.clamp(0.0, nyquist);
                }
            }
            found.push((k - 1, freq / sr, dtft_centred(&padded[..len], freq / sr)));
        }
        // Amplitudes relative to the full window sum; the leakage model only
        // holds when the whole window lies inside the signal.
        let amps = if x.len() >= len {
            unmix(&mut found, spectral.window.cosine_terms(), len)
        } else {
            found.iter().map(|(_, _, z)| z / gain).collect()
        };
        for ((k, nu, _), c) in found.drain(..).zip(amps) {
            partials[[m, k]] = Some(Partial {
                freq: nu * sr,
                amp: 2.0 * c.norm(),
                phase: wrap(c.arg() + TAU * nu * sr * shift),
            });
        }
    }
    extrapolate_slid(&mut partials, &slid, f0.hop_size());
    Ok(PartialTrack {
        hop_size: f0.hop_size(),
        win_size: len,
        partials,
    })
}

/// A slid window measures amplitude at its own centre, `slid[m]` samples
/// away from the frame centre. Carries each such amplitude to the frame
/// centre along the slope of the two nearest frames measured in place.
fn extrapolate_slid(partials: &mut Array2<Option<Partial>>, slid: &[isize], hop: usize) {
    let frames = slid.len();
    for m in 0..frames {
        if slid[m] == 0 {
            continue;
        }
        // the window moved towards the interior; look there
        let inward: Box<dyn Iterator<Item = usize>> = if slid[m] < 0 {
            Box::new(m + 1..frames)
        } else {
            Box::new((0..m).rev())
        };
        let near: Vec<usize> = inward.filter(|&i| slid[i] == 0).take(2).collect();
        let [a, b] = near[..] else {
            continue;
        };
        for k in 0..partials.ncols() {
            let (Some(pa), Some(pb)) = (partials[[a, k]], partials[[b, k]]) else {
                continue;
            };
            let slope = (pb.amp - pa.amp) / ((b as f64 - a as f64) * hop as f64);
            if let Some(p) = partials[[m, k]].as_mut() {
                p.amp = (p.amp + slope * slid[m] as f64).max(0.0);
            }
        }
    }
}

/// `Σ_{t<L} e^{-i2π·ν·(t - c)}` with `c = ⌊L/2⌋`, as in [`dtft_centred`].
fn dirichlet(nu: f64, len: usize) -> Complex64 {
    let l = len as f64;
    let c = (len / 2) as f64;
    let s = (PI * nu).sin();
    let ratio = if s.abs() < 1e-12 {
        l * (PI * nu * l).cos() / (PI * nu).cos()
    } else {
        (PI * nu * l).sin() / s
    };
    Complex64::from_polar(ratio, TAU * nu * c - PI * nu * (l - 1.0))
}

/// Centred DTFT of a cosine-sum window of length `len`.
fn window_transform(terms: &[f64], len: usize, nu: f64) -> Complex64 {
    let l = len as f64;
    let c = (len / 2) as f64;
    terms
        .iter()
        .enumerate()
        .map(|(j, a)| {
            if j == 0 {
                return dirichlet(nu, len) * *a;
            }
            let off = j as f64 / l;
            let rot = Complex64::from_polar(1.0, TAU * off * c);
            (dirichlet(nu - off, len) * rot + dirichlet(nu + off, len) * rot.conj()) * (0.5 * a)
        })
        .sum()
}

/// Neighbours on each side whose leakage is removed.
const UNMIX_SPAN: usize = 8;

/// Turns raw DTFT readings `z_a = X(ν_a)` into complex amplitudes `c_a`
/// (`x ≈ Σ c_a e^{iωt} + conj`) by removing the window leakage of nearby
/// partials and of every partial's negative-frequency image.
///
/// Readings closer than one bin to a stronger one are dropped, since the
/// two cannot be told apart.
fn unmix(found: &mut Vec<(usize, f64, Complex64)>, terms: &[f64], len: usize) -> Vec<Complex64> {
    let bin = 1.0 / len as f64;
    let mut i = 1;
    while i < found.len() {
        if found[i].1 - found[i - 1].1 < bin {
            let weaker = if found[i].2.norm() < found[i - 1].2.norm() {
                i
            } else {
                i - 1
            };
            found.remove(weaker);
        } else {
            i += 1;
        }
    }
    let n = found.len();
    let w0 = window_transform(terms, len, 0.0);
    let coupling: Vec<Vec<(usize, Complex64, Complex64)>> = (0..n)
        .map(|a| {
            let lo = a.saturating_sub(UNMIX_SPAN);
            let hi = (a + UNMIX_SPAN + 1).min(n);
            (lo..hi)
                .map(|b| {
                    let same = if a == b {
                        Complex64::default()
                    } else {
                        window_transform(terms, len, found[a].1 - found[b].1)
                    };
                    let image = window_transform(terms, len, found[a].1 + found[b].1);
                    (b, same, image)
                })
                .collect()
        })
        .collect();
    let mut c: Vec<Complex64> = found.iter().map(|(_, _, z)| z / w0).collect();
    for _ in 0..6 {
        for a in 0..n {
            let mut r = found[a].2;
            for &(b, same, image) in &coupling[a] {
                r -= same * c[b] + image * c[b].conj();
            }
            c[a] = r / w0;
        }
    }
    c
}

/// Into `[-π, π)`.
fn wrap(p: f64) -> f64 {
    let w = (p + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// `Σ_t s[t]·e^{-i2π·ν·(t - L/2)}` for normalised frequency `ν`, evaluated
/// with a rotating phasor.
pub(super) fn dtft_centred(s: &[f64], nu: f64) -> Complex64 {
    let len = s.len();
    let step = Complex64::from_polar(1.0, -TAU * nu);
    let mut rot = Complex64::from_polar(1.0, TAU * nu * (len / 2) as f64);
    let mut acc = Complex64::default();
    for (t, &v) in s.iter().enumerate() {
        acc += rot * v;
        rot *= step;
        // renormalise occasionally to keep |rot| = 1
        if t % 256 == 255 {
            rot /= rot.norm();
        }
    }
    acc
}

/// Phase-locked reconstruction of the measured partials.
///
/// Each frame's sinusoids are weighted by the analysis window around the
/// frame centre and the frames are averaged with the overlap-added window
/// as normaliser. Amplitudes are interpolated between frame centres the
/// same way the harmonic bank does it, so only frequency and phase come
/// from each frame. The result follows the phase of `x`, so `x - part` is
/// a usable residual.
pub fn reconstruct_partials(
    track: &PartialTrack,
    sample_rate: u32,
    out_len: usize,
    spectral: &SpectralConfig,
) -> Result<Waveform> {
    let sr = f64::from(sample_rate);
    let len = track.win_size;
    let half = (len / 2) as isize;
    let window = spectral.window.generate(len);
    let mut envelopes = Vec::with_capacity(track.partials.ncols());
    for column in track.partials.columns() {
        let amps: Vec<f64> = column.iter().map(|p| p.map_or(0.0, |p| p.amp)).collect();
        envelopes.push(if amps.iter().any(|a| *a > 0.0) {
            interpolate_to_samples(&amps, track.hop_size, out_len)?
        } else {
            Vec::new()
        });
    }
    let mut acc = vec![0.0; out_len];
    let mut wsum = vec![0.0; out_len];
    for (m, row) in track.partials.rows().into_iter().enumerate() {
        let start = frame_center(m, track.hop_size) - half;
        let active: Vec<(usize, Partial)> = row
            .iter()
            .enumerate()
            .filter_map(|(k, p)| p.filter(|p| p.amp > 0.0).map(|p| (k, p)))
            .collect();
        for t in 0..len {
            let i = start + t as isize;
            if i < 0 || i as usize >= out_len {
                continue;
            }
            let i = i as usize;
            let w = window[t];
            wsum[i] += w;
            if w == 0.0 || active.is_empty() {
                continue;
            }
            let rel = (t as isize - half) as f64 / sr;
            let s: f64 = active
                .iter()
                .map(|(k, p)| envelopes[*k][i] * (TAU * p.freq * rel + p.phase).cos())
                .sum();
            acc[i] += w * s;
        }
    }
    let samples = acc
        .iter()
        .zip(&wsum)
        .map(|(a, w)| if *w > 1e-9 { a / w } else { 0.0 })
        .collect();
    Waveform::new(samples, sample_rate)
}

/// Starting phases that make the harmonic bank line up with the measured
/// partials.
///
/// Relative phases `φ_k - k·φ_1` do not change along the bank's shared pitch
/// track, so they are averaged over all voiced frames (weighted by
/// `A_1·A_k`) and anchored on the frame where the fundamental is strongest.
/// Harmonics never measured together with the fundamental get 0.
pub fn estimate_initial_phases(
    track: &PartialTrack,
    f0: &F0Contour,
    sample_rate: u32,
    out_len: usize,
) -> Result<InitialPhases> {
    let k_max = track.partials.ncols();
    let Some((_, cycles)) = pitch_track(f0, sample_rate, out_len)? else {
        return Ok(InitialPhases::zeros(k_max));
    };
    // sine phase at the frame centre
    let at = |p: &Partial| p.phase + PI / 2.0;
    let mut rel = vec![Complex64::default(); k_max];
    let mut anchor: Option<(f64, f64)> = None;
    for (m, row) in track.partials.rows().into_iter().enumerate() {
        let n = frame_center(m, track.hop_size) as usize;
        if n >= out_len || !f0.voiced().get(m).copied().unwrap_or(false) {
            continue;
        }
        let Some(p1) = row[0].filter(|p| p.amp > 0.0) else {
            continue;
        };
        if anchor.is_none_or(|(a, _)| p1.amp > a) {
            anchor = Some((p1.amp, wrap(at(&p1) - TAU * cycles[n])));
        }
        for (k, p) in row.iter().enumerate() {
            if let Some(p) = p {
                let r = at(p) - (k + 1) as f64 * at(&p1);
                rel[k] += Complex64::from_polar(p1.amp * p.amp, r);
            }
        }
    }
    let Some((_, phi1)) = anchor else {
        return Ok(InitialPhases::zeros(k_max));
    };
    InitialPhases::new(
        rel.iter()
            .enumerate()
            .map(|(k, r)| {
                if r.norm() == 0.0 {
                    0.0
                } else {
                    wrap(r.arg() + (k + 1) as f64 * phi1)
                }
            })
            .collect(),
    )
}

/// Per-harmonic amplitudes `H_k` for each frame of `f0`.
///
/// Unvoiced frames and harmonics at or above Nyquist are 0. With
/// `refine_iters > 0` the estimate is corrected multiplicatively: the
/// current amplitudes are resynthesised, re-measured, and each entry is
/// scaled by measured-in-`x` over measured-in-resynthesis (clamped to
/// [0.5, 2]). A pass is kept only if it lowers the mel L1 distance between
/// the harmonic resynthesis and `x`.
pub fn estimate_harmonics(
    x: &Waveform,
    f0: &F0Contour,
    cfg: &AnalysisConfig,
    spectral: &SpectralConfig,
) -> Result<HarmonicAmplitudes> {
    let track = estimate_partials(x, f0, cfg, spectral)?;
    let mut amps = track.amplitudes()?;
    if cfg.refine_iters == 0 {
        return Ok(amps);
    }

    let mel = MelConfig::from_spectral(*spectral);
    let target = mel_spectrogram(x, &mel)?;
    let phases = InitialPhases::zeros(cfg.k_max);
    let resynth =
        |a: &HarmonicAmplitudes| harmonic_synthesize_len(f0, a, x.sample_rate(), &phases, x.len());
    let score = |y: &Waveform| -> Result<f64> {
        let m = mel_spectrogram(y, &mel)?;
        Ok((&m - &target).mapv(f64::abs).mean().unwrap_or(0.0))
    };

    let mut current = resynth(&amps)?;
    let mut best = score(&current)?;
    for _ in 0..cfg.refine_iters {
        let measured = estimate_partials(&current, f0, cfg, spectral)?;
        let mut next = amps.values().clone();
        for ((h, want), got) in next
            .iter_mut()
            .zip(track.partials.iter())
            .zip(measured.partials.iter())
        {
            if let (Some(want), Some(got)) = (want, got) {
                if got.amp > 1e-9 && *h > 0.0 {
                    *h *= (want.amp / got.amp).clamp(0.5, 2.0) as f32;
                }
            }
        }
        let candidate = HarmonicAmplitudes::new(next)?;
        let y = resynth(&candidate)?;
        let s = score(&y)?;
        if s >= best {
            break;
        }
        log::debug!("harmonic refinement: mel L1 {best:.5} -> {s:.5}");
        best = s;
        amps = candidate;
        current = y;
    }
    Ok(amps)
}
