use std::f64::consts::TAU;

use super::interp::interpolate_to_samples;
use super::phase::cumulative_cycles_wrapped;
use super::types::{F0Contour, HarmonicAmplitudes, InitialPhases, Waveform};
use crate::error::{Error, Result};

/// Harmonic bank over the full frame span, `frames * hop` samples.
///
/// See [`harmonic_synthesize_len`].
pub fn harmonic_synthesize(
    f0: &F0Contour,
    amps: &HarmonicAmplitudes,
    sample_rate: u32,
    phases: &InitialPhases,
) -> Result<Waveform> {
    let len = f0.frames() * f0.hop_size();
    harmonic_synthesize_len(f0, amps, sample_rate, phases, len)
}

/// Sum of `K` sinusoids at integer multiples of the interpolated f0.
///
/// Per sample `n`, harmonic `k` contributes `H_k(n) · sin(2π·k·c(n) + φ0_k)`
/// where `c(n)` is the inclusive running sum of `f0 / sample_rate`. A
/// harmonic whose frequency `k·f0(n)` reaches Nyquist contributes nothing at
/// that sample. Amplitudes are multiplied by an interpolated voicing mask, so
/// unvoiced frames are silent apart from the one-hop ramps next to voiced
/// frames. Across unvoiced gaps the pitch track holds the nearest voiced
/// value rather than gliding through 0 Hz.
pub fn harmonic_synthesize_len(
    f0: &F0Contour,
    amps: &HarmonicAmplitudes,
    sample_rate: u32,
    phases: &InitialPhases,
    out_len: usize,
) -> Result<Waveform> {
    if f0.frames() != amps.frames() {
        return Err(Error::invalid(format!(
            "f0 has {} frames, amplitudes have {}",
            f0.frames(),
            amps.frames()
        )));
    }
    if phases.len() != amps.k_max() {
        return Err(Error::invalid(format!(
            "{} initial phases for {} harmonics",
            phases.len(),
            amps.k_max()
        )));
    }
    if f0.frames() == 0 {
        return Err(Error::invalid("cannot synthesize zero frames"));
    }
    if sample_rate == 0 {
        return Err(Error::invalid("sample rate must be positive"));
    }
    f0.check_below_nyquist(sample_rate)?;

    let hop = f0.hop_size();
    let mut out = vec![0.0; out_len];
    let Some((f0_n, cycles)) = pitch_track(f0, sample_rate, out_len)? else {
        return Waveform::new(out, sample_rate);
    };
    let mask: Vec<f64> = f0
        .voiced()
        .iter()
        .map(|&v| if v { 1.0 } else { 0.0 })
        .collect();
    let mask_n = interpolate_to_samples(&mask, hop, out_len)?;
    let nyquist = f64::from(sample_rate) / 2.0;

    let mut column = vec![0.0; f0.frames()];
    for (k_idx, phi0) in phases.values().iter().enumerate() {
        let k = (k_idx + 1) as f64;
        for (c, v) in column.iter_mut().zip(amps.values().column(k_idx)) {
            *c = f64::from(*v);
        }
        if column.iter().all(|v| *v == 0.0) {
            continue;
        }
        let h_n = interpolate_to_samples(&column, hop, out_len)?;
        for n in 0..out_len {
            let a = h_n[n] * mask_n[n];
            if a == 0.0 || k * f0_n[n] >= nyquist {
                continue;
            }
            let frac = (k * cycles[n]).fract();
            out[n] += a * (TAU * frac + phi0).sin();
        }
    }
    Waveform::new(out, sample_rate)
}

/// Per-sample f0 and wrapped cycle count `c(n)` as used by the bank, so
/// that harmonic `k` has phase `2π·frac(k·c(n)) + φ0_k`. `None` if nothing
/// is voiced.
pub(crate) fn pitch_track(
    f0: &F0Contour,
    sample_rate: u32,
    out_len: usize,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let Some(track) = hold_voiced(f0) else {
        return Ok(None);
    };
    let f0_n = interpolate_to_samples(&track, f0.hop_size(), out_len)?;
    let cycles = cumulative_cycles_wrapped(&f0_n, sample_rate);
    Ok(Some((f0_n, cycles)))
}

/// Pitch track with unvoiced frames filled from the nearest voiced frame
/// (earlier one on ties). `None` if nothing is voiced.
fn hold_voiced(f0: &F0Contour) -> Option<Vec<f64>> {
    let voiced: Vec<usize> = (0..f0.frames()).filter(|&i| f0.voiced()[i]).collect();
    if voiced.is_empty() {
        return None;
    }
    let vals = f0.values();
    let mut out = Vec::with_capacity(f0.frames());
    let mut next = 0;
    for i in 0..f0.frames() {
        while next < voiced.len() && voiced[next] < i {
            next += 1;
        }
        let src = match (next.checked_sub(1).map(|p| voiced[p]), voiced.get(next)) {
            (_, Some(&a)) if a == i => a,
            (Some(b), Some(&a)) => {
                if i - b <= a - i {
                    b
                } else {
                    a
                }
            }
            (Some(b), None) => b,
            (None, Some(&a)) => a,
            (None, None) => unreachable!(),
        };
        out.push(f64::from(vals[src]));
    }
    Some(out)
}
