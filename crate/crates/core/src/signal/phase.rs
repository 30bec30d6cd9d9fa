use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// Drops whole cycles while keeping the carried error term.
    fn wrap(&mut self) {
        let whole = self.sum.floor();
        if whole != 0.0 {
            self.sum -= whole;
        }
    }
}

fn check_frequencies(f: &[f64]) -> Result<()> {
    match f.iter().position(|v| !v.is_finite() || *v < 0.0) {
        Some(i) => Err(Error::invalid(format!(
            "frequency at sample {i} is negative or not finite ({})",
            f[i]
        ))),
        None => Ok(()),
    }
}

/// Running phase `2π · Σ_{m=0..=n} f(m) / sample_rate + phi0`.
///
/// The sum is inclusive: sample `n` already advances by its own frequency.
/// Phase is returned unwrapped.
pub fn cumulative_phase(f: &[f64], sample_rate: u32, phi0: f64) -> Result<Vec<f64>> {
    if sample_rate == 0 {
        return Err(Error::invalid("sample rate must be positive"));
    }
    check_frequencies(f)?;
    let sr = f64::from(sample_rate);
    let mut acc = CompensatedSum::default();
    Ok(f.iter()
        .map(|&hz| {
            acc.add(hz / sr);
            TAU * acc.value() + phi0
        })
        .collect())
}

/// Same inclusive sum as [`cumulative_phase`] in cycles, reduced to `[0, 1)`.
///
/// Harmonic `k` of the bank has phase `2π · frac(k · c[n])`, which stays
/// accurate for long signals where the unwrapped phase would not.
pub(crate) fn cumulative_cycles_wrapped(f: &[f64], sample_rate: u32) -> Vec<f64> {
    let sr = f64::from(sample_rate);
    let mut acc = CompensatedSum::default();
    f.iter()
        .map(|&hz| {
            acc.add(hz / sr);
            acc.wrap();
            let c = acc.value();
            c - c.floor()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_frequency_closed_form() {
        let f = vec![441.0; 200];
        let p = cumulative_phase(&f, 44100, 0.0).unwrap();
        // inclusive sum: sample 100 has accumulated 101 increments of 0.01 cycles
        assert!((p[100] - TAU * 441.0 * 101.0 / 44100.0).abs() < 1e-12);
        assert!((p[100] - TAU * 1.01).abs() < 1e-12);
    }

    #[test]
    fn zero_frequency_holds_initial_phase() {
        let p = cumulative_phase(&[0.0; 50], 16000, 1.25).unwrap();
        assert!(p.iter().all(|v| *v == 1.25));
    }

    #[test]
    fn chirp_matches_direct_summation() {
        let c = 0.05;
        let f: Vec<f64> = (0..20000).map(|m| m as f64 * c).collect();
        let p = cumulative_phase(&f, 44100, 0.3).unwrap();
        // brute force in closed form: Σ_{m=0..n} m·c = c·n(n+1)/2
        for n in (0..20000).step_by(997) {
            let want = TAU * c * (n * (n + 1)) as f64 / 2.0 / 44100.0 + 0.3;
            assert!((p[n] - want).abs() <= 1e-9 * want.abs().max(1.0), "n={n}");
        }
    }

    #[test]
    fn negative_frequency_rejected() {
        assert!(cumulative_phase(&[1.0, -1.0], 8000, 0.0).is_err());
        assert!(cumulative_phase(&[f64::NAN], 8000, 0.0).is_err());
        assert!(cumulative_phase(&[1.0], 0, 0.0).is_err());
    }

    #[test]
    fn wrapped_cycles_agree_with_unwrapped_phase() {
        let f: Vec<f64> = (0..44100).map(|m| 200.0 + (m % 97) as f64).collect();
        let p = cumulative_phase(&f, 44100, 0.0).unwrap();
        let c = cumulative_cycles_wrapped(&f, 44100);
        for n in (0..f.len()).step_by(331) {
            let a = (p[n] / TAU).rem_euclid(1.0);
            let d = (a - c[n]).abs();
            assert!(d.min(1.0 - d) < 1e-9, "n={n}");
            assert!((0.0..1.0).contains(&c[n]));
        }
    }
}
