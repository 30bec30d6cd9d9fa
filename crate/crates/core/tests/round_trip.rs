use std::f64::consts::TAU;

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use hnsynth::analysis::{
    analyze, analyze_with_f0, estimate_f0, estimate_partials, frame_count, reconstruct_partials,
    AnalysisConfig,
};
use hnsynth::io::FeatureBundle;
use hnsynth::losses::mel_l1;
use hnsynth::signal::{
    harmonic_synthesize, F0Contour, HarmonicAmplitudes, InitialPhases, Waveform,
};
use hnsynth::spectral::{MelConfig, SpectralConfig};

const SR: u32 = 22050;

fn tone(f0_hz: f32, base: &[f64], depth: f64, rate: f64) -> (Waveform, HarmonicAmplitudes) {
    let spectral = SpectralConfig::for_sample_rate(SR);
    let hop = spectral.hop_size;
    let frames = SR as usize / hop;
    let h = Array2::from_shape_fn((frames, base.len()), |(m, k)| {
        let t = (m * hop) as f64 / f64::from(SR);
        (base[k] * (1.0 + depth * (TAU * rate * t + k as f64).sin())) as f32
    });
    let h = HarmonicAmplitudes::new(h).unwrap();
    let f0 = F0Contour::constant(hop, frames, f0_hz).unwrap();
    let x = harmonic_synthesize(&f0, &h, SR, &InitialPhases::zeros(base.len())).unwrap();
    (x, h)
}

fn resynthesize(x: &Waveform) -> FeatureBundle {
    let spectral = SpectralConfig::for_sample_rate(SR);
    let cfg = AnalysisConfig::new(spectral.hop_size);
    let a = analyze(x, &cfg, &spectral).unwrap();
    FeatureBundle::from_analysis(a, x, spectral, cfg)
}

#[test]
fn harmonic_tone_resynthesises_closely() {
    let (x, _) = tone(196.0, &[0.4, 0.25, 0.15, 0.1, 0.05], 0.1, 2.0);
    let y = resynthesize(&x).synthesize(3).unwrap();
    let l1 = mel_l1(&y, &x, &MelConfig::for_sample_rate(SR)).unwrap();
    assert!(l1 < 0.05, "mel-L1 {l1}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn smooth_tones_round_trip(
        f0_hz in 100.0f32..800.0,
        base in prop::collection::vec(0.06f64..0.5, 1..7),
        depth in 0.0f64..0.2,
        rate in 0.5f64..3.0,
    ) {
        let (x, truth) = tone(f0_hz, &base, depth, rate);
        let bundle = resynthesize(&x);
        let y = bundle.synthesize(0).unwrap();
        let l1 = mel_l1(&y, &x, &MelConfig::for_sample_rate(SR)).unwrap();
        prop_assert!(l1 < 0.1, "mel-L1 {}", l1);
        let frames = truth.frames();
        for m in 2..frames - 2 {
            for k in 0..base.len() {
                let want = f64::from(truth.values()[[m, k]]);
                if want < 0.05 || (k + 1) as f32 * f0_hz >= SR as f32 / 2.0 {
                    continue;
                }
                let got = f64::from(bundle.harmonics.values()[[m, k]]);
                prop_assert!((got - want).abs() / want < 0.1, "frame {} k {}: {} vs {}", m, k + 1, got, want);
            }
        }
    }
}

#[test]
fn residual_noise_energy_matches_injected_noise() {
    let spectral = SpectralConfig::for_sample_rate(SR);
    // subtract the recovered sine only
    let cfg = AnalysisConfig {
        k_max: 1,
        ..AnalysisConfig::new(spectral.hop_size)
    };
    let n = SR as usize;
    let sigma = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let d = Normal::new(0.0, sigma).unwrap();
    let x: Vec<f64> = (0..n)
        .map(|i| 0.5 * (TAU * 220.0 * i as f64 / f64::from(SR)).sin() + d.sample(&mut rng))
        .collect();
    let x = Waveform::new(x, SR).unwrap();
    let f0 =
        F0Contour::constant(spectral.hop_size, frame_count(n, spectral.hop_size), 220.0).unwrap();
    let track = estimate_partials(&x, &f0, &cfg, &spectral).unwrap();
    let sine = reconstruct_partials(&track, SR, n, &spectral).unwrap();
    let noise = hnsynth::analysis::estimate_noise(&x, &sine, &spectral).unwrap();

    let window_energy: f64 = spectral.frame_window().iter().map(|w| w * w).sum();
    let want = spectral.fft_size as f64 * window_energy * sigma * sigma;
    let last = spectral.bins() - 1;
    let frames = noise.frames();
    let got = noise
        .values()
        .rows()
        .into_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(k, v)| {
                    let p = f64::from(*v).powi(2);
                    if k == 0 || k == last {
                        p
                    } else {
                        2.0 * p
                    }
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        / frames as f64;
    let rel = (got - want).abs() / want;
    assert!(rel < 0.2, "noise energy off by {:.1}%", rel * 100.0);
}

#[test]
fn f0_is_stable_under_small_shifts() {
    let cfg = AnalysisConfig::new(256);
    let sine = |shift: usize| {
        let v = (0..SR as usize)
            .map(|i| 0.4 * (TAU * 330.0 * (i + shift) as f64 / f64::from(SR)).sin())
            .collect();
        estimate_f0(&Waveform::new(v, SR).unwrap(), &cfg).unwrap()
    };
    let a = sine(0);
    for shift in [1, 7, 20] {
        let b = sine(shift);
        for m in 2..a.frames() - 2 {
            assert!(a.voiced()[m] && b.voiced()[m]);
            let d = (a.values()[m] - b.values()[m]).abs();
            assert!(d < 1.0, "shift {shift} frame {m}: {d} Hz");
        }
    }
}

#[test]
fn imported_contour_drives_analysis() {
    let (x, _) = tone(150.0, &[0.3, 0.2], 0.0, 1.0);
    let spectral = SpectralConfig::for_sample_rate(SR);
    let cfg = AnalysisConfig::new(spectral.hop_size);
    let frames = frame_count(x.len(), spectral.hop_size);
    let mut v = vec![150.0f32; frames];
    v[frames / 2] = 0.0;
    let f0 = F0Contour::new(spectral.hop_size, v).unwrap();
    let a = analyze_with_f0(&x, f0.clone(), &cfg, &spectral).unwrap();
    assert_eq!(a.f0, f0);
    assert!(a
        .harmonics
        .values()
        .row(frames / 2)
        .iter()
        .all(|v| *v == 0.0));
    assert!((a.harmonics.values()[[frames / 4, 0]] - 0.3).abs() < 0.015);
}
