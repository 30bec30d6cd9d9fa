//! Binary feature container.
//!
//! Layout, all integers little-endian:
//!
//! | bytes        | content                                      |
//! |--------------|----------------------------------------------|
//! | 4            | magic `HNSF`                                 |
//! | 4            | format version (u32)                         |
//! | 8            | JSON header length `h` (u64)                 |
//! | h            | UTF-8 JSON header ([`Header`])               |
//! | 4·frames     | f0 in Hz (f32)                               |
//! | 4·frames·K   | harmonic amplitudes, row-major (f32)         |
//! | 4·frames·B   | noise magnitudes, row-major (f32)            |
//!
//! Voicing is not stored; it is implied by zero f0. The header also carries
//! the K starting phases of the harmonic bank.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::analysis::{Analysis, AnalysisConfig};
use crate::error::{Error, Result};
use crate::signal::{
    dsp_combine, harmonic_synthesize_len, noise_synthesize_len, F0Contour, HarmonicAmplitudes,
    InitialPhases, NoiseMagnitudeSpectrum, Waveform,
};
use crate::spectral::SpectralConfig;

pub const FEATURE_MAGIC: &[u8; 4] = b"HNSF";
pub const FEATURE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub f0: F0Contour,
    pub harmonics: HarmonicAmplitudes,
    pub noise: NoiseMagnitudeSpectrum,
    pub phases: InitialPhases,
    pub sample_rate: u32,
    /// Length of the analysed signal; resynthesis is cut to this.
    pub num_samples: usize,
    pub spectral: SpectralConfig,
    pub analysis: AnalysisConfig,
}

impl FeatureBundle {
    pub fn from_analysis(
        a: Analysis,
        x: &Waveform,
        spectral: SpectralConfig,
        analysis: AnalysisConfig,
    ) -> Self {
        Self {
            f0: a.f0,
            harmonics: a.harmonics,
            noise: a.noise,
            phases: a.phases,
            sample_rate: x.sample_rate(),
            num_samples: x.len(),
            spectral,
            analysis,
        }
    }

    /// Harmonic plus noise branch, `num_samples` long. The noise phases are
    /// drawn from `seed`.
    pub fn synthesize(&self, seed: u64) -> Result<Waveform> {
        self.validate()?;
        let h = harmonic_synthesize_len(
            &self.f0,
            &self.harmonics,
            self.sample_rate,
            &self.phases,
            self.num_samples,
        )?;
        let n = noise_synthesize_len(&self.noise, &self.spectral, seed, self.num_samples)?;
        dsp_combine(&h, &n)
    }

    pub fn validate(&self) -> Result<()> {
        let frames = self.f0.frames();
        if frames == 0 {
            return Err(Error::invalid("feature bundle has no frames"));
        }
        if self.harmonics.frames() != frames || self.noise.frames() != frames {
            return Err(Error::invalid(format!(
                "frame counts differ: f0 {frames}, harmonics {}, noise {}",
                self.harmonics.frames(),
                self.noise.frames()
            )));
        }
        if self.phases.len() != self.harmonics.k_max() {
            return Err(Error::invalid(format!(
                "{} initial phases for {} harmonics",
                self.phases.len(),
                self.harmonics.k_max()
            )));
        }
        if self.f0.hop_size() != self.spectral.hop_size {
            return Err(Error::invalid(format!(
                "f0 hop {} differs from spectral hop {}",
                self.f0.hop_size(),
                self.spectral.hop_size
            )));
        }
        if self.noise.bins() != self.spectral.bins() {
            return Err(Error::invalid(format!(
                "noise has {} bins, spectral config implies {}",
                self.noise.bins(),
                self.spectral.bins()
            )));
        }
        if self.sample_rate != self.spectral.sample_rate {
            return Err(Error::invalid("bundle and spectral sample rates differ"));
        }
        if self.num_samples > frames * self.spectral.hop_size {
            return Err(Error::invalid("num_samples exceeds the frame span"));
        }
        self.spectral.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    version: u32,
    sample_rate: u32,
    num_samples: usize,
    frames: usize,
    hop_size: usize,
    k_max: usize,
    bins: usize,
    initial_phases: Vec<f64>,
    spectral: SpectralConfig,
    analysis: AnalysisConfig,
}

fn put_f32s<'a>(out: &mut Vec<u8>, vals: impl Iterator<Item = &'a f32>) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn save_features(bundle: &FeatureBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    bundle.validate()?;
    let header = Header {
        version: FEATURE_VERSION,
        sample_rate: bundle.sample_rate,
        num_samples: bundle.num_samples,
        frames: bundle.f0.frames(),
        hop_size: bundle.f0.hop_size(),
        k_max: bundle.harmonics.k_max(),
        bins: bundle.noise.bins(),
        initial_phases: bundle.phases.values().to_vec(),
        spectral: bundle.spectral,
        analysis: bundle.analysis,
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut buf = Vec::new();
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    put_f32s(&mut buf, bundle.f0.values().iter());
    put_f32s(&mut buf, bundle.harmonics.values().iter());
    put_f32s(&mut buf, bundle.noise.values().iter());
    super::write_atomic(path, |w| w.write_all(&buf).map_err(|e| Error::io(path, e)))
}

struct Cursor<'a> {
    path: &'a Path,
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.data.len());
        match end {
            Some(end) => {
                let s = &self.data[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated {
                path: self.path.into(),
                msg: format!(
                    "{what}: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.data.len()
                ),
            }),
        }
    }

    fn f32s(&mut self, count: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = count.checked_mul(4).ok_or_else(|| Error::Malformed {
            path: self.path.into(),
            msg: format!("{what} size overflows"),
        })?;
        Ok(self
            .take(bytes, what)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureBundle> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let malformed = |msg: String| Error::Malformed {
        path: path.into(),
        msg,
    };
    let mut cur = Cursor {
        path,
        data: &data,
        pos: 0,
    };
    if cur.take(4, "magic")? != FEATURE_MAGIC {
        return Err(malformed("not a feature file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(cur.take(4, "version")?.try_into().expect("4 bytes"));
    if version != FEATURE_VERSION {
        return Err(Error::VersionMismatch {
            path: path.into(),
            found: version,
            expected: FEATURE_VERSION,
        });
    }
    let hlen = u64::from_le_bytes(cur.take(8, "header length")?.try_into().expect("8 bytes"));
    let hlen = usize::try_from(hlen).map_err(|_| malformed("header length overflows".into()))?;
    let header: Header = serde_json::from_slice(cur.take(hlen, "header")?)
        .map_err(|e| malformed(format!("bad header: {e}")))?;
    if header.version != version {
        return Err(malformed("header version disagrees with preamble".into()));
    }
    let frames = header.frames;
    let f0 = cur.f32s(frames, "f0")?;
    let harm = cur.f32s(frames.saturating_mul(header.k_max), "harmonics")?;
    let noise = cur.f32s(frames.saturating_mul(header.bins), "noise")?;
    if cur.pos != data.len() {
        return Err(malformed(format!(
            "{} trailing bytes after payload",
            data.len() - cur.pos
        )));
    }
    let shape_err = |e: ndarray::ShapeError| malformed(e.to_string());
    let bundle = FeatureBundle {
        f0: F0Contour::new(header.hop_size, f0)?,
        harmonics: HarmonicAmplitudes::new(
            Array2::from_shape_vec((frames, header.k_max), harm).map_err(shape_err)?,
        )?,
        noise: NoiseMagnitudeSpectrum::new(
            Array2::from_shape_vec((frames, header.bins), noise).map_err(shape_err)?,
        )?,
        phases: InitialPhases::new(header.initial_phases)?,
        sample_rate: header.sample_rate,
        num_samples: header.num_samples,
        spectral: header.spectral,
        analysis: header.analysis,
    };
    bundle.validate().map_err(|e| malformed(e.to_string()))?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bundle(seed: u64, frames: usize) -> FeatureBundle {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spectral = SpectralConfig::for_sample_rate(22050);
        let f0: Vec<f32> = (0..frames)
            .map(|_| {
                if rng.random_bool(0.3) {
                    0.0
                } else {
                    rng.random_range(80.0..800.0)
                }
            })
            .collect();
        let k = 7;
        let h = Array2::from_shape_fn((frames, k), |_| rng.random_range(0.0f32..1.0));
        let n = Array2::from_shape_fn((frames, spectral.bins()), |_| rng.random_range(0.0f32..5.0));
        FeatureBundle {
            f0: F0Contour::new(spectral.hop_size, f0).unwrap(),
            harmonics: HarmonicAmplitudes::new(h).unwrap(),
            noise: NoiseMagnitudeSpectrum::new(n).unwrap(),
            phases: InitialPhases::new((0..k).map(|_| rng.random_range(-3.0..3.0)).collect())
                .unwrap(),
            sample_rate: 22050,
            num_samples: frames * spectral.hop_size - 17,
            spectral,
            analysis: AnalysisConfig::new(spectral.hop_size),
        }
    }

    #[test]
    fn round_trip_identity() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.hnsf");
        let b = random_bundle(42, 23);
        save_features(&b, &p).unwrap();
        assert_eq!(load_features(&p).unwrap(), b);
    }

    #[test]
    fn truncation_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.hnsf");
        save_features(&random_bundle(1, 5), &p).unwrap();
        let data = std::fs::read(&p).unwrap();
        for cut in [2, 10, 40, data.len() - 1] {
            std::fs::write(&p, &data[..cut]).unwrap();
            match load_features(&p) {
                Err(Error::Truncated { .. }) => {}
                // a cut inside the JSON header shows up as a truncated header
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn version_and_magic_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.hnsf");
        save_features(&random_bundle(2, 4), &p).unwrap();
        let mut data = std::fs::read(&p).unwrap();
        data[4] = 9;
        std::fs::write(&p, &data).unwrap();
        assert!(matches!(
            load_features(&p),
            Err(Error::VersionMismatch { found: 9, .. })
        ));
        data[0] = b'X';
        std::fs::write(&p, &data).unwrap();
        assert!(matches!(load_features(&p), Err(Error::Malformed { .. })));
    }

    #[test]
    fn empty_bundle_rejected_at_save() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.hnsf");
        let spectral = SpectralConfig::for_sample_rate(22050);
        let b = FeatureBundle {
            f0: F0Contour::new(spectral.hop_size, vec![]).unwrap(),
            harmonics: HarmonicAmplitudes::zeros(0, 3).unwrap(),
            noise: NoiseMagnitudeSpectrum::zeros(0, spectral.bins()).unwrap(),
            phases: InitialPhases::zeros(3),
            sample_rate: 22050,
            num_samples: 0,
            spectral,
            analysis: AnalysisConfig::new(spectral.hop_size),
        };
        assert!(matches!(
            save_features(&b, &p),
            Err(Error::InvalidArgument(_))
        ));
        assert!(!p.exists());
    }

    #[test]
    fn synthesize_is_seeded() {
        let b = random_bundle(4, 12);
        let y1 = b.synthesize(3).unwrap();
        assert_eq!(y1.len(), b.num_samples);
        assert_eq!(y1, b.synthesize(3).unwrap());
        assert_ne!(y1, b.synthesize(4).unwrap());
    }

    #[test]
    fn inconsistent_bundle_rejected() {
        let mut b = random_bundle(3, 6);
        b.harmonics = HarmonicAmplitudes::zeros(5, 7).unwrap();
        assert!(b.validate().is_err());
        let mut b = random_bundle(3, 6);
        b.phases = InitialPhases::zeros(6);
        assert!(b.validate().is_err());
    }
}
