use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hound::{SampleFormat as HoundFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::signal::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleFormat {
    #[default]
    Pcm16,
    Float32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WavWriteReport {
    /// Samples outside [-1, 1] that were clipped.
    pub clipped: usize,
}

fn map_hound(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::Unsupported => Error::Unsupported {
            path: path.into(),
            msg: "codec or layout not supported".into(),
        },
        hound::Error::FormatError(msg) => Error::Malformed {
            path: path.into(),
            msg: msg.into(),
        },
        other => Error::Malformed {
            path: path.into(),
            msg: other.to_string(),
        },
    }
}

/// Reads a PCM (16/24/32-bit) or float32 WAV file as samples in [-1, 1].
/// Stereo is averaged to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = WavReader::new(BufReader::new(file)).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels);
    if channels == 0 || channels > 2 {
        return Err(Error::Unsupported {
            path: path.into(),
            msg: format!("{channels} channels (mono or stereo only)"),
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (HoundFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        (HoundFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = (1u64 << (bits - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(path, e))?
        }
        (fmt, bits) => {
            return Err(Error::Unsupported {
                path: path.into(),
                msg: format!("{bits}-bit {fmt:?} samples"),
            })
        }
    };
    let samples = if channels == 2 {
        log::warn!("{}: stereo input averaged to mono", path.display());
        interleaved
            .chunks_exact(2)
            .map(|c| 0.5 * (c[0] + c[1]))
            .collect()
    } else {
        interleaved
    };
    Waveform::new(samples, spec.sample_rate)
}

/// Writes mono audio, clipping to [-1, 1]. The file appears atomically.
pub fn write_wav(
    x: &Waveform,
    path: impl AsRef<Path>,
    format: SampleFormat,
) -> Result<WavWriteReport> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: x.sample_rate(),
        bits_per_sample: match format {
            SampleFormat::Pcm16 => 16,
            SampleFormat::Float32 => 32,
        },
        sample_format: match format {
            SampleFormat::Pcm16 => HoundFormat::Int,
            SampleFormat::Float32 => HoundFormat::Float,
        },
    };
    let mut report = WavWriteReport::default();
    super::write_atomic(path, |w| {
        let mut cursor = std::io::Cursor::new(Vec::new());
        {
            let mut writer = WavWriter::new(&mut cursor, spec).map_err(|e| map_hound(path, e))?;
            for &s in x.samples() {
                if s.abs() > 1.0 {
                    report.clipped += 1;
                }
                let s = s.clamp(-1.0, 1.0);
                match format {
                    SampleFormat::Pcm16 => {
                        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                        writer.write_sample(q)
                    }
                    SampleFormat::Float32 => writer.write_sample(s as f32),
                }
                .map_err(|e| map_hound(path, e))?;
            }
            writer.finalize().map_err(|e| map_hound(path, e))?;
        }
        w.write_all(cursor.get_ref())
            .map_err(|e| Error::io(path, e))
    })?;
    if report.clipped > 0 {
        log::warn!("{}: clipped {} samples", path.display(), report.clipped);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(len: usize, sr: u32) -> Waveform {
        Waveform::new(
            (0..len)
                .map(|i| (i as f64 / len as f64) * 1.8 - 0.9)
                .collect(),
            sr,
        )
        .unwrap()
    }

    #[test]
    fn pcm16_round_trip_within_one_lsb() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let x = ramp(5000, 44100);
        let r = write_wav(&x, &p, SampleFormat::Pcm16).unwrap();
        assert_eq!(r.clipped, 0);
        let y = read_wav(&p).unwrap();
        assert_eq!(y.sample_rate(), 44100);
        assert_eq!(y.len(), x.len());
        for (a, b) in x.samples().iter().zip(y.samples()) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn float32_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let x = ramp(3000, 22050);
        write_wav(&x, &p, SampleFormat::Float32).unwrap();
        let y = read_wav(&p).unwrap();
        for (a, b) in x.samples().iter().zip(y.samples()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn zeros_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.wav");
        write_wav(
            &Waveform::silence(1234, 16000).unwrap(),
            &p,
            SampleFormat::Pcm16,
        )
        .unwrap();
        let y = read_wav(&p).unwrap();
        assert_eq!(y.len(), 1234);
        assert!(y.samples().iter().all(|v| *v == 0.0));

        let p = dir.path().join("e.wav");
        write_wav(
            &Waveform::silence(0, 16000).unwrap(),
            &p,
            SampleFormat::Pcm16,
        )
        .unwrap();
        assert!(read_wav(&p).unwrap().is_empty());
    }

    #[test]
    fn clipping_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.wav");
        let x = Waveform::new(vec![0.0, 1.5, -2.0, 0.5], 8000).unwrap();
        let r = write_wav(&x, &p, SampleFormat::Pcm16).unwrap();
        assert_eq!(r.clipped, 2);
        let y = read_wav(&p).unwrap();
        assert!((y.samples()[1] - 32767.0 / 32768.0).abs() < 1e-12);
        assert_eq!(y.samples()[2], -1.0);
    }

    #[test]
    fn stereo_is_averaged() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: HoundFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        for (l, r) in [(16384i16, 0i16), (-8192, -8192)] {
            w.write_sample(l).unwrap();
            w.write_sample(r).unwrap();
        }
        w.finalize().unwrap();
        let y = read_wav(&p).unwrap();
        assert_eq!(y.samples(), &[0.25, -0.25]);
    }

    #[test]
    fn error_variants() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_wav(dir.path().join("missing.wav")),
            Err(Error::NotFound(_))
        ));
        let p = dir.path().join("junk.wav");
        std::fs::write(&p, b"definitely not a wav file").unwrap();
        assert!(matches!(read_wav(&p), Err(Error::Malformed { .. })));

        let p = dir.path().join("u8.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 8,
            sample_format: HoundFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        w.write_sample(3i8).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p), Err(Error::Unsupported { .. })));

        let bad = dir.path().join("no/such/dir/out.wav");
        let e = write_wav(
            &Waveform::silence(4, 8000).unwrap(),
            bad,
            SampleFormat::Pcm16,
        )
        .unwrap_err();
        assert_eq!(e.kind(), crate::error::ErrorKind::Io);
    }
}
