//! Plain-text pitch contours.
//!
//! ```text
//! # hop=256 sr=22050
//! 220
//! 220.5
//! 0
//! ```
//!
//! Line 1 declares the hop (samples) and sample rate (Hz). Every following
//! non-blank, non-`#` line holds one frame's f0 in Hz; 0 marks unvoiced.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::F0Contour;

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        line,
        msg: msg.into(),
    }
}

fn parse_header(path: &Path, line: &str) -> Result<(usize, u32)> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| parse_err(path, 1, "expected header '# hop=<samples> sr=<hz>'"))?;
    let (mut hop, mut sr) = (None, None);
    for field in body.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| parse_err(path, 1, format!("malformed header field '{field}'")))?;
        match key {
            "hop" => {
                hop = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| parse_err(path, 1, format!("invalid hop '{value}'")))?,
                )
            }
            "sr" => {
                sr =
                    Some(value.parse::<u32>().map_err(|_| {
                        parse_err(path, 1, format!("invalid sample rate '{value}'"))
                    })?)
            }
            _ => return Err(parse_err(path, 1, format!("unknown header key '{key}'"))),
        }
    }
    match (hop, sr) {
        (Some(h), Some(s)) if h > 0 && s > 0 => Ok((h, s)),
        _ => Err(parse_err(path, 1, "header needs positive hop= and sr=")),
    }
}

/// Parses the text format; `path` is only used in error messages.
pub fn parse_f0_text(text: &str, path: &Path) -> Result<(F0Contour, u32)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let (hop, sr) = parse_header(path, header.trim())?;
    let mut values = Vec::new();
    for (i, raw) in lines.enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = i + 2;
        let v: f32 = line
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("'{line}' is not a number")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(parse_err(
                path,
                lineno,
                format!("f0 {v} must be finite and >= 0"),
            ));
        }
        values.push(v);
    }
    Ok((F0Contour::new(hop, values)?, sr))
}

/// Contour and declared sample rate.
pub fn load_f0_file(path: impl AsRef<Path>) -> Result<(F0Contour, u32)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_f0_text(&text, path)
}

pub fn load_f0(path: impl AsRef<Path>) -> Result<F0Contour> {
    load_f0_file(path).map(|(c, _)| c)
}

pub fn write_f0_text(f0: &F0Contour, sample_rate: u32, w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "# hop={} sr={}", f0.hop_size(), sample_rate)?;
    for v in f0.values() {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn save_f0(f0: &F0Contour, sample_rate: u32, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    super::write_atomic(path, |w| {
        write_f0_text(f0, sample_rate, w).map_err(|e| Error::io(path, e))
    })
}
