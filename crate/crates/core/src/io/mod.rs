//! File formats: WAV audio, the binary feature container, the F0 text
//! format and the flat configuration file.

mod f0_text;
mod features;
mod settings;
mod wav;

pub use f0_text::{load_f0, load_f0_file, parse_f0_text, save_f0, write_f0_text};
pub use features::{load_features, save_features, FeatureBundle, FEATURE_MAGIC, FEATURE_VERSION};
pub use settings::{Resolved, Settings};
pub use wav::{read_wav, write_wav, SampleFormat, WavWriteReport};

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Writes through a temporary file in the destination directory and renames
/// it into place, so a failed write never leaves a partial file behind.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
