//! Everything that touches disk: tensors, masks, manifests, reports, overlays
//! and error logs. Writers replace their target atomically.

mod errorlog;
mod manifest;
mod mask;
mod npy;
mod overlay;
mod report;

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use errorlog::{read_error_log, write_error_log, ErrorLogHeader};
pub use manifest::{DatasetManifest, ManifestEntry};
pub use mask::{read_mask, write_mask};
pub use npy::{read_npy, read_tensor, write_npy_f32, write_tensor};
pub use overlay::{emit_overlay, OverlayInfo};
pub use report::{rank_scores, read_report, write_report, ReportFormat, ScoreRecord};

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub(crate) fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        write(&mut buf).map_err(|e| Error::io(path, e))?;
        buf.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
