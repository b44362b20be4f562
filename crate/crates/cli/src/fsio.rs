use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::{CliError, Result};

/// Creates `dir` if needed and proves it is writable by creating and
/// removing a scratch file. Commands call this before any computation.
pub fn prepare_output_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))?;
    NamedTempFile::new_in(dir).map_err(|e| CliError::output(dir, e))?;
    Ok(())
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::output(path, e))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| CliError::output(path, e))?;
    tmp.persist(path)
        .map_err(|e| CliError::output(path, e.error))?;
    Ok(())
}

/// Collects the paths written by a command.
#[derive(Debug, Default)]
pub struct Written(pub Vec<PathBuf>);

impl Written {
    pub fn write(&mut self, path: PathBuf, bytes: &[u8]) -> Result<()> {
        write_atomic(&path, bytes)?;
        log::info!("wrote {}", path.display());
        self.0.push(path);
        Ok(())
    }
}
