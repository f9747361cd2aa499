use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const OUT_DIR_ENV: &str = "ERASERLAB_OUT_DIR";

/// Output path: the explicit `--out`, else `default_name` inside `$ERASERLAB_OUT_DIR`
/// when that is set, else nothing.
pub fn resolve_out(out: Option<&Path>, default_name: &str) -> Option<PathBuf> {
    match out {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(default_name)),
    }
}

fn parent_of(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Fails early when the directory that will hold `path` does not exist.
pub fn check_writable(path: &Path) -> Result<(), CliError> {
    let dir = parent_of(path);
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::Io(format!("output directory {} does not exist", dir.display())))
    }
}

/// Writes through a temporary file in the target directory, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = tempfile::NamedTempFile::new_in(parent_of(path))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}
