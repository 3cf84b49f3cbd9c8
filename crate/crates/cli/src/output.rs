//! Output files are written to a temporary sibling and renamed into place only
//! once every file of a command is complete.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::CliError;

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("cannot write {}: {e}", path.display()))
}

/// Writes all `(path, contents)` pairs, or none of them.
pub fn write_all(files: &[(PathBuf, Vec<u8>)]) -> Result<(), CliError> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir).map_err(|e| io_error(path, e))?;
        tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
        tmp.as_file().sync_all().map_err(|e| io_error(path, e))?;
        staged.push((tmp, path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    }
    Ok(())
}

/// The JSON companion of a CSV output path.
pub fn json_mirror(csv: &Path) -> PathBuf {
    match csv.extension() {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => csv.with_extension("json"),
        _ => {
            let mut s = csv.as_os_str().to_owned();
            s.push(".json");
            PathBuf::from(s)
        }
    }
}
