//! Atomic file output: write to a temporary file in the destination
//! directory, then rename into place.

use std::path::Path;

use steerkit::{Result, SteerError};

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(SteerError::Io)?;
    std::io::Write::write_all(&mut tmp, contents.as_bytes()).map_err(SteerError::Io)?;
    tmp.persist(path)
        .map_err(|e| SteerError::Io(e.error))
        .map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_and_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, "first").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "first");
        write_atomic(&path, "second").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
    }
}
