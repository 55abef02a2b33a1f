//! Atomic output files: data goes to a temporary sibling first and is renamed
//! into place, so an interrupted run never leaves a partial file.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::Result;

fn temp_beside(path: &Path) -> Result<NamedTempFile> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    Ok(NamedTempFile::new_in(dir)?)
}

pub fn write_bytes_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = temp_beside(path)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Serializes `rows` as CSV with a header row derived from the row type.
pub fn write_csv_atomic<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    write_bytes_atomic(path, &csv_bytes(rows)?)
}

pub fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        #[derive(Serialize)]
        struct R {
            a: i32,
            b: f64,
        }
        write_csv_atomic(&p, [R { a: 1, b: 0.5 }, R { a: 2, b: 1.5 }]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a,b\n1,0.5\n2,1.5\n");
        write_csv_atomic(&p, [R { a: 3, b: 0.0 }]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a,b\n3,0.0\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
