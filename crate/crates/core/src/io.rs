//! Small file helpers shared by the stage readers and writers.

use std::fmt;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

/// A non-fatal problem found while reading or joining inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: Option<u64>,
    pub message: String,
}

impl Diagnostic {
    pub fn at_line(line: u64, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    pub fn general(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// CSV reader used for every input table: header row, `#` comment lines
/// (metadata headers) ignored, surrounding whitespace trimmed.
pub fn csv_reader<R: Read>(rdr: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(rdr)
}

/// Writes `bytes` to a temporary file beside `path` and renames it into
/// place, so readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Checks that a CSV header starts with the expected columns, in order.
pub fn expect_columns(found: &csv::StringRecord, expected: &[&str]) -> Result<(), String> {
    let got: Vec<&str> = found.iter().collect();
    if got.len() < expected.len() || got[..expected.len()] != *expected {
        return Err(format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/out.csv");
        atomic_write(&p, b"a\n").unwrap();
        atomic_write(&p, b"b\n").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"b\n");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn reader_skips_comments() {
        let data = "# tool=x\niso2,v\nIT,1\n# trailing\nFR,2\n";
        let mut r = csv_reader(data.as_bytes());
        expect_columns(r.headers().unwrap(), &["iso2", "v"]).unwrap();
        assert_eq!(r.records().count(), 2);
        assert!(expect_columns(&csv::StringRecord::from(vec!["v", "iso2"]), &["iso2", "v"]).is_err());
    }
}
