//! Atomic output helpers: everything is written to a temp file in the
//! destination directory and renamed into place, so a failed run leaves no
//! partial outputs.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
    }
    let dir = dir.unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(bytes).context("writing output")?;
    tmp.flush().context("flushing output")?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Formats an optional float: empty cell when absent.
pub fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Builds a CSV document from a header and row iterator with stable,
/// shortest-round-trip float formatting (via each cell's `to_string`).
pub fn csv_document<R, C>(header: &[&str], rows: R) -> Result<String>
where
    R: IntoIterator<Item = C>,
    C: IntoIterator<Item = String>,
{
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row.into_iter().collect::<Vec<_>>())?;
    }
    let bytes = writer.into_inner().context("finishing CSV")?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// A short human summary line listing files written.
pub fn written_note(paths: &[&Path]) -> String {
    let mut s = String::from("wrote");
    for p in paths {
        let _ = write!(s, " {}", p.display());
    }
    s
}
