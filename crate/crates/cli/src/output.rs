use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

pub const VERSION: &str = concat!("comp-dbrb ", env!("CARGO_PKG_VERSION"));

/// First line of every CSV file.
pub fn provenance_line(config_hash: &str, seed: Option<u64>) -> String {
    let seed = seed.map_or_else(|| "all".to_string(), |s| s.to_string());
    format!("# config_sha256={config_hash} seed={seed} version={VERSION}")
}

/// Writes a provenance comment, a header row and one row per record.
pub fn write_csv<T: Serialize>(path: &Path, provenance: &str, rows: &[T]) -> Result<()> {
    let mut file = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(file, "{provenance}")?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Reads back a CSV written by [`write_csv`].
pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}
