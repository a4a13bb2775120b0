//! Small file helpers: atomic writes and JSONL framing.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Write `bytes` to `path` atomically (temp file in the same directory,
/// then rename). Concurrent writers of the same path are benign: one
/// complete version wins.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile_path(path);
    let mut attempt = 0u32;
    while tmp.exists() {
        attempt += 1;
        tmp = path.with_extension(format!("tmp.{attempt}"));
    }
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn tempfile_path(path: &Path) -> std::path::PathBuf {
    let pid = std::process::id();
    match path.file_name().and_then(|n| n.to_str()) {
        Some(name) => path.with_file_name(format!(".{name}.{pid}.tmp")),
        None => path.with_extension("tmp"),
    }
}

/// Serialize records as JSONL: one canonical JSON object per line,
/// newline-terminated, UTF-8.
pub fn to_jsonl<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| Error::Schema {
            path: "<memory>".into(),
            detail: format!("jsonl serialization failed: {e}"),
        })?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Write records as JSONL to `path`, atomically.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    atomic_write(path, to_jsonl(records)?.as_bytes())
}

/// Read a JSONL file into typed records. Blank lines are rejected: the
/// canonical format has exactly one object per line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let record = serde_json::from_str(&line).map_err(|e| {
            Error::schema(path, format!("line {}: {e}", idx + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}
