use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Codec;
use crate::error::{Error, Result};

/// One (reference, distorted, subjective score) row of a dataset manifest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRecord {
    /// Resolved against the manifest's directory.
    pub ref_path: PathBuf,
    pub dist_path: PathBuf,
    pub mos: f64,
    pub codec: Codec,
}

pub const MANIFEST_HEADER: [&str; 4] = ["ref", "dist", "mos", "codec"];

/// Reads a `ref,dist,mos,codec` CSV manifest.
pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Vec<EvalRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest_str(&text, path, base)
}

pub fn parse_manifest_str(text: &str, path: &Path, base: &Path) -> Result<Vec<EvalRecord>> {
    let malformed = |line: u64, reason: String| Error::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(malformed(
            1,
            format!("expected header `{}`", MANIFEST_HEADER.join(",")),
        ));
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if row.iter().all(str::is_empty) {
            continue;
        }
        if row.len() != 4 {
            return Err(malformed(
                line,
                format!("expected 4 columns, got {}", row.len()),
            ));
        }
        let mos: f64 = row[2]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| malformed(line, format!("unparsable mos `{}`", &row[2])))?;
        records.push(EvalRecord {
            ref_path: base.join(&row[0]),
            dist_path: base.join(&row[1]),
            mos,
            codec: Codec::parse(&row[3]),
        });
    }
    Ok(records)
}
